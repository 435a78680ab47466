#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bsol/errors.hpp"
#include "bsol/expr.hpp"
#include "bsol/numeric.hpp"

namespace bsol {

// One payoff piece: a closed-form expression on a cell of the state space.
struct PayoffPiece {
    double lo = 0.0;
    double hi = kInf;
    Expr expr;
};

// Piecewise closed-form reward g.  Pieces must tile the state interval with
// disjoint interiors.  At every internal breakpoint the stored value is
// max(left limit, right limit), which makes g upper semicontinuous by
// construction.  Finite state-space endpoints may carry explicit values
// (used with reflecting/absorbing boundaries, where the endpoint is a
// bona fide state).
class Payoff {
public:
    Payoff() = default;

    Payoff(std::vector<PayoffPiece> pieces,
           std::optional<double> value_at_lower = std::nullopt,
           std::optional<double> value_at_upper = std::nullopt)
        : pieces_(std::move(pieces)),
          value_at_lower_(value_at_lower),
          value_at_upper_(value_at_upper) {
        if (pieces_.empty()) throw ValidationError("payoff: no pieces given");
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            const auto& p = pieces_[i];
            if (!(p.lo < p.hi))
                throw ValidationError("payoff: piece with empty interior");
            if (i > 0 && pieces_[i - 1].hi != p.lo)
                throw ValidationError("payoff: pieces must tile the state interval");
        }
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i)
            breakpoints_.push_back(pieces_[i].hi);
    }

    static Payoff single(const std::string& expr_text,
                         double lo = 0.0, double hi = kInf) {
        return Payoff({PayoffPiece{lo, hi, Expr::parse(expr_text)}});
    }

    double lower() const { return pieces_.front().lo; }
    double upper() const { return pieces_.back().hi; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<PayoffPiece>& pieces() const { return pieces_; }
    std::optional<double> value_at_lower() const { return value_at_lower_; }
    std::optional<double> value_at_upper() const { return value_at_upper_; }

    double operator()(double x) const {
        if (x == lower() && value_at_lower_) return *value_at_lower_;
        if (x == upper() && value_at_upper_) return *value_at_upper_;
        // Internal breakpoints: upper semicontinuous value.
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
            if (x == pieces_[i].hi)
                return std::max(pieces_[i].expr.eval(x), pieces_[i + 1].expr.eval(x));
        }
        return piece_at(x).expr.eval(x);
    }

    // One-sided limits at a point (closed-form pieces are continuous inside
    // their cells, so the limit is the adjacent cell's value).
    double left_limit(double x) const {
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i)
            if (x == pieces_[i].hi) return pieces_[i].expr.eval(x);
        return piece_at(x).expr.eval(x);
    }
    double right_limit(double x) const {
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i)
            if (x == pieces_[i].hi) return pieces_[i + 1].expr.eval(x);
        return piece_at(x).expr.eval(x);
    }

    // Sampled sanity check: the reward must attain positive values somewhere,
    // otherwise stopping is never worthwhile and the problem is vacuous.
    void require_positive_somewhere(std::span<const double> grid) const {
        for (double x : grid)
            if ((*this)(x) > 0.0) return;
        throw ValidationError("payoff: g(x) <= 0 at every sampled point");
    }

private:
    const PayoffPiece& piece_at(double x) const {
        for (const auto& p : pieces_)
            if (x >= p.lo && x < p.hi) return p;
        return pieces_.back();
    }

    std::vector<PayoffPiece> pieces_;
    std::vector<double> breakpoints_;
    std::optional<double> value_at_lower_;
    std::optional<double> value_at_upper_;
};

// Lightweight payoff view used by the analysis layers: any callable payoff
// plus the abscissae that every evaluation grid must include.  Transformed
// payoffs (g minus a resolvent term) are not closed-form pieces, so the
// solvers work against this adapter.
struct PayoffFn {
    std::function<double(double)> f;
    std::vector<double> breakpoints;

    PayoffFn() = default;
    PayoffFn(std::function<double(double)> fn, std::vector<double> bps)
        : f(std::move(fn)), breakpoints(std::move(bps)) {}
    PayoffFn(const Payoff& g)  // NOLINT: implicit adapter on purpose
        : f([g](double x) { return g(x); }), breakpoints(g.breakpoints()) {}

    double operator()(double x) const { return f(x); }
};

}  // namespace bsol
