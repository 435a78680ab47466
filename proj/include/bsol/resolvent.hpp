#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "bsol/errors.hpp"
#include "bsol/fundamental.hpp"
#include "bsol/numeric.hpp"
#include "bsol/payoff.hpp"

namespace bsol {

namespace detail {

// 5-point Gauss-Legendre rule on [-1, 1].
inline constexpr double kGL5X[5] = {
    -0.9061798459386639928, -0.5384693101056830910, 0.0,
    0.5384693101056830910, 0.9061798459386639928};
inline constexpr double kGL5W[5] = {
    0.2369268850561890875, 0.4786286704993664680, 0.5688888888888888889,
    0.4786286704993664680, 0.2369268850561890875};

// Shared quadrature tables for the Green kernel: fixed panels in log state
// (16 per decade, Gauss-Legendre 5 inside, payoff breakpoints as extra panel
// edges), spanning 4 decades past the working window.  The node set does not
// depend on the integrand, so the induced operator is linear to rounding.
struct GreenKernel {
    struct Node {
        double y, w, log_psi_m, log_phi_m;
    };

    FundamentalPair pair;
    std::vector<double> edges;
    std::vector<Node> nodes;  // 5 per panel

    GreenKernel(const FundamentalPair& p, const DiffusionSpec& spec,
                std::span<const double> breakpoints)
        : pair(p) {
        const double lo = spec.grid_lo() * 1e-8;
        const double hi = spec.grid_hi() * 1e8;
        const int per_decade = 16;
        const int n_panels = int(std::ceil(std::log10(hi / lo) * per_decade));
        edges.resize(std::size_t(n_panels) + 1);
        for (int i = 0; i <= n_panels; ++i)
            edges[std::size_t(i)] = lo * std::pow(hi / lo, double(i) / n_panels);
        merge_into_grid(edges, breakpoints);

        nodes.reserve((edges.size() - 1) * 5);
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            const double a = std::log(edges[p]), b = std::log(edges[p + 1]);
            const double c = 0.5 * (a + b), h = 0.5 * (b - a);
            for (int k = 0; k < 5; ++k) {
                Node n;
                n.y = std::exp(c + h * kGL5X[k]);
                n.w = h * kGL5W[k] * n.y;  // dy = y ds in log state
                n.log_psi_m = pair.log_psi(n.y) + std::log(pair.speed_density(n.y));
                n.log_phi_m = pair.log_phi(n.y) + std::log(pair.speed_density(n.y));
                nodes.push_back(n);
            }
        }
    }

    template <class Pi>
    double partial(const Pi& pi, double a, double b, bool psi_side) const {
        if (!(b > a)) return 0.0;
        const double la = std::log(a), lb = std::log(b);
        const double c = 0.5 * (la + lb), h = 0.5 * (lb - la);
        double s = 0.0;
        for (int k = 0; k < 5; ++k) {
            const double y = std::exp(c + h * kGL5X[k]);
            const double lg = psi_side
                                  ? pair.log_psi(y) + std::log(pair.speed_density(y))
                                  : pair.log_phi(y) + std::log(pair.speed_density(y));
            s += h * kGL5W[k] * y * pi(y) * std::exp(lg);
        }
        return s;
    }
};

}  // namespace detail

// The cumulative net present value of a running payoff pi:
//   (R_r pi)(x) = B^{-1} [ phi(x) int_0^x psi pi m' dy
//                        + psi(x) int_x^inf phi pi m' dy ],
// together with its first derivative (the boundary terms of the two
// integrals cancel when differentiating).  Self-contained value object;
// copies share the precomputed kernel.
class Resolvent {
public:
    Resolvent(const FundamentalPair& pair, const DiffusionSpec& spec, PayoffFn pi)
        : kernel_(std::make_shared<detail::GreenKernel>(pair, spec, pi.breakpoints)),
          pi_(std::move(pi.f)) {
        const std::size_t np = kernel_->edges.size() - 1;
        prefix_psi_.assign(np + 1, 0.0);
        suffix_phi_.assign(np + 1, 0.0);
        std::vector<double> panel_psi(np, 0.0), panel_phi(np, 0.0);
        for (std::size_t p = 0; p < np; ++p) {
            double sp = 0.0, sf = 0.0;
            for (std::size_t k = 5 * p; k < 5 * p + 5; ++k) {
                const auto& n = kernel_->nodes[k];
                const double piv = pi_(n.y);
                if (piv == 0.0) continue;
                sp += n.w * piv * std::exp(n.log_psi_m);
                sf += n.w * piv * std::exp(n.log_phi_m);
            }
            panel_psi[p] = sp;
            panel_phi[p] = sf;
        }
        for (std::size_t p = 0; p < np; ++p)
            prefix_psi_[p + 1] = prefix_psi_[p] + panel_psi[p];
        for (std::size_t p = np; p-- > 0;)
            suffix_phi_[p] = suffix_phi_[p + 1] + panel_phi[p];
        if (!std::isfinite(prefix_psi_[np]) || !std::isfinite(suffix_phi_[0]))
            throw DivergentIntegral("resolvent: quadrature overflowed");
        // Truncation-error estimates by geometric extrapolation of the two
        // outermost decade contributions on each cut side (I_lo is cut off
        // below the table, I_hi above it).
        auto decade_sum = [&](const std::vector<double>& panel, std::size_t from) {
            double s = 0.0;
            for (std::size_t p = from; p < std::min(from + 16, np); ++p) s += panel[p];
            return s;
        };
        auto extrapolate = [](double last, double prev) {
            const double rho = std::abs(last) / std::max(std::abs(prev), 1e-300);
            if (rho >= 0.9) return kInf;  // not settling: genuinely divergent tail
            return std::abs(last) * rho / (1.0 - rho);
        };
        if (np >= 32) {
            lo_tail_ = extrapolate(decade_sum(panel_psi, 0), decade_sum(panel_psi, 16));
            hi_tail_ = extrapolate(decade_sum(panel_phi, np - 16), decade_sum(panel_phi, np - 32));
        }
    }

    double value(double x) const { return combine(x, false); }
    double deriv(double x) const { return combine(x, true); }
    double operator()(double x) const { return value(x); }

private:
    double combine(double x, bool want_deriv) const {
        const auto& edges = kernel_->edges;
        if (!(x > edges.front() && x < edges.back()))
            throw ValidationError("resolvent: x outside the quadrature window");
        const std::size_t p = std::size_t(
            std::upper_bound(edges.begin(), edges.end(), x) - edges.begin()) - 1;
        const double ilo = prefix_psi_[p] + kernel_->partial(pi_, edges[p], x, true);
        const double ihi = suffix_phi_[p + 1] + kernel_->partial(pi_, x, edges[p + 1], false);
        if (!std::isfinite(ilo) || !std::isfinite(ihi))
            throw DivergentIntegral("resolvent: integral not finite");
        const auto& pr = kernel_->pair;
        const double B = pr.wronskian();
        const double phi_x = pr.phi(x), psi_x = pr.psi(x);
        const double magnitude = std::abs(phi_x * ilo) + std::abs(psi_x * ihi) + 1e-300;
        if (!(phi_x * lo_tail_ <= 1e-5 * magnitude) ||
            !(psi_x * hi_tail_ <= 1e-5 * magnitude))
            throw DivergentIntegral("resolvent: truncated tail not negligible");
        if (want_deriv)
            return (pr.phi_prime(x) * ilo + pr.psi_prime(x) * ihi) / B;
        return (phi_x * ilo + psi_x * ihi) / B;
    }

    std::shared_ptr<const detail::GreenKernel> kernel_;
    std::function<double(double)> pi_;
    std::vector<double> prefix_psi_, suffix_phi_;
    double lo_tail_ = 0.0, hi_tail_ = 0.0;
};

inline Resolvent resolvent(const FundamentalPair& pair, const DiffusionSpec& spec,
                           const PayoffFn& pi) {
    return Resolvent(pair, spec, pi);
}

}  // namespace bsol
