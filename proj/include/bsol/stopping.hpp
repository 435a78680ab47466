#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bsol/diffusion.hpp"
#include "bsol/errors.hpp"
#include "bsol/fundamental.hpp"
#include "bsol/payoff.hpp"
#include "bsol/ratio.hpp"
#include "bsol/resolvent.hpp"
#include "bsol/values.hpp"

namespace bsol {

enum class BasisKind { Psi, Phi, PsiPrime, NegPhiPrime };

inline const char* to_string(BasisKind b) {
    switch (b) {
        case BasisKind::Psi: return "psi";
        case BasisKind::Phi: return "phi";
        case BasisKind::PsiPrime: return "psi'";
        case BasisKind::NegPhiPrime: return "-phi'";
    }
    return "?";
}

// An optimal rule, or the record that none exists.
struct RuleDescription {
    enum class Kind { HitSet, HitPoint, TwoPoint, None, ImmediateStop };
    Kind kind = Kind::None;
    std::vector<double> targets;  // HitSet
    double a = kNaN, b = kNaN;    // HitPoint uses b; TwoPoint uses both
    std::string notes;

    static RuleDescription hit_point(double b, std::string notes = {}) {
        RuleDescription r;
        r.kind = Kind::HitPoint;
        r.b = b;
        r.notes = std::move(notes);
        return r;
    }
    static RuleDescription hit_set(std::vector<double> targets, std::string notes = {}) {
        RuleDescription r;
        r.kind = Kind::HitSet;
        r.targets = std::move(targets);
        r.notes = std::move(notes);
        return r;
    }
    static RuleDescription two_point(double a, double b, std::string notes = {}) {
        RuleDescription r;
        r.kind = Kind::TwoPoint;
        r.a = a;
        r.b = b;
        r.notes = std::move(notes);
        return r;
    }
    static RuleDescription none(std::string notes) {
        RuleDescription r;
        r.notes = std::move(notes);
        return r;
    }
    static RuleDescription immediate(std::string notes = {}) {
        RuleDescription r;
        r.kind = Kind::ImmediateStop;
        r.notes = std::move(notes);
        return r;
    }
};

// One near-boundary piece of the value function, V = coefficient * basis on
// `region`, with the rule that attains it (if any admissible rule does).
struct ValueSegment {
    bool valid = false;
    double region_lo = 0.0;
    double region_hi = 0.0;
    double coefficient = kNaN;
    BasisKind basis = BasisKind::Psi;
    bool attainable = false;
    double attainable_up_to = kNaN;    // threshold when attainability splits
    double attainable_from = kNaN;
    RuleDescription rule;
};

enum class DegenerateKind {
    Regular,
    ZStarAtLowerBoundary,
    BothAtBoundaries,
    ZStarInfinite,
    YStarZero,
    InfiniteValue,
};

inline const char* to_string(DegenerateKind k) {
    switch (k) {
        case DegenerateKind::Regular: return "regular";
        case DegenerateKind::ZStarAtLowerBoundary: return "z*-at-lower-boundary";
        case DegenerateKind::BothAtBoundaries: return "both-at-boundaries";
        case DegenerateKind::ZStarInfinite: return "z*-infinite";
        case DegenerateKind::YStarZero: return "y*-zero";
        case DegenerateKind::InfiniteValue: return "infinite-value";
    }
    return "?";
}

struct DegenerateCase {
    DegenerateKind kind = DegenerateKind::Regular;
    double A = kNaN;       // limsup g/psi at the upper boundary (z* = inf)
    double B = kNaN;       // limsup g/phi at the lower boundary (y* = 0)
    double b_star = kNaN;  // sup of finite maximizers of M
    double a_star = kNaN;  // inf of positive maximizers of N
    bool maximizer_sequence_reaches_boundary = false;
    std::string notes;
};

// A certified continuation interval with re-checkable witnesses: for each
// sampled x the recorded z satisfies hitting_value(x, z) > g(x).
struct CertifiedInterval {
    double lo = 0.0, hi = 0.0;
    std::string origin;
    std::vector<std::pair<double, double>> witnesses;  // (x, z)
};

struct SmoothFitPoint {
    double b = 0.0;
    double value_deriv = 0.0;
    double payoff_deriv_left = 0.0;
    double payoff_deriv_right = 0.0;
    double gap() const {
        return std::min(std::abs(value_deriv - payoff_deriv_left),
                        std::abs(value_deriv - payoff_deriv_right));
    }
};

struct StoppingSolution {
    MaxSet M, N;
    ExtremalPoints extremal;
    ValueSegment lower, upper;
    std::vector<CertifiedInterval> continuation;
    std::vector<MaxComponent> stopping;
    std::vector<RuleDescription> rule_family;
    DegenerateCase degenerate;
    std::vector<SmoothFitPoint> smooth_fit;
    std::vector<std::string> extensions_applied;
    bool unsupported_boundary = false;

    // V(x) on the solved regions; NaN on the band (z*, y*) the method does
    // not reach, +inf in the infinite-value case.  Includes the resolvent
    // shift when an integral extension was applied.
    std::function<double(double)> value;
    std::function<double(double)> payoff_shift;  // R_r pi, identically 0 otherwise
};

namespace detail {

// Record (x, z) pairs with ratio(z) > ratio(x): hitting z from x then beats
// stopping at x, which is the constructive content of the continuation
// certificates.  z is searched above x for psi-side certificates and below x
// for phi-side ones.
inline void add_witnesses(CertifiedInterval& ci, const RatioProblem& rp, bool hit_up) {
    const double step = 1.04;
    for (int k = 1; k <= 8; ++k) {
        const double x = ci.lo + (ci.hi - ci.lo) * double(k) / 9.0;
        if (!(x > rp.lo && x < rp.hi)) continue;
        const double rx = rp.ratio(x);
        double z = kNaN;
        if (hit_up) {
            for (double cand = x * step;; cand *= step) {
                const double c = std::min(cand, rp.hi);
                if (rp.ratio(c) > rx) { z = c; break; }
                if (c >= rp.hi) break;
            }
        } else {
            for (double cand = x / step;; cand /= step) {
                const double c = std::max(cand, rp.lo);
                if (rp.ratio(c) > rx) { z = c; break; }
                if (c <= rp.lo) break;
            }
        }
        if (std::isfinite(z)) ci.witnesses.emplace_back(x, z);
    }
}

inline bool near_window_top(const MaxSet& m) {
    if (m.components.empty()) return false;
    const double top = m.components.back().hi;
    // repeated maximizers marching into the top decade of the window
    return top >= m.window_hi * 0.5;
}

}  // namespace detail

// Classification of the boundary-degenerate configurations of (M, N).
inline DegenerateCase classify_degenerate(const MaxSet& M, const MaxSet& N) {
    DegenerateCase d;
    const double z = M.extremal_point;
    const double y = N.extremal_point;
    const bool z_inf = (z == kInf);
    const bool y_zero = (y == 0.0);

    if ((z_inf && M.sup_value == kInf) || (y_zero && N.sup_value == kInf)) {
        d.kind = DegenerateKind::InfiniteValue;
        d.notes = "the ratio supremum is infinite; V = +inf everywhere";
        return d;
    }
    if (z_inf) {
        d.kind = DegenerateKind::ZStarInfinite;
        d.A = M.sup_value;
        d.b_star = M.components.empty() ? -kInf : M.components.back().hi;
        d.maximizer_sequence_reaches_boundary = detail::near_window_top(M);
        if (M.components.empty())
            d.notes = "M = {inf}: no admissible rule attains the value anywhere";
        else if (d.maximizer_sequence_reaches_boundary)
            d.notes = "finite maximizers recur up to the window top; tau_M attains the value everywhere sampled";
        else
            d.notes = "tau_M attains the value for x <= b*; above b* the value is only a limit of threshold rules";
        return d;
    }
    if (y_zero) {
        d.kind = DegenerateKind::YStarZero;
        d.B = N.sup_value;
        d.a_star = N.components.empty() ? kInf : N.components.front().lo;
        if (N.components.empty())
            d.notes = "N = {0}: no admissible rule attains the value anywhere";
        else
            d.notes = "tau_N attains the value for x >= a*; below a* the value is only a limit";
        return d;
    }
    if (z == 0.0 && y == kInf) {
        d.kind = DegenerateKind::BothAtBoundaries;
        d.notes =
            "one of: immediate stopping everywhere (g is r-excessive); an optimal "
            "two-boundary rule; or no admissible optimal rule";
        return d;
    }
    if (z == 0.0) {
        d.kind = DegenerateKind::ZStarAtLowerBoundary;
        d.notes = "no eps-threshold rule near 0 yields the value";
        return d;
    }
    return d;
}

namespace detail {

struct StoppingInputs {
    PayoffFn g;
    DiffusionSpec spec;
    FundamentalPair pair;
    double tol = 1e-9;
};

inline StoppingSolution solve_core(const StoppingInputs& in, bool allow_partial) {
    const auto& spec = in.spec;
    const auto& pair = in.pair;

    // Boundary-kind handling: reflecting endpoints are states (and maximizer
    // candidates); absorbing endpoints behave like killing when the reward
    // there is nonpositive, and are out of this method's reach otherwise.
    bool lower_point = spec.lower_is_state_point();
    bool upper_point = spec.upper_is_state_point();
    bool unsupported = false;
    std::string unsupported_note;
    if (spec.lower_boundary == BoundaryKind::Absorbing) {
        const double g0 = in.g(spec.grid_lo());
        if (g0 <= 0.0)
            lower_point = false;  // killing behavior
        else {
            unsupported = true;
            unsupported_note = "absorbing lower boundary with positive reward";
        }
    }
    if (spec.upper_boundary == BoundaryKind::Absorbing) {
        const double gh = in.g(spec.grid_hi());
        if (gh <= 0.0)
            upper_point = false;
        else {
            unsupported = true;
            unsupported_note = "absorbing upper boundary with positive reward";
        }
    }
    if (unsupported && !allow_partial)
        throw UnsupportedBoundaryCombination(
            "stopping: " + unsupported_note +
            "; only the plateau and monotone-region results apply");

    RatioProblem rp_psi = make_ratio(RatioKind::GOverPsi, in.g, pair, spec);
    RatioProblem rp_phi = make_ratio(RatioKind::GOverPhi, in.g, pair, spec);
    rp_psi.lower_is_state_point = rp_phi.lower_is_state_point = lower_point;
    rp_psi.upper_is_state_point = rp_phi.upper_is_state_point = upper_point;

    StoppingSolution sol;
    sol.M = global_max_set(rp_psi, in.tol);
    sol.N = global_max_set(rp_phi, in.tol);
    sol.extremal = extremal_points(sol.M, sol.N);
    sol.unsupported_boundary = unsupported;
    if (unsupported) sol.extensions_applied.push_back("partial: " + unsupported_note);

    // The plateau and monotone-region lemmas hold for every boundary kind.
    plateau_check(sol.M, rp_psi);
    plateau_check(sol.N, rp_phi);
    const MonotoneRegions inc_psi = monotone_regions(rp_psi);
    const MonotoneRegions dec_phi = monotone_regions(rp_phi);
    for (const auto& r : inc_psi.regions) {
        CertifiedInterval ci{r.lo, r.hi, "g/psi strictly increasing", {}};
        add_witnesses(ci, rp_psi, true);
        sol.continuation.push_back(ci);
    }
    for (const auto& r : dec_phi.regions) {
        CertifiedInterval ci{r.lo, r.hi, "g/phi strictly decreasing", {}};
        add_witnesses(ci, rp_phi, false);
        sol.continuation.push_back(ci);
    }

    if (unsupported) {
        sol.value = [](double) { return kNaN; };
        sol.payoff_shift = [](double) { return 0.0; };
        return sol;
    }

    sol.degenerate = classify_degenerate(sol.M, sol.N);
    const double z_star = sol.extremal.z_star;
    const double y_star = sol.extremal.y_star;
    const double sup_psi = sol.M.sup_value;
    const double sup_phi = sol.N.sup_value;

    // ---- lower segment: V = sup(g/psi) psi on (0, z*] ---------------------
    if (sol.degenerate.kind == DegenerateKind::InfiniteValue) {
        sol.value = [](double) { return kInf; };
        sol.payoff_shift = [](double) { return 0.0; };
        return sol;
    }
    std::vector<double> m_targets, n_targets;
    for (const auto& c : sol.M.components) m_targets.push_back(c.representative());
    for (const auto& c : sol.N.components) n_targets.push_back(c.representative());

    if (z_star == kInf) {
        sol.lower.valid = true;
        sol.lower.region_lo = spec.state_lo;
        sol.lower.region_hi = kInf;
        sol.lower.coefficient = sol.degenerate.A;
        sol.lower.basis = BasisKind::Psi;
        sol.lower.attainable = !sol.M.components.empty();
        sol.lower.attainable_up_to = sol.degenerate.b_star;
        sol.lower.rule =
            sol.M.components.empty()
                ? RuleDescription::none("value is the limit of threshold rules z_n -> inf")
                : RuleDescription::hit_set(m_targets,
                                           "admissible for x <= b*; limit-only above");
    } else if (z_star > 0.0 && std::isfinite(z_star) && std::isfinite(sup_psi)) {
        sol.lower.valid = true;
        sol.lower.region_lo = spec.state_lo;
        sol.lower.region_hi = z_star;
        sol.lower.coefficient = sup_psi;
        sol.lower.basis = BasisKind::Psi;
        sol.lower.attainable = true;
        sol.lower.attainable_up_to = z_star;
        sol.lower.rule = RuleDescription::hit_set(m_targets, "canonical rule tau_M");
    }

    // ---- upper segment: V = sup(g/phi) phi on [y*, inf) --------------------
    if (y_star == 0.0) {
        sol.upper.valid = true;
        sol.upper.region_lo = 0.0;
        sol.upper.region_hi = spec.state_hi;
        sol.upper.coefficient = sol.degenerate.B;
        sol.upper.basis = BasisKind::Phi;
        sol.upper.attainable = !sol.N.components.empty();
        sol.upper.attainable_from = sol.degenerate.a_star;
        sol.upper.rule =
            sol.N.components.empty()
                ? RuleDescription::none("value is the limit of threshold rules y_n -> 0")
                : RuleDescription::hit_set(n_targets,
                                           "admissible for x >= a*; limit-only below");
    } else if (std::isfinite(y_star) && std::isfinite(sup_phi)) {
        sol.upper.valid = true;
        sol.upper.region_lo = y_star;
        sol.upper.region_hi = spec.state_hi;
        sol.upper.coefficient = sup_phi;
        sol.upper.basis = BasisKind::Phi;
        sol.upper.attainable = true;
        sol.upper.attainable_from = y_star;
        sol.upper.rule = RuleDescription::hit_set(n_targets, "canonical rule tau_N");
    }

    // ---- rule family (multi-rule equivalence on the lower side) -----------
    if (sol.lower.valid && !sol.M.components.empty()) {
        if (std::isfinite(z_star))
            sol.rule_family.push_back(RuleDescription::hit_point(z_star, "tau_{z*}"));
        for (const auto& c : sol.M.components)
            if (c.is_point() && c.lo != z_star)
                sol.rule_family.push_back(RuleDescription::hit_point(c.lo, "tau_b, b in M"));
        for (std::size_t i = 0; i + 1 < sol.M.components.size(); ++i)
            sol.rule_family.push_back(RuleDescription::two_point(
                sol.M.components[i].representative(),
                sol.M.components[i + 1].representative(), "tau_{a,b}, a,b in M"));
        sol.rule_family.push_back(RuleDescription::hit_set(m_targets, "tau_M"));
        for (const auto& c : sol.M.components)
            if (!c.is_point()) {
                sol.rule_family.push_back(RuleDescription::immediate(
                    "indifference plateau: stop anywhere on the component"));
                break;
            }
    }

    // ---- continuation certificates from the main theorem ------------------
    // (0, z*) \ M on the lower side; (y*, inf) \ N on the upper side.  Each
    // gap interval records the maximizer whose hitting value beats g on it.
    auto gaps_to_certificates = [&](const MaxSet& m, bool lower_side) {
        if (m.components.empty()) return;
        std::vector<std::pair<double, double>> gaps;
        const double win_lo = m.window_lo, win_hi = m.window_hi;
        // below the first component
        if (lower_side && !m.components.front().touches_window_lo &&
            m.components.front().lo > win_lo)
            gaps.emplace_back(win_lo, m.components.front().lo);
        if (!lower_side && m.extremal_point == 0.0 &&
            !m.components.front().touches_window_lo &&
            m.components.front().lo > win_lo)
            gaps.emplace_back(win_lo, m.components.front().lo);
        // between components
        for (std::size_t i = 0; i + 1 < m.components.size(); ++i)
            if (m.components[i + 1].lo > m.components[i].hi)
                gaps.emplace_back(m.components[i].hi, m.components[i + 1].lo);
        // above the last component
        const bool above_is_inside = lower_side ? (m.extremal_point == kInf) : true;
        if (above_is_inside && !m.components.back().touches_window_hi &&
            m.components.back().hi < win_hi)
            gaps.emplace_back(m.components.back().hi, win_hi);

        for (auto [lo, hi] : gaps) {
            CertifiedInterval ci{lo, hi,
                                 lower_side ? "(0, z*) \\ M" : "(y*, inf) \\ N", {}};
            add_witnesses(ci, lower_side ? rp_psi : rp_phi, lower_side);
            sol.continuation.push_back(ci);
        }
    };
    gaps_to_certificates(sol.M, true);
    gaps_to_certificates(sol.N, false);

    for (const auto& c : sol.M.components) sol.stopping.push_back(c);
    for (const auto& c : sol.N.components) sol.stopping.push_back(c);
    std::sort(sol.stopping.begin(), sol.stopping.end(),
              [](const MaxComponent& a, const MaxComponent& b) { return a.lo < b.lo; });

    // ---- smooth-fit report (computed, never enforced) ----------------------
    for (const auto& c : sol.M.components) {
        for (double b : {c.lo, c.hi}) {
            if (!std::isfinite(b) || b <= spec.grid_lo() || b >= spec.grid_hi()) continue;
            SmoothFitPoint sf;
            sf.b = b;
            sf.value_deriv = (sol.lower.valid ? sol.lower.coefficient : sup_psi) *
                             pair.psi_prime(b);
            const double h = 1e-7 * (1.0 + std::abs(b));
            const double gb = in.g(b);
            sf.payoff_deriv_left = (gb - in.g(b - h)) / h;
            sf.payoff_deriv_right = (in.g(b + h) - gb) / h;
            sol.smooth_fit.push_back(sf);
            if (c.is_point()) break;
        }
    }

    // ---- assembled value ----------------------------------------------------
    {
        const ValueSegment lo_seg = sol.lower, hi_seg = sol.upper;
        const FundamentalPair pr = pair;
        sol.value = [lo_seg, hi_seg, pr](double x) {
            if (lo_seg.valid && (x <= lo_seg.region_hi || lo_seg.region_hi == kInf))
                return lo_seg.coefficient * pr.psi(x);
            if (hi_seg.valid && (x >= hi_seg.region_lo || hi_seg.region_lo == 0.0))
                return hi_seg.coefficient * pr.phi(x);
            return kNaN;
        };
        sol.payoff_shift = [](double) { return 0.0; };
    }
    return sol;
}

}  // namespace detail

// Solve the optimal stopping problem near the boundaries: builds M and N,
// emits the value segments V = sup(g/psi) psi on (0, z*] and
// V = sup(g/phi) phi on [y*, inf), the rule families, the continuation and
// stopping certificates, and the degenerate-case classification.
inline StoppingSolution solve_stopping(const PayoffFn& g, const DiffusionSpec& spec,
                                       const FundamentalPair& pair, double tol = 1e-9) {
    return detail::solve_core({g, spec, pair, tol}, false);
}

inline StoppingSolution solve_stopping(const PayoffFn& g, const DiffusionSpec& spec,
                                       double tol = 1e-9) {
    return solve_stopping(g, spec, solve_fundamental(spec), tol);
}

// Boundary-kind aware entry that degrades gracefully: for the withheld
// combination (absorbing endpoint with positive reward) it still emits the
// plateau and monotone-region certificates, flagged unsupported.
inline StoppingSolution solve_stopping_partial(const PayoffFn& g,
                                               const DiffusionSpec& spec,
                                               double tol = 1e-9) {
    return detail::solve_core({g, spec, solve_fundamental(spec), tol}, true);
}

// Stopping with a running payoff: rewrite as the resolvent plus a stopping
// problem with transformed reward g - R_r pi, then shift the value back.
inline StoppingSolution with_integral_term(const PayoffFn& g, const PayoffFn& pi,
                                           const DiffusionSpec& spec, double tol = 1e-9) {
    const FundamentalPair pair = solve_fundamental(spec);
    const Resolvent R(pair, spec, pi);
    PayoffFn transformed;
    transformed.f = [g, R](double x) { return g(x) - R.value(x); };
    transformed.breakpoints = g.breakpoints;
    for (double bp : pi.breakpoints) transformed.breakpoints.push_back(bp);

    StoppingSolution sol = detail::solve_core({transformed, spec, pair, tol}, false);
    sol.extensions_applied.push_back("integral term");
    const auto base_value = sol.value;
    sol.value = [base_value, R](double x) {
        const double v = base_value(x);
        return std::isnan(v) ? kNaN : R.value(x) + v;
    };
    sol.payoff_shift = [R](double x) { return R.value(x); };
    return sol;
}

}  // namespace bsol
