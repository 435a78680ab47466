#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bsol/diffusion.hpp"
#include "bsol/errors.hpp"
#include "bsol/fundamental.hpp"
#include "bsol/payoff.hpp"
#include "bsol/ratio.hpp"
#include "bsol/resolvent.hpp"
#include "bsol/stopping.hpp"

namespace bsol {

struct ControlDescription {
    enum class Kind { ReflectAt, WaitThenReflect, Impulse, None };
    Kind kind = Kind::None;
    double threshold = kNaN;  // reflecting threshold / impulse trigger
    double jump = kNaN;       // impulse jump size
    std::vector<double> targets;
    std::string notes;

    static ControlDescription reflect(double b, std::string notes = {}) {
        ControlDescription c;
        c.kind = Kind::ReflectAt;
        c.threshold = b;
        c.notes = std::move(notes);
        return c;
    }
    static ControlDescription wait_then_reflect(std::vector<double> targets,
                                                std::string notes = {}) {
        ControlDescription c;
        c.kind = Kind::WaitThenReflect;
        c.targets = std::move(targets);
        c.notes = std::move(notes);
        return c;
    }
    static ControlDescription impulse(double trigger, double jump, std::string notes = {}) {
        ControlDescription c;
        c.kind = Kind::Impulse;
        c.threshold = trigger;
        c.jump = jump;
        c.notes = std::move(notes);
        return c;
    }
    static ControlDescription none(std::string notes) {
        ControlDescription c;
        c.notes = std::move(notes);
        return c;
    }
};

struct AssumptionCheck {
    bool ok = false;
    double epsilon_used = 0.0;
    double growth_ratio = 0.0;  // max over the boundary decade / adjacent median
    std::string notes;
};

struct ControlSolution {
    bool downward = true;
    MaxSet action_set;  // M' (downward) or N' (upward)
    ValueSegment segment;
    std::vector<ControlDescription> control_family;
    AssumptionCheck assumption;
    DegenerateCase degenerate;
    std::vector<CertifiedInterval> inaction;  // (0, z'*) \ M' only
    MonotoneRegions monotone;                 // C_{psi'}: reported, NOT certified inactive
    std::vector<std::string> notes;
    std::vector<std::string> extensions_applied;
    double sup_ratio = kNaN;
    double extremal = kNaN;  // z'* or y'*

    std::function<double(double)> value;         // W on the solved region, NaN beyond
    std::function<double(double)> payoff_shift;  // R_r pi for the running-payoff case
};

// sigma(x) u'(x) must stay bounded toward the relevant boundary for the
// verification lemma to apply.  Sampled test: the decade nearest the
// boundary may not exceed 10x the median of the adjacent decade.
inline AssumptionCheck check_assumption(const DiffusionSpec& spec,
                                        const FundamentalPair& pair,
                                        bool upper_boundary = false) {
    AssumptionCheck a;
    const double lo = spec.grid_lo(), hi = spec.grid_hi();
    auto su = [&](double x) {
        return upper_boundary ? std::abs(spec.volatility(x) * pair.phi_prime(x))
                              : spec.volatility(x) * pair.psi_prime(x);
    };
    const int n = 64;
    auto decade_samples = [&](double from, double to) {
        std::vector<double> v;
        for (int i = 0; i < n; ++i)
            v.push_back(su(from * std::pow(to / from, (i + 0.5) / n)));
        std::sort(v.begin(), v.end());
        return v;
    };
    const double edge0 = upper_boundary ? hi / 10.0 : lo * 10.0;
    const double edge1 = upper_boundary ? hi / 100.0 : lo * 100.0;
    auto near_b = upper_boundary ? decade_samples(edge0, hi) : decade_samples(lo, edge0);
    auto adj = upper_boundary ? decade_samples(edge1, edge0) : decade_samples(edge0, edge1);
    const double mx = near_b.back();
    const double med = adj[adj.size() / 2];
    a.growth_ratio = mx / std::max(med, 1e-300);
    a.ok = a.growth_ratio <= 10.0;
    a.epsilon_used = upper_boundary ? edge1 : edge1;
    a.notes = a.ok ? "sigma * basis-derivative bounded toward the boundary"
                   : "sigma * basis-derivative grows toward the boundary";
    return a;
}

namespace detail {

inline DegenerateCase classify_control(const MaxSet& m, bool downward) {
    // mirror of the stopping classification for a one-sided problem
    DegenerateCase d;
    const double e = m.extremal_point;
    if (downward) {
        if (e == kInf && m.sup_value == kInf) {
            d.kind = DegenerateKind::InfiniteValue;
            d.notes = "sup g/psi' is infinite; W = +inf";
            return d;
        }
        if (e == kInf) {
            d.kind = DegenerateKind::ZStarInfinite;
            d.A = m.sup_value;
            d.b_star = m.components.empty() ? -kInf : m.components.back().hi;
            d.maximizer_sequence_reaches_boundary = near_window_top(m);
            d.notes = m.components.empty()
                          ? "M' = {inf}: no admissible optimal control"
                          : "admissible optimal control up to b'*; none above";
            return d;
        }
        if (e == 0.0) {
            d.kind = DegenerateKind::ZStarAtLowerBoundary;
            d.notes =
                "0 in M': Z^0 can never be used; either instantaneous drive to 0, an "
                "action interval (0, eps], or no admissible reflecting control";
            return d;
        }
    } else {
        if (e == 0.0 && m.sup_value == kInf) {
            d.kind = DegenerateKind::InfiniteValue;
            d.notes = "sup -g/phi' is infinite; W = +inf";
            return d;
        }
        if (e == 0.0) {
            d.kind = DegenerateKind::YStarZero;
            d.B = m.sup_value;
            d.a_star = m.components.empty() ? kInf : m.components.front().lo;
            d.notes = m.components.empty()
                          ? "N' = {0}: no admissible optimal control"
                          : "admissible optimal control from a'* upward; none below";
            return d;
        }
        if (e == kInf) {
            d.kind = DegenerateKind::ZStarAtLowerBoundary;  // mirrored threshold failure
            d.notes = "inf in N': no H-threshold upward reflection is optimal near inf";
            return d;
        }
    }
    return d;
}

}  // namespace detail

// One-sided singular control, pushing the process downward.  The action set
// is M' (global maximizers of g/psi'); for x <= z'* the value is
// W_Z(x) = sup(g/psi') psi(x), attained by reflecting at any member of M'.
inline ControlSolution solve_downward(const PayoffFn& g, const DiffusionSpec& spec,
                                      const FundamentalPair& pair, double tol = 1e-9,
                                      bool override_assumption = false) {
    ControlSolution sol;
    sol.downward = true;
    sol.assumption = check_assumption(spec, pair, false);
    if (!sol.assumption.ok && !override_assumption)
        throw AssumptionViolated(
            "solve_downward: sigma * psi' unbounded near the lower boundary; pass "
            "override to proceed anyway");

    RatioProblem rp = make_ratio(RatioKind::GOverPsiPrime, g, pair, spec);
    sol.action_set = global_max_set(rp, tol);
    sol.sup_ratio = sol.action_set.sup_value;
    sol.extremal = sol.action_set.extremal_point;
    sol.degenerate = detail::classify_control(sol.action_set, true);
    plateau_check(sol.action_set, rp);
    sol.monotone = monotone_regions(rp);
    sol.notes.push_back(
        "monotone regions of g/psi' are reported only; they are not inaction "
        "certificates");

    const double zp = sol.extremal;
    std::vector<double> targets;
    for (const auto& c : sol.action_set.components) targets.push_back(c.representative());

    if (sol.degenerate.kind == DegenerateKind::InfiniteValue) {
        sol.value = [](double) { return kInf; };
        sol.payoff_shift = [](double) { return 0.0; };
        return sol;
    }

    if (zp == kInf) {
        sol.segment.valid = true;
        sol.segment.region_lo = spec.state_lo;
        sol.segment.region_hi = kInf;
        sol.segment.coefficient = sol.degenerate.A;
        sol.segment.basis = BasisKind::Psi;
        sol.segment.attainable = !sol.action_set.components.empty();
        sol.segment.attainable_up_to = sol.degenerate.b_star;
    } else if (zp > 0.0 && std::isfinite(zp) && std::isfinite(sol.sup_ratio)) {
        sol.segment.valid = true;
        sol.segment.region_lo = spec.state_lo;
        sol.segment.region_hi = zp;
        sol.segment.coefficient = sol.sup_ratio;
        sol.segment.basis = BasisKind::Psi;
        sol.segment.attainable = true;
        sol.segment.attainable_up_to = zp;
    }

    if (sol.segment.valid && !sol.action_set.components.empty()) {
        if (std::isfinite(zp))
            sol.control_family.push_back(
                ControlDescription::reflect(zp, "canonical rule Z^{z'*}"));
        for (const auto& c : sol.action_set.components) {
            if (c.is_point() && c.lo != zp)
                sol.control_family.push_back(ControlDescription::reflect(c.lo, "b in M'"));
            if (!c.is_point())
                sol.control_family.push_back(ControlDescription::impulse(
                    c.hi, c.hi - c.lo,
                    "plateau: reflecting at the top equals the impulse to the bottom"));
        }
        sol.control_family.push_back(ControlDescription::wait_then_reflect(
            targets, "wait for M', then reflect at the threshold hit first"));
    } else if (!sol.segment.valid || sol.action_set.components.empty()) {
        sol.control_family.push_back(
            ControlDescription::none("no admissible optimal control in this regime"));
    }

    // inaction certificates (0, z'*) \ M'
    if (!sol.action_set.components.empty() && zp > 0.0) {
        const auto& comps = sol.action_set.components;
        std::vector<std::pair<double, double>> gaps;
        if (!comps.front().touches_window_lo && comps.front().lo > sol.action_set.window_lo)
            gaps.emplace_back(sol.action_set.window_lo, comps.front().lo);
        for (std::size_t i = 0; i + 1 < comps.size(); ++i)
            if (comps[i + 1].lo > comps[i].hi)
                gaps.emplace_back(comps[i].hi, comps[i + 1].lo);
        if (zp == kInf && !comps.back().touches_window_hi)
            gaps.emplace_back(comps.back().hi, sol.action_set.window_hi);
        for (auto [lo, hi] : gaps) {
            CertifiedInterval ci{lo, hi, "(0, z'*) \\ M'", {}};
            detail::add_witnesses(ci, rp, true);
            sol.inaction.push_back(ci);
        }
    }

    const ValueSegment seg = sol.segment;
    const FundamentalPair pr = pair;
    sol.value = [seg, pr](double x) {
        if (seg.valid && (x <= seg.region_hi || seg.region_hi == kInf))
            return seg.coefficient * pr.psi(x);
        return kNaN;
    };
    sol.payoff_shift = [](double) { return 0.0; };
    return sol;
}

inline ControlSolution solve_downward(const PayoffFn& g, const DiffusionSpec& spec,
                                      double tol = 1e-9, bool override_assumption = false) {
    return solve_downward(g, spec, solve_fundamental(spec), tol, override_assumption);
}

// Upward control: the action set is N' (maximizers of -g/phi'), and for
// x >= y'* the value is W_Y(x) = sup(-g/phi') phi(x).
inline ControlSolution solve_upward(const PayoffFn& g, const DiffusionSpec& spec,
                                    const FundamentalPair& pair, double tol = 1e-9,
                                    bool override_assumption = false) {
    ControlSolution sol;
    sol.downward = false;
    sol.assumption = check_assumption(spec, pair, true);
    if (!sol.assumption.ok && !override_assumption)
        throw AssumptionViolated(
            "solve_upward: sigma * phi' unbounded near the upper boundary; pass "
            "override to proceed anyway");

    RatioProblem rp = make_ratio(RatioKind::NegGOverPhiPrime, g, pair, spec);
    sol.action_set = global_max_set(rp, tol);
    sol.sup_ratio = sol.action_set.sup_value;
    sol.extremal = sol.action_set.extremal_point;
    sol.degenerate = detail::classify_control(sol.action_set, false);
    plateau_check(sol.action_set, rp);
    sol.monotone = monotone_regions(rp);
    sol.notes.push_back(
        "monotone regions of -g/phi' are reported only; they are not inaction "
        "certificates");

    const double yp = sol.extremal;
    std::vector<double> targets;
    for (const auto& c : sol.action_set.components) targets.push_back(c.representative());

    if (sol.degenerate.kind == DegenerateKind::InfiniteValue) {
        sol.value = [](double) { return kInf; };
        sol.payoff_shift = [](double) { return 0.0; };
        return sol;
    }

    if (yp == 0.0) {
        sol.segment.valid = true;
        sol.segment.region_lo = 0.0;
        sol.segment.region_hi = spec.state_hi;
        sol.segment.coefficient = sol.degenerate.B;
        sol.segment.basis = BasisKind::Phi;
        sol.segment.attainable = !sol.action_set.components.empty();
        sol.segment.attainable_from = sol.degenerate.a_star;
    } else if (std::isfinite(yp) && std::isfinite(sol.sup_ratio)) {
        sol.segment.valid = true;
        sol.segment.region_lo = yp;
        sol.segment.region_hi = spec.state_hi;
        sol.segment.coefficient = sol.sup_ratio;
        sol.segment.basis = BasisKind::Phi;
        sol.segment.attainable = true;
        sol.segment.attainable_from = yp;
    }

    if (sol.segment.valid && !sol.action_set.components.empty()) {
        if (std::isfinite(yp))
            sol.control_family.push_back(
                ControlDescription::reflect(yp, "canonical rule Y^{y'*}"));
        for (const auto& c : sol.action_set.components)
            if (c.is_point() && c.lo != yp)
                sol.control_family.push_back(ControlDescription::reflect(c.lo, "a in N'"));
        sol.control_family.push_back(ControlDescription::wait_then_reflect(
            targets, "wait for N', then reflect upward at the threshold hit first"));
    } else {
        sol.control_family.push_back(
            ControlDescription::none("no admissible optimal control in this regime"));
    }

    // inaction certificates (y'*, inf) \ N'
    if (!sol.action_set.components.empty() && std::isfinite(yp)) {
        const auto& comps = sol.action_set.components;
        std::vector<std::pair<double, double>> gaps;
        for (std::size_t i = 0; i + 1 < comps.size(); ++i)
            if (comps[i + 1].lo > comps[i].hi)
                gaps.emplace_back(comps[i].hi, comps[i + 1].lo);
        if (!comps.back().touches_window_hi && comps.back().hi < sol.action_set.window_hi)
            gaps.emplace_back(comps.back().hi, sol.action_set.window_hi);
        for (auto [lo, hi] : gaps) {
            CertifiedInterval ci{lo, hi, "(y'*, inf) \\ N'", {}};
            detail::add_witnesses(ci, rp, false);
            sol.inaction.push_back(ci);
        }
    }

    const ValueSegment seg = sol.segment;
    const FundamentalPair pr = pair;
    sol.value = [seg, pr](double x) {
        if (seg.valid && (x >= seg.region_lo || seg.region_lo == 0.0))
            return seg.coefficient * pr.phi(x);
        return kNaN;
    };
    sol.payoff_shift = [](double) { return 0.0; };
    return sol;
}

inline ControlSolution solve_upward(const PayoffFn& g, const DiffusionSpec& spec,
                                    double tol = 1e-9, bool override_assumption = false) {
    return solve_upward(g, spec, solve_fundamental(spec), tol, override_assumption);
}

// Downward control with a running payoff: rewrite with transformed reward
// g - (R_r pi)' and add the resolvent back to the reported value.
inline ControlSolution with_running_payoff(const PayoffFn& g, const PayoffFn& pi,
                                           const DiffusionSpec& spec, double tol = 1e-9,
                                           bool override_assumption = false) {
    const FundamentalPair pair = solve_fundamental(spec);
    const Resolvent R(pair, spec, pi);
    PayoffFn transformed;
    transformed.f = [g, R](double x) { return g(x) - R.deriv(x); };
    transformed.breakpoints = g.breakpoints;
    for (double bp : pi.breakpoints) transformed.breakpoints.push_back(bp);

    ControlSolution sol = solve_downward(transformed, spec, pair, tol, override_assumption);
    sol.extensions_applied.push_back("running payoff");
    const auto base_value = sol.value;
    sol.value = [base_value, R](double x) {
        const double w = base_value(x);
        return std::isnan(w) ? kNaN : R.value(x) + w;
    };
    sol.payoff_shift = [R](double x) { return R.value(x); };
    return sol;
}

}  // namespace bsol
