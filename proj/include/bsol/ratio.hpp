#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bsol/diffusion.hpp"
#include "bsol/errors.hpp"
#include "bsol/fundamental.hpp"
#include "bsol/numeric.hpp"
#include "bsol/payoff.hpp"

namespace bsol {

// The four fundamental ratios.  All denominators are positive on the
// interior: psi, phi, psi', and -phi'.
enum class RatioKind { GOverPsi, GOverPhi, GOverPsiPrime, NegGOverPhiPrime };

inline const char* to_string(RatioKind k) {
    switch (k) {
        case RatioKind::GOverPsi: return "g/psi";
        case RatioKind::GOverPhi: return "g/phi";
        case RatioKind::GOverPsiPrime: return "g/psi'";
        case RatioKind::NegGOverPhiPrime: return "-g/phi'";
    }
    return "?";
}

inline bool increasing_type(RatioKind k) {
    // Ratios whose maximizer set carries a supremum-side extremal point z*.
    return k == RatioKind::GOverPsi || k == RatioKind::GOverPsiPrime;
}

// Basis of the ratio denominator for each kind.  psi' is positive increasing
// and -phi' positive decreasing whenever psi, phi are convex; their log
// derivative comes from the ODE: u''/u' = (2/sigma^2)(r u/u' - mu).
inline Basis ratio_denominator(RatioKind k, const FundamentalPair& pair) {
    switch (k) {
        case RatioKind::GOverPsi: return pair.increasing();
        case RatioKind::GOverPhi: return pair.decreasing();
        case RatioKind::GOverPsiPrime: {
            Basis b;
            b.log_value = [pair](double x) {
                return pair.log_psi(x) + std::log(pair.dlog_psi(x));
            };
            b.dlog = [pair](double x) {
                return 2.0 / pair.sigma2(x) * (pair.rate(x) / pair.dlog_psi(x) - pair.mu(x));
            };
            return b;
        }
        case RatioKind::NegGOverPhiPrime: {
            Basis b;
            b.log_value = [pair](double x) {
                return pair.log_phi(x) + std::log(-pair.dlog_phi(x));
            };
            b.dlog = [pair](double x) {
                return 2.0 / pair.sigma2(x) * (pair.rate(x) / pair.dlog_phi(x) - pair.mu(x));
            };
            return b;
        }
    }
    throw ValidationError("ratio_denominator: bad kind");
}

// Everything a maximizer scan needs, bundled: payoff view, denominator
// basis, and the scan window.
struct RatioProblem {
    RatioKind kind = RatioKind::GOverPsi;
    PayoffFn g;
    Basis denom;
    double lo = 1e-3, hi = 1e3;
    std::size_t base_points = 4096;
    bool lower_is_state_point = false;  // finite reflecting/absorbing endpoint
    bool upper_is_state_point = false;

    double ratio(double x) const { return g(x) * std::exp(-denom.log_value(x)); }
    double denom_value(double x) const { return std::exp(denom.log_value(x)); }
};

inline RatioProblem make_ratio(RatioKind kind, const PayoffFn& g,
                               const FundamentalPair& pair, const DiffusionSpec& spec) {
    RatioProblem p;
    p.kind = kind;
    p.g = g;
    p.denom = ratio_denominator(kind, pair);
    p.lo = spec.grid_lo();
    p.hi = spec.grid_hi();
    p.base_points = spec.domain.points;
    p.lower_is_state_point = spec.lower_is_state_point();
    p.upper_is_state_point = spec.upper_is_state_point();
    return p;
}

// One connected piece of a maximizer set: a point (lo == hi) or a closed
// plateau interval.
struct MaxComponent {
    double lo = 0.0;
    double hi = 0.0;
    bool touches_window_lo = false;
    bool touches_window_hi = false;
    bool is_point() const { return lo == hi; }
    double representative() const { return is_point() ? lo : 0.5 * (lo + hi); }
};

// Global maximizer set of one ratio: components, boundary membership via the
// limsup convention, the supremum, and the extremal point (z* = sup of the
// set for increasing-type ratios, y* = inf for decreasing-type).
struct MaxSet {
    RatioKind kind = RatioKind::GOverPsi;
    std::vector<MaxComponent> components;
    bool includes_lower_boundary = false;
    bool includes_upper_boundary = false;
    double sup_value = -kInf;
    double extremal_point = kNaN;
    double tolerance_used = 0.0;
    double window_lo = 0.0, window_hi = 0.0;
    double boundary_limsup_lo = -kInf;  // extrapolated limsup estimates
    double boundary_limsup_hi = -kInf;

    // Finite maximizer locations (plateau endpoints count via sup/inf).
    double sup_of_finite() const {
        return components.empty() ? -kInf : components.back().hi;
    }
    double inf_of_finite() const {
        return components.empty() ? kInf : components.front().lo;
    }
    bool empty_interior() const { return components.empty(); }
};

struct MonotoneRegion {
    double lo = 0.0, hi = 0.0;
    bool touches_window_lo = false;
    bool touches_window_hi = false;
};

// Maximal open intervals where the ratio is strictly increasing
// (increasing-type ratios) or strictly decreasing (decreasing-type).
struct MonotoneRegions {
    RatioKind kind = RatioKind::GOverPsi;
    bool increasing = true;
    std::vector<MonotoneRegion> regions;
};

namespace detail {

struct ScanGrid {
    std::vector<double> x;
    std::vector<double> r;
};

inline ScanGrid build_scan(const RatioProblem& p) {
    ScanGrid s;
    s.x = log_grid(p.lo, p.hi, std::max<std::size_t>(p.base_points, 64));
    merge_into_grid(s.x, p.g.breakpoints);
    s.r.resize(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) s.r[i] = p.ratio(s.x[i]);
    return s;
}

// Locate a jump discontinuity of the ratio inside (a, b) and return the
// abscissa on the high side.  Used for upper-semicontinuous payoffs whose
// jumps are not declared breakpoints (floor-type rewards).
inline double refine_jump(const RatioProblem& p, double a, double b) {
    const double ra = p.ratio(a), rb = p.ratio(b);
    const bool high_right = rb > ra;
    const double mid_level = 0.5 * (ra + rb);
    double lo = a, hi = b;
    for (int it = 0; it < 120 && (hi - lo) > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        const double m = 0.5 * (lo + hi);
        const bool high = p.ratio(m) > mid_level;
        if (high == high_right)
            hi = m;
        else
            lo = m;
    }
    // the maximizing side of the jump
    return p.ratio(hi) >= p.ratio(lo) ? hi : lo;
}

// Refine one bracketed local maximum.  Smooth maxima go to golden section;
// brackets that straddle a jump get the jump located instead.
inline double refine_local_max(const RatioProblem& p, double xa, double xb) {
    double peak = golden_max([&](double x) { return p.ratio(x); }, xa, xb,
                             1e-11 * (1.0 + std::abs(xb)));
    const double h = 1e-7 * (1.0 + std::abs(peak));
    const double rp = p.ratio(peak);
    const double rl = p.ratio(std::max(xa, peak - h));
    const double rr = p.ratio(std::min(xb, peak + h));
    const double jump_scale = 1e-3 * (1.0 + std::abs(rp));
    if (rp - rl > jump_scale || rp - rr > jump_scale) {
        // one-sided cliff: golden landed next to a discontinuity
        const double side_lo = (rp - rl > jump_scale) ? std::max(xa, peak - 8.0 * h) : peak;
        const double side_hi = (rp - rr > jump_scale) ? std::min(xb, peak + 8.0 * h) : peak;
        if (side_lo < side_hi) {
            const double j = refine_jump(p, side_lo, side_hi);
            if (p.ratio(j) >= rp) return j;
        }
    }
    return peak;
}

// Extrapolated boundary limsup along factor-2 geometric blocks, using both
// raw grid values and already-refined candidate maxima.  `toward_lower`
// selects which window end is approached.
struct BoundaryEstimate {
    double limsup = -kInf;
    bool unbounded = false;
};

inline BoundaryEstimate boundary_limsup(const ScanGrid& s,
                                        std::span<const double> refined_x,
                                        std::span<const double> refined_r,
                                        bool toward_lower) {
    const double lo = s.x.front(), hi = s.x.back();
    const int max_blocks = std::max(3, int(std::log2(hi / lo)) - 2);
    const int nb = std::min(10, max_blocks);
    // block k spans a factor of 2, k = 0 nearest the boundary
    std::vector<double> tmax(std::size_t(nb), -kInf);
    auto block_of = [&](double x) -> int {
        const double d = toward_lower ? x / lo : hi / x;
        if (!(d >= 1.0)) return 0;
        const int k = int(std::log2(d));
        return k;
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        const int k = block_of(s.x[i]);
        if (k >= 0 && k < nb) tmax[std::size_t(k)] = std::max(tmax[std::size_t(k)], s.r[i]);
    }
    for (std::size_t i = 0; i < refined_x.size(); ++i) {
        const int k = block_of(refined_x[i]);
        if (k >= 0 && k < nb) tmax[std::size_t(k)] = std::max(tmax[std::size_t(k)], refined_r[i]);
    }
    // approach sequence: from the interior toward the boundary
    std::vector<double> seq;
    for (int k = nb; k-- > 0;)
        if (std::isfinite(tmax[std::size_t(k)]) || tmax[std::size_t(k)] == -kInf)
            seq.push_back(tmax[std::size_t(k)]);
    while (!seq.empty() && seq.back() == -kInf) seq.pop_back();
    BoundaryEstimate out;
    if (seq.size() < 2) {
        out.limsup = seq.empty() ? -kInf : seq.back();
        return out;
    }
    const double last = seq[seq.size() - 1], prev = seq[seq.size() - 2];
    if (last > 1e12 && last > prev) {
        out.unbounded = true;
        out.limsup = kInf;
        return out;
    }
    if (seq.size() >= 3) {
        const double a = seq[seq.size() - 3];
        if (nearly_equal(a, last, 1e-11) && nearly_equal(prev, last, 1e-11)) {
            out.limsup = last;
            return out;
        }
        out.limsup = aitken_limit(seq);
        // never extrapolate below an observed running maximum at the boundary
        if (last > prev && out.limsup < last) out.limsup = last;
        return out;
    }
    out.limsup = last;
    return out;
}

}  // namespace detail

// Grid scan + golden-section refinement + boundary extrapolation, producing
// the global maximizer set of the ratio.  Points within tol*(1+|sup|) of the
// supremum are merged; near-constant stretches become Interval components;
// a boundary whose extrapolated limsup attains the supremum sets the
// corresponding flag.  An unbounded ratio that is still rising toward a
// boundary is reported as sup_value = +inf with that boundary flagged.
inline MaxSet global_max_set(const RatioProblem& p, double tol = 1e-9) {
    if (!(tol > 0.0)) throw ValidationError("global_max_set: tol must be positive");
    const detail::ScanGrid s = detail::build_scan(p);
    const std::size_t n = s.x.size();

    // refined candidates: interior local maxima and every payoff breakpoint
    std::vector<double> cand_x, cand_r;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (s.r[i] >= s.r[i - 1] && s.r[i] >= s.r[i + 1] && std::isfinite(s.r[i])) {
            const double px = detail::refine_local_max(p, s.x[i - 1], s.x[i + 1]);
            cand_x.push_back(px);
            cand_r.push_back(p.ratio(px));
        }
    }
    for (double bp : p.g.breakpoints) {
        if (bp > p.lo && bp < p.hi) {
            cand_x.push_back(bp);
            cand_r.push_back(p.ratio(bp));
        }
    }
    if (p.lower_is_state_point) { cand_x.push_back(p.lo); cand_r.push_back(p.ratio(p.lo)); }
    if (p.upper_is_state_point) { cand_x.push_back(p.hi); cand_r.push_back(p.ratio(p.hi)); }

    double sup = -kInf;
    for (double v : s.r) sup = std::max(sup, v);
    for (double v : cand_r) sup = std::max(sup, v);

    // boundary limsups (only at unattainable window ends)
    detail::BoundaryEstimate est_lo, est_hi;
    if (!p.lower_is_state_point)
        est_lo = detail::boundary_limsup(s, cand_x, cand_r, true);
    else
        est_lo.limsup = -kInf;
    if (!p.upper_is_state_point)
        est_hi = detail::boundary_limsup(s, cand_x, cand_r, false);
    else
        est_hi.limsup = -kInf;

    MaxSet m;
    m.kind = p.kind;
    m.tolerance_used = tol;
    m.window_lo = p.lo;
    m.window_hi = p.hi;
    m.boundary_limsup_lo = est_lo.limsup;
    m.boundary_limsup_hi = est_hi.limsup;

    if (est_lo.unbounded || est_hi.unbounded) {
        m.sup_value = kInf;
        m.includes_lower_boundary = est_lo.unbounded;
        m.includes_upper_boundary = est_hi.unbounded;
        m.extremal_point = increasing_type(p.kind)
                               ? (m.includes_upper_boundary ? kInf : 0.0)
                               : (m.includes_lower_boundary ? 0.0 : kInf);
        return m;
    }

    sup = std::max({sup, est_lo.limsup, est_hi.limsup});
    m.sup_value = sup;
    const double band = std::max(tol, 1e-9) * (1.0 + std::abs(sup));
    m.includes_lower_boundary =
        !p.lower_is_state_point && est_lo.limsup >= sup - band;
    m.includes_upper_boundary =
        !p.upper_is_state_point && est_hi.limsup >= sup - band;

    auto at_sup = [&](double x) { return p.ratio(x) >= sup - band; };

    // atoms: grid runs at the supremum plus refined candidate points
    struct Atom { double lo, hi; };
    std::vector<Atom> atoms;
    {
        std::size_t i = 0;
        while (i < n) {
            if (s.r[i] >= sup - band) {
                std::size_t j = i;
                while (j + 1 < n && s.r[j + 1] >= sup - band) ++j;
                atoms.push_back({s.x[i], s.x[j]});
                i = j + 1;
            } else {
                ++i;
            }
        }
        for (std::size_t k = 0; k < cand_x.size(); ++k)
            if (cand_r[k] >= sup - band) atoms.push_back({cand_x[k], cand_x[k]});
    }
    if (atoms.empty() && !m.includes_lower_boundary && !m.includes_upper_boundary) {
        // should not happen: the supremum was observed somewhere
        throw NumericError("global_max_set: supremum location lost");
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.lo < b.lo; });

    // merge overlapping atoms and atoms whose gap stays at the supremum
    const double plateau_band = 1e-9 * (1.0 + std::abs(sup));
    auto gap_at_sup = [&](double a, double b) {
        if (b - a <= 1e-12 * (1.0 + std::abs(a))) return true;
        for (int k = 0; k <= 32; ++k) {
            const double x = a + (b - a) * double(k) / 32.0;
            if (p.ratio(x) < sup - plateau_band) return false;
        }
        return true;
    };
    std::vector<Atom> merged;
    for (const Atom& a : atoms) {
        if (!merged.empty() &&
            (a.lo <= merged.back().hi + 1e-12 * (1.0 + std::abs(a.lo)) ||
             gap_at_sup(merged.back().hi, a.lo))) {
            merged.back().hi = std::max(merged.back().hi, a.hi);
        } else {
            merged.push_back(a);
        }
    }

    // edge refinement: bisection on the plateau identity g = sup * denom,
    // then a snap to a payoff breakpoint when one explains the edge exactly
    const double id_band = 1e-11;
    auto on_plateau = [&](double x) {
        const double gx = p.g(x);
        return std::abs(gx - sup * p.denom_value(x)) <= id_band * (1.0 + std::abs(gx));
    };
    auto snap_to_breakpoint = [&](double edge, bool left_edge) -> double {
        for (double bp : p.g.breakpoints) {
            if (std::abs(bp - edge) > 1e-2 * (1.0 + std::abs(edge))) continue;
            const double probe = std::max(1e-4 * (1.0 + std::abs(bp)), 1e-9);
            const bool inside_ok = on_plateau(left_edge ? bp + probe : bp - probe) ||
                                   at_sup(left_edge ? bp + probe : bp - probe);
            const bool outside_off = !on_plateau(left_edge ? bp - probe : bp + probe);
            if (inside_ok && outside_off && at_sup(bp)) return bp;
        }
        return edge;
    };

    for (const Atom& a : merged) {
        MaxComponent c;
        double lo_edge = a.lo, hi_edge = a.hi;
        if (a.hi - a.lo > 1e-12 * (1.0 + std::abs(a.lo))) {
            // interval-like: push the edges out to the true plateau border
            const double mid = 0.5 * (a.lo + a.hi);
            if (on_plateau(mid)) {
                if (lo_edge <= s.x.front() * (1.0 + 1e-12) || on_plateau(s.x.front())) {
                    if (on_plateau(s.x.front())) {
                        lo_edge = s.x.front();
                        c.touches_window_lo = true;
                    }
                }
                if (!c.touches_window_lo) {
                    // find an outside abscissa below
                    double out = std::max(p.lo, lo_edge - 0.25 * (1.0 + std::abs(lo_edge)));
                    if (on_plateau(out)) { lo_edge = out; c.touches_window_lo = out <= p.lo * (1 + 1e-12); }
                    else lo_edge = bisect_predicate(on_plateau, mid, out,
                                                    1e-12 * (1.0 + std::abs(mid)));
                    lo_edge = snap_to_breakpoint(lo_edge, true);
                }
                if (hi_edge >= s.x.back() * (1.0 - 1e-12) || on_plateau(s.x.back())) {
                    if (on_plateau(s.x.back())) {
                        hi_edge = s.x.back();
                        c.touches_window_hi = true;
                    }
                }
                if (!c.touches_window_hi) {
                    double out = std::min(p.hi, hi_edge + 0.25 * (1.0 + std::abs(hi_edge)));
                    if (on_plateau(out)) { hi_edge = out; c.touches_window_hi = out >= p.hi * (1 - 1e-12); }
                    else hi_edge = bisect_predicate(on_plateau, mid, out,
                                                    1e-12 * (1.0 + std::abs(mid)));
                    hi_edge = snap_to_breakpoint(hi_edge, false);
                }
            }
        }
        const bool pointlike = (hi_edge - lo_edge) <= 1e-7 * (1.0 + std::abs(lo_edge));
        if (pointlike) {
            const double x = 0.5 * (lo_edge + hi_edge);
            c.lo = c.hi = x;
        } else {
            c.lo = lo_edge;
            c.hi = hi_edge;
        }
        m.components.push_back(c);
    }

    // components produced from overlapping sources can still collide; keep
    // them sorted and disjoint
    std::sort(m.components.begin(), m.components.end(),
              [](const MaxComponent& a, const MaxComponent& b) { return a.lo < b.lo; });
    std::vector<MaxComponent> dedup;
    for (const auto& c : m.components) {
        if (!dedup.empty() && c.lo <= dedup.back().hi + 1e-9 * (1.0 + std::abs(c.lo))) {
            dedup.back().hi = std::max(dedup.back().hi, c.hi);
            dedup.back().touches_window_hi |= c.touches_window_hi;
        } else {
            dedup.push_back(c);
        }
    }
    m.components = std::move(dedup);

    // state-point boundaries are literal members when they attain the sup
    if (p.lower_is_state_point && at_sup(p.lo)) m.includes_lower_boundary = true;
    if (p.upper_is_state_point && at_sup(p.hi)) m.includes_upper_boundary = true;

    // extremal point: z* = sup of the set for increasing-type ratios,
    // y* = inf for decreasing-type; unattainable boundaries count as 0 / inf
    if (increasing_type(p.kind)) {
        if (m.includes_upper_boundary && !p.upper_is_state_point)
            m.extremal_point = kInf;
        else if (!m.components.empty())
            m.extremal_point = m.components.back().hi;
        else if (m.includes_lower_boundary)
            m.extremal_point = p.lower_is_state_point ? p.lo : 0.0;
    } else {
        if (m.includes_lower_boundary && !p.lower_is_state_point)
            m.extremal_point = 0.0;
        else if (!m.components.empty())
            m.extremal_point = m.components.front().lo;
        else if (m.includes_upper_boundary)
            m.extremal_point = p.upper_is_state_point ? p.hi : kInf;
    }
    return m;
}

// Ordering of the extremal points of M (g/psi) and N (g/phi): z* <= y*.
// A false flag is a diagnostic for tolerance review, never silently fixed.
struct ExtremalPoints {
    double z_star = kNaN;
    double y_star = kNaN;
    bool ordering_ok = true;
};

inline ExtremalPoints extremal_points(const MaxSet& M, const MaxSet& N) {
    ExtremalPoints e;
    e.z_star = M.extremal_point;
    e.y_star = N.extremal_point;
    if (std::isfinite(e.z_star) && std::isfinite(e.y_star))
        e.ordering_ok = e.z_star <= e.y_star + 1e-9 * (1.0 + std::abs(e.z_star));
    else
        e.ordering_ok = !(e.z_star == kInf && e.y_star < kInf) &&
                        !(std::isfinite(e.z_star) && e.y_star == -kInf);
    return e;
}

// On every Interval component the reward must coincide with a multiple of
// the denominator basis; returns (component, K) pairs, K = sup of the ratio.
struct PlateauFact {
    MaxComponent component;
    double K = 0.0;
};

inline std::vector<PlateauFact> plateau_check(const MaxSet& m, const RatioProblem& p) {
    std::vector<PlateauFact> out;
    for (const auto& c : m.components) {
        if (c.is_point()) continue;
        const double K = m.sup_value;
        for (int k = 0; k <= 100; ++k) {
            const double x = c.lo + (c.hi - c.lo) * double(k) / 100.0;
            const double gx = p.g(x);
            if (!nearly_equal(gx, K * p.denom_value(x), 1e-8))
                throw PlateauViolation("plateau_check: g != K * basis at x = " +
                                       std::to_string(x));
        }
        out.push_back({c, K});
    }
    return out;
}

// Maximal intervals of strict monotonicity (increasing for psi-type ratios,
// decreasing for phi-type), endpoints refined by bisection on a local slope
// predicate.
inline MonotoneRegions monotone_regions(const RatioProblem& p) {
    const detail::ScanGrid s = detail::build_scan(p);
    const std::size_t n = s.x.size();
    MonotoneRegions out;
    out.kind = p.kind;
    out.increasing = increasing_type(p.kind);
    const double dir = out.increasing ? 1.0 : -1.0;

    auto slope_ok = [&](double x) {
        const double h = 1e-6 * (1.0 + std::abs(x));
        const double a = std::max(p.lo, x - h), b = std::min(p.hi, x + h);
        return dir * (p.ratio(b) - p.ratio(a)) > 1e-12 * (1.0 + std::abs(p.ratio(x)));
    };

    std::vector<int> sign(n - 1, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = s.r[i + 1] - s.r[i];
        const double eps = 1e-12 * (1.0 + std::abs(s.r[i]));
        sign[i] = d > eps ? 1 : (d < -eps ? -1 : 0);
    }
    const int want = out.increasing ? 1 : -1;
    std::size_t i = 0;
    while (i + 1 < n) {
        if (sign[i] == want) {
            std::size_t j = i;
            while (j + 1 < n - 1 && sign[j + 1] == want) ++j;
            if (j > i) {  // at least two consecutive strict cells
                MonotoneRegion reg;
                // refine the left endpoint into the preceding cell
                if (i == 0) {
                    reg.lo = s.x.front();
                    reg.touches_window_lo = true;
                } else {
                    reg.lo = bisect_predicate([&](double x) { return !slope_ok(x); },
                                              s.x[i - 1], s.x[i + 1],
                                              1e-7 * (1.0 + std::abs(s.x[i])));
                }
                if (j + 2 >= n) {
                    reg.hi = s.x.back();
                    reg.touches_window_hi = true;
                } else {
                    reg.hi = bisect_predicate(slope_ok, s.x[j], s.x[j + 2],
                                              1e-7 * (1.0 + std::abs(s.x[j + 1])));
                }
                if (reg.hi > reg.lo) out.regions.push_back(reg);
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace bsol
