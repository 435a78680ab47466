#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "bsol/errors.hpp"

namespace bsol {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// n points, logarithmically spaced on [lo, hi], endpoints included.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2)
        throw ValidationError("log_grid: need 0 < lo < hi and n >= 2");
    std::vector<double> g(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::exp(llo + (lhi - llo) * double(i) / double(n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

// Insert extra abscissae (payoff breakpoints and the like) into a sorted
// grid, dropping values outside [grid.front(), grid.back()].
inline void merge_into_grid(std::vector<double>& grid, std::span<const double> extra) {
    for (double v : extra)
        if (v >= grid.front() && v <= grid.back()) grid.push_back(v);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(),
                           [](double a, double b) { return a == b; }),
               grid.end());
}

// Deterministic pairwise summation; order of the input fixes the result
// bit-for-bit regardless of how the values were produced.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

// Golden-section search for a maximum of f on [a, b].  Assumes the bracket
// contains a single interior maximum; returns the abscissa.
template <class F>
double golden_max(F&& f, double a, double b, double xtol) {
    static const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && (b - a) > xtol; ++it) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Bisection on a boolean predicate: pred(lo) == inside, pred(hi) == !inside.
// Returns the transition abscissa to within xtol.
template <class P>
double bisect_predicate(P&& pred, double lo, double hi, double xtol) {
    for (int it = 0; it < 200 && std::abs(hi - lo) > xtol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Aitken delta-squared extrapolation of the tail of a sequence.  Falls back
// to the last element when the acceleration is ill-conditioned.
inline double aitken_limit(std::span<const double> s) {
    if (s.size() < 3) return s.empty() ? kNaN : s.back();
    const double a = s[s.size() - 3], b = s[s.size() - 2], c = s.back();
    const double denom = (c - b) - (b - a);
    if (std::abs(denom) < 1e-14 * (std::abs(a) + std::abs(b) + std::abs(c) + 1e-300))
        return c;
    const double acc = c - (c - b) * (c - b) / denom;
    if (!std::isfinite(acc)) return c;
    return acc;
}

// Adaptive Simpson quadrature with absolute/relative tolerance.
namespace detail {
template <class F>
double simpson_rec(F& f, double a, double fa, double b, double fb, double m,
                   double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) throw QuadratureFailure("adaptive Simpson: depth exhausted");
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-10, int max_depth = 48) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double scale = std::max({std::abs(whole), std::abs(b - a), 1.0});
    return detail::simpson_rec(f, a, fa, b, fb, m, fm, whole, tol * scale, max_depth);
}

// Central finite difference with a relative step.
template <class F>
double central_diff(F&& f, double x, double h_rel = 1e-6) {
    const double h = std::max(1e-6, h_rel * std::abs(x));
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <class F>
double second_diff(F&& f, double x, double h_rel = 1e-5) {
    const double h = std::max(1e-5, h_rel * std::abs(x));
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

inline bool nearly_equal(double a, double b, double rel) {
    return std::abs(a - b) <= rel * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace bsol
