#pragma once

#include <cmath>

#include "bsol/errors.hpp"
#include "bsol/fundamental.hpp"
#include "bsol/payoff.hpp"

namespace bsol {

// Value of stopping at the first hitting time of z, started from x:
//   (g(z)/psi(z)) psi(x)  for x <= z,   (g(z)/phi(z)) phi(x)  for x > z.
// Evaluated through log differences so that enormous basis values cancel.
template <class G>
double hitting_value_basis(const Basis& inc, const Basis& dec, double x, double z,
                           const G& g) {
    if (x <= z) return g(z) * std::exp(inc.log_value(x) - inc.log_value(z));
    return g(z) * std::exp(dec.log_value(x) - dec.log_value(z));
}

template <class G>
double hitting_value(const FundamentalPair& pair, double x, double z, const G& g) {
    return hitting_value_basis(pair.increasing(), pair.decreasing(), x, z, g);
}

// Value of stopping at the first exit from (a, b), started from x in [a, b]:
//   [phi(a)g(b) - phi(b)g(a)] psi(x)/D + [psi(b)g(a) - psi(a)g(b)] phi(x)/D,
//   D = psi(b)phi(a) - phi(b)psi(a).
// All basis values are normalized at x before combining.
template <class G>
double two_point_value_basis(const Basis& inc, const Basis& dec, double x, double a,
                             double b, const G& g) {
    if (!(a <= x && x <= b))
        throw ValidationError("two_point_value: need a <= x <= b");
    const double lpx = inc.log_value(x), lfx = dec.log_value(x);
    const double Pa = std::exp(inc.log_value(a) - lpx);
    const double Pb = std::exp(inc.log_value(b) - lpx);
    const double Fa = std::exp(dec.log_value(a) - lfx);
    const double Fb = std::exp(dec.log_value(b) - lfx);
    const double D = Pb * Fa - Fb * Pa;
    if (!(std::abs(D) > 1e-300) || !std::isfinite(D))
        throw DegenerateBracket("two_point_value: degenerate bracket");
    const double ga = g(a), gb = g(b);
    return ((Fa * gb - Fb * ga) + (Pb * ga - Pa * gb)) / D;
}

template <class G>
double two_point_value(const FundamentalPair& pair, double x, double a, double b,
                       const G& g) {
    return two_point_value_basis(pair.increasing(), pair.decreasing(), x, a, b, g);
}

}  // namespace bsol
