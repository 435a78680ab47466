#include <catch_amalgamated.hpp>

#include <cmath>

#include "bsol/payoff.hpp"
#include "bsol/values.hpp"

using namespace bsol;

namespace {
const DiffusionSpec kGbm = DiffusionSpec::gbm(0.1, 0.2, 0.24);

Payoff example1_payoff() {
    return Payoff({
        {0.0, 10.0, Expr::parse("x - 3")},
        {10.0, kInf, Expr::parse("(7/3)*x - 49/3")},
    });
}

Payoff example7_payoff() {
    return Payoff({
        {0.0, 1.0, Expr::parse("x^(-6+x)")},
        {1.0, kInf, Expr::parse("x^-1")},
    });
}
}  // namespace

TEST_CASE("hitting value: Example 1 numbers") {
    const auto pair = solve_fundamental(kGbm);
    const auto g = example1_payoff();
    // (g(6)/psi(6)) psi(3) = (3/36) * 9
    CHECK(hitting_value(pair, 3.0, 6.0, g) == Catch::Approx(0.75).epsilon(1e-12));
    // x = z: immediate stop
    CHECK(hitting_value(pair, 6.0, 6.0, g) == Catch::Approx(g(6.0)));
    // x above the target uses the phi branch
    CHECK(hitting_value(pair, 12.0, 6.0, g) ==
          Catch::Approx(3.0 / std::pow(6.0, -6.0) * std::pow(12.0, -6.0)).epsilon(1e-12));
}

TEST_CASE("hitting value is continuous across x = z") {
    const auto pair = solve_fundamental(kGbm);
    const auto g = example1_payoff();
    for (double z : {2.0, 6.0, 14.0}) {
        const double below = hitting_value(pair, z * (1 - 1e-9), z, g);
        const double above = hitting_value(pair, z * (1 + 1e-9), z, g);
        CHECK(below == Catch::Approx(g(z)).epsilon(1e-7));
        CHECK(above == Catch::Approx(g(z)).epsilon(1e-7));
    }
}

TEST_CASE("two-point value at maximizer pairs reduces to the one-sided formula") {
    const auto pair = solve_fundamental(kGbm);
    const auto g = example1_payoff();
    // a = 6 and b = 14 lie on the same level set of g/psi (both maximize it)
    for (double x : {6.0, 7.5, 10.0, 13.0, 14.0}) {
        const double tp = two_point_value(pair, x, 6.0, 14.0, g);
        const double one = hitting_value(pair, x, 14.0, g);
        CHECK(tp == Catch::Approx(one).epsilon(1e-12));
        CHECK(tp == Catch::Approx(x * x / 12.0).epsilon(1e-12));
    }
}

TEST_CASE("two-point value hits the reward at the bracket ends") {
    const auto pair = solve_fundamental(kGbm);
    const auto g = example1_payoff();
    CHECK(two_point_value(pair, 2.0 + 1e-10, 2.0, 9.0, g) ==
          Catch::Approx(g(2.0)).margin(1e-6));
    CHECK(two_point_value(pair, 9.0, 2.0, 9.0, g) == Catch::Approx(g(9.0)));
}

TEST_CASE("degenerate bracket is rejected") {
    const auto pair = solve_fundamental(kGbm);
    const auto g = example1_payoff();
    CHECK_THROWS_AS(two_point_value(pair, 6.0, 6.0, 6.0, g), DegenerateBracket);
}

TEST_CASE("Example 7 limit: two-point values converge to the boundary formula") {
    const auto pair = solve_fundamental(kGbm);
    const auto g = example7_payoff();
    const double x = 0.1, b = 1.22;
    // limit of E_x[e^{-r tau_{(a,b)}} g] as a -> 0:
    //   (g/phi)(0+) phi(x) + (g(b) - (g/phi)(0+) phi(b)) psi(x)/psi(b),
    // with (g/phi)(0+) = lim x^x = 1.
    const double expect = pair.phi(x) +
                          (g(b) - pair.phi(b)) * pair.psi(x) / pair.psi(b);
    double prev_err = kInf;
    for (double a : {1e-2, 1e-3, 1e-4, 1e-5}) {
        const double v = two_point_value(pair, x, a, b, g);
        const double err = std::abs(v - expect);
        CHECK(err < prev_err + 1e-12);
        prev_err = err;
    }
    CHECK(two_point_value(pair, x, 1e-6, b, g) == Catch::Approx(expect).epsilon(1e-4));
}
