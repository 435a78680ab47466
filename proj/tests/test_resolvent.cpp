#include <catch_amalgamated.hpp>

#include <cmath>

#include "bsol/resolvent.hpp"

using namespace bsol;

namespace {
const DiffusionSpec kGbm = DiffusionSpec::gbm(0.1, 0.2, 0.24);

PayoffFn fn(std::function<double(double)> f) { return PayoffFn(std::move(f), {}); }
}  // namespace

TEST_CASE("constant running payoff: R_r c = c/r") {
    const auto pair = solve_fundamental(kGbm);
    const Resolvent R(pair, kGbm, fn([](double) { return 3.0; }));
    for (double x : {0.01, 0.5, 1.0, 7.0, 300.0})
        CHECK(R.value(x) == Catch::Approx(3.0 / 0.24).epsilon(1e-7));
    CHECK(R.deriv(1.0) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("linear running payoff on GBM: R x = x/(r - mu)") {
    const auto pair = solve_fundamental(kGbm);
    const Resolvent R(pair, kGbm, fn([](double x) { return x; }));
    for (double x : {0.1, 1.0, 10.0, 100.0}) {
        CHECK(R.value(x) == Catch::Approx(x / 0.14).epsilon(1e-7));
        CHECK(R.deriv(x) == Catch::Approx(1.0 / 0.14).epsilon(1e-6));
    }
}

TEST_CASE("residual check: (A - r) R pi = -pi by finite differences") {
    const auto pair = solve_fundamental(kGbm);
    auto pi = [](double x) { return x + std::sin(x); };
    const Resolvent R(pair, kGbm, fn(pi));
    for (double x : {0.5, 2.0, 20.0}) {
        const double h = 1e-4 * x;
        const double upp = (R.value(x + h) - 2.0 * R.value(x) + R.value(x - h)) / (h * h);
        const double up = (R.value(x + h) - R.value(x - h)) / (2.0 * h);
        const double lhs = 0.5 * 0.04 * x * x * upp + 0.1 * x * up - 0.24 * R.value(x);
        CHECK(std::abs(lhs + pi(x)) / (std::abs(pi(x)) + 1.0) < 1e-5);
    }
}

TEST_CASE("linearity to rounding error") {
    const auto pair = solve_fundamental(kGbm);
    auto p1 = [](double x) { return x; };
    auto p2 = [](double x) { return x * x / (1.0 + x); };
    const double a = 2.5, b = -0.75;
    const Resolvent R1(pair, kGbm, fn(p1));
    const Resolvent R2(pair, kGbm, fn(p2));
    const Resolvent R12(pair, kGbm, fn([=](double x) { return a * p1(x) + b * p2(x); }));
    for (double x : log_grid(1e-2, 1e2, 33)) {
        const double lhs = R12.value(x);
        const double rhs = a * R1.value(x) + b * R2.value(x);
        CHECK(lhs == Catch::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("divergent integrands are reported") {
    const auto pair = solve_fundamental(kGbm);
    // psi pi m' ~ x^2 * x^3 * x^3 near infinity: hopeless tail
    CHECK_THROWS_AS(Resolvent(pair, kGbm, fn([](double x) { return x * x * x; })).value(1.0),
                    DivergentIntegral);
}

TEST_CASE("works with the numeric pair") {
    auto spec = DiffusionSpec::custom([](double x) { return 0.1 * x; },
                                      [](double x) { return 0.2 * x; },
                                      Discount::constant(0.24));
    spec.domain = {1e-2, 1e2, 2048};
    const auto pair = solve_fundamental(spec);
    const Resolvent R(pair, spec, fn([](double x) { return x; }));
    for (double x : {0.5, 1.0, 10.0})
        CHECK(R.value(x) == Catch::Approx(x / 0.14).epsilon(1e-5));
}
