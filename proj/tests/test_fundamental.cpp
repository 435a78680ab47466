#include <catch_amalgamated.hpp>

#include <cmath>

#include "bsol/fundamental.hpp"

using namespace bsol;

namespace {
DiffusionSpec paper_gbm() { return DiffusionSpec::gbm(0.1, 0.2, 0.24); }

DiffusionSpec numeric_gbm(double lo, double hi) {
    auto s = DiffusionSpec::custom([](double x) { return 0.1 * x; },
                                   [](double x) { return 0.2 * x; },
                                   Discount::constant(0.24));
    s.domain.lo = lo;
    s.domain.hi = hi;
    return s;
}
}  // namespace

TEST_CASE("GBM closed form: exponents 2 and -6") {
    const auto pair = solve_fundamental(paper_gbm());
    CHECK(pair.source() == FundamentalPair::Source::ClosedForm);
    for (double x : {0.5, 1.0, 3.0, 14.0, 200.0}) {
        CHECK(pair.psi(x) == Catch::Approx(x * x).epsilon(1e-14));
        CHECK(pair.phi(x) == Catch::Approx(std::pow(x, -6.0)).epsilon(1e-14));
        CHECK(pair.psi_prime(x) == Catch::Approx(2.0 * x).epsilon(1e-13));
        CHECK(pair.phi_prime(x) == Catch::Approx(-6.0 * std::pow(x, -7.0)).epsilon(1e-13));
    }
    // S' = x^{-5}, m' = 2/(sigma^2 x^2 S') = 50 x^3, B = 8
    CHECK(pair.scale_density(2.0) == Catch::Approx(std::pow(2.0, -5.0)));
    CHECK(pair.speed_density(2.0) == Catch::Approx(50.0 * 8.0));
    CHECK(pair.wronskian() == Catch::Approx(8.0));
}

TEST_CASE("arithmetic BM closed form: exponentials") {
    // mu = 0, sigma = sqrt(2), r = 1  =>  u'' = u, psi = e^x, phi = e^-x
    auto spec = DiffusionSpec::abm(0.0, std::sqrt(2.0), 1.0);
    spec.domain = {0.1, 50.0, 4096};
    const auto pair = solve_fundamental(spec);
    CHECK(pair.source() == FundamentalPair::Source::ClosedForm);
    const double c_psi = pair.psi(1.0) / std::exp(1.0);
    const double c_phi = pair.phi(1.0) / std::exp(-1.0);
    for (double x : {0.2, 1.0, 4.0, 20.0}) {
        CHECK(pair.psi(x) == Catch::Approx(c_psi * std::exp(x)).epsilon(1e-12));
        CHECK(pair.phi(x) == Catch::Approx(c_phi * std::exp(-x)).epsilon(1e-12));
    }
}

TEST_CASE("numeric-mode GBM matches the closed form up to one scalar") {
    const auto spec = numeric_gbm(0.1, 50.0);
    const auto pair = solve_fundamental(spec);
    CHECK(pair.source() == FundamentalPair::Source::Numeric);
    // fit the scalar at one point, then compare along a log grid
    const double c_psi = pair.psi(1.0) / 1.0;
    const double c_phi = pair.phi(1.0) / 1.0;
    for (double x : log_grid(0.1, 50.0, 101)) {
        CHECK(pair.psi(x) == Catch::Approx(c_psi * x * x).epsilon(1e-6));
        CHECK(pair.phi(x) == Catch::Approx(c_phi * std::pow(x, -6.0)).epsilon(1e-6));
    }
    // normalization contract: psi(x0) = phi(x0) = 1 at the anchor
    CHECK(pair.psi(pair.anchor()) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(pair.phi(pair.anchor()) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("numeric-mode arithmetic BM away from the origin") {
    // On [10, 60] the canonical increasing solution of the interval problem
    // coincides with e^{gamma+ x} to far better than the test tolerance.
    auto spec = DiffusionSpec::custom([](double) { return 0.0; },
                                      [](double) { return std::sqrt(2.0); },
                                      Discount::constant(1.0));
    spec.domain = {10.0, 60.0, 4096};
    const auto pair = solve_fundamental(spec);
    const double c_psi = pair.psi(20.0) / std::exp(20.0 - 24.0);  // avoid overflow: compare shapes
    for (double x : log_grid(12.0, 55.0, 33)) {
        const double expect = c_psi * std::exp(x - 24.0);
        CHECK(pair.psi(x) == Catch::Approx(expect).epsilon(1e-6));
    }
    const double c_phi = pair.phi(20.0) / std::exp(-(20.0 - 24.0));
    for (double x : log_grid(12.0, 55.0, 33)) {
        CHECK(pair.phi(x) == Catch::Approx(c_phi * std::exp(-(x - 24.0))).epsilon(1e-6));
    }
}

TEST_CASE("Wronskian constancy across the grid") {
    for (bool numeric : {false, true}) {
        const auto spec = numeric ? numeric_gbm(1e-2, 1e2) : paper_gbm();
        const auto pair = solve_fundamental(spec);
        const double b0 = (pair.dlog_psi(1.0) - pair.dlog_phi(1.0)) *
                          std::exp(pair.log_psi(1.0) + pair.log_phi(1.0) -
                                   pair.log_scale_density(1.0));
        for (double x : log_grid(spec.grid_lo(), spec.grid_hi(), 65)) {
            const double bx = (pair.dlog_psi(x) - pair.dlog_phi(x)) *
                              std::exp(pair.log_psi(x) + pair.log_phi(x) -
                                       pair.log_scale_density(x));
            INFO((numeric ? "numeric" : "closed") << " x = " << x);
            CHECK(bx == Catch::Approx(b0).epsilon(1e-6));
        }
    }
}

TEST_CASE("both branches satisfy the ODE (finite-difference residual)") {
    for (bool numeric : {false, true}) {
        const auto spec = numeric ? numeric_gbm(1e-2, 1e2) : paper_gbm();
        const auto pair = solve_fundamental(spec);
        auto residual = [&](auto&& u, double x) {
            const double h = 1e-4 * x;
            const double upp = (u(x + h) - 2.0 * u(x) + u(x - h)) / (h * h);
            const double up = (u(x + h) - u(x - h)) / (2.0 * h);
            const double lhs = 0.5 * spec.volatility(x) * spec.volatility(x) * upp +
                               spec.drift(x) * up - spec.discount(x) * u(x);
            return std::abs(lhs) / (std::abs(spec.discount(x) * u(x)) + 1e-12);
        };
        for (double x : log_grid(spec.grid_lo() * 8, spec.grid_hi() / 8, 17)) {
            CHECK(residual([&](double y) { return pair.psi(y); }, x) < 1e-6);
            CHECK(residual([&](double y) { return pair.phi(y); }, x) < 1e-6);
        }
    }
}

TEST_CASE("monotone branches") {
    const auto pair = solve_fundamental(numeric_gbm(1e-3, 1e3));
    double prev_psi = 0.0, prev_phi = kInf;
    for (double x : log_grid(1e-3, 1e3, 257)) {
        const double ps = pair.psi(x), ph = pair.phi(x);
        CHECK(ps > prev_psi * (1.0 - 1e-10));
        CHECK(ph < prev_phi * (1.0 + 1e-10));
        prev_psi = ps;
        prev_phi = ph;
    }
}

TEST_CASE("state-dependent discount goes through the numeric path") {
    // r(x) = 0.24 + 0.1/(1+x): bounded away from zero, not a registered family
    auto spec = DiffusionSpec::custom(
        [](double x) { return 0.1 * x; }, [](double x) { return 0.2 * x; },
        Discount::state_dependent([](double x) { return 0.24 + 0.1 / (1.0 + x); }, 0.24));
    spec.domain = {1e-2, 1e2, 2048};
    const auto pair = solve_fundamental(spec);
    CHECK(pair.source() == FundamentalPair::Source::Numeric);
    auto residual = [&](auto&& u, double x) {
        const double h = 1e-4 * x;
        const double upp = (u(x + h) - 2.0 * u(x) + u(x - h)) / (h * h);
        const double up = (u(x + h) - u(x - h)) / (2.0 * h);
        const double lhs = 0.5 * spec.volatility(x) * spec.volatility(x) * upp +
                           spec.drift(x) * up - spec.discount(x) * u(x);
        return std::abs(lhs) / (std::abs(spec.discount(x) * u(x)) + 1e-12);
    };
    for (double x : {0.1, 1.0, 10.0}) {
        CHECK(residual([&](double y) { return pair.psi(y); }, x) < 1e-6);
        CHECK(residual([&](double y) { return pair.phi(y); }, x) < 1e-6);
    }
}

TEST_CASE("invalid specs are rejected") {
    auto bad_sigma = DiffusionSpec::custom([](double) { return 0.0; },
                                           [](double x) { return x - 50.0; },
                                           Discount::constant(1.0));
    bad_sigma.domain = {1.0, 100.0, 256};
    CHECK_THROWS_AS(solve_fundamental(bad_sigma), InvalidSpec);

    auto bad_rate = DiffusionSpec::gbm(0.1, 0.2, -0.1);
    CHECK_THROWS_AS(solve_fundamental(bad_rate), InvalidSpec);
}
