#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bsol/expr.hpp"

using bsol::Expr;
using bsol::ParseError;

namespace {
bool close(double a, double b, double rel = 1e-14) {
    return std::abs(a - b) <= rel * (1.0 + std::max(std::abs(a), std::abs(b)));
}
}  // namespace

TEST_CASE("literals, x, arithmetic") {
    auto e = Expr::parse("x - 3");
    CHECK(close(e(10.0), 7.0));
    CHECK(close(Expr::parse("(7/3)*x - 49/3")(14.0), 7.0 / 3.0 * 14.0 - 49.0 / 3.0));
    CHECK(close(Expr::parse("2*x + 3*x*x")(1.5), 2 * 1.5 + 3 * 1.5 * 1.5));
    CHECK(close(Expr::parse("1/12*x^2")(6.0), 3.0));
}

TEST_CASE("powers, both spellings, right associativity") {
    CHECK(close(Expr::parse("x^2")(5.0), 25.0));
    CHECK(close(Expr::parse("pow(x, -6)")(2.0), std::pow(2.0, -6.0)));
    CHECK(close(Expr::parse("x^-2")(4.0), 1.0 / 16.0));
    CHECK(close(Expr::parse("x^(-6+x)")(0.5), std::pow(0.5, -5.5)));
    // right-assoc: 2^3^2 = 2^9
    CHECK(close(Expr::parse("2^3^2")(0.0), 512.0));
    // unary minus binds looser than ^
    CHECK(close(Expr::parse("-x^2")(3.0), -9.0));
}

TEST_CASE("functions match the reference evaluator at rational points") {
    struct Case {
        const char* text;
        double (*ref)(double);
    };
    const Case cases[] = {
        {"x^2*sin(x)", [](double x) { return x * x * std::sin(x); }},
        {"floor(x)^2", [](double x) { return std::floor(x) * std::floor(x); }},
        {"min(x^2, x^-6)", [](double x) { return std::min(x * x, std::pow(x, -6.0)); }},
        {"max(x - 3, 0)", [](double x) { return std::max(x - 3.0, 0.0); }},
        {"16*(sqrt(x) - 2)", [](double x) { return 16.0 * (std::sqrt(x) - 2.0); }},
        {"exp(x) + log(x)", [](double x) { return std::exp(x) + std::log(x); }},
        {"1.4*sqrt(x) - 2", [](double x) { return 1.4 * std::sqrt(x) - 2.0; }},
    };
    std::mt19937 gen(12345);
    std::uniform_int_distribution<int> num(1, 400), den(1, 40);
    for (const auto& c : cases) {
        auto e = Expr::parse(c.text);
        for (int k = 0; k < 200; ++k) {
            const double x = double(num(gen)) / double(den(gen));
            INFO(c.text << " at x = " << x);
            CHECK(close(e(x), c.ref(x)));
        }
    }
}

TEST_CASE("floor payoff value from the step example") {
    CHECK(Expr::parse("floor(x)^2")(2.7) == 4.0);
}

TEST_CASE("pi constant") {
    CHECK(close(Expr::parse("sin(pi/2)")(0.0), 1.0));
}

TEST_CASE("parse errors carry positions") {
    CHECK_THROWS_AS(Expr::parse(""), ParseError);
    CHECK_THROWS_AS(Expr::parse("x +"), ParseError);
    CHECK_THROWS_AS(Expr::parse("foo(x)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("min(x)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("(x"), ParseError);
    CHECK_THROWS_AS(Expr::parse("x 2"), ParseError);
    try {
        Expr::parse("x + $", 7, 5);
        FAIL("expected ParseError");
    } catch (const ParseError& p) {
        CHECK(p.line == 7);
        CHECK(p.column >= 5);
    }
}
