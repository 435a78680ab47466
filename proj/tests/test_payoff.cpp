#include <catch_amalgamated.hpp>

#include "bsol/numeric.hpp"
#include "bsol/payoff.hpp"

using namespace bsol;

namespace {
Payoff example1_payoff() {
    return Payoff({
        {0.0, 10.0, Expr::parse("x - 3")},
        {10.0, kInf, Expr::parse("(7/3)*x - 49/3")},
    });
}
}  // namespace

TEST_CASE("piecewise evaluation and breakpoints") {
    auto g = example1_payoff();
    CHECK(g(6.0) == 3.0);
    CHECK(g(14.0) == Catch::Approx(7.0 / 3.0 * 14.0 - 49.0 / 3.0));
    REQUIRE(g.breakpoints().size() == 1);
    CHECK(g.breakpoints()[0] == 10.0);
    // continuous at the breakpoint: both one-sided values agree
    CHECK(g(10.0) == Catch::Approx(7.0));
}

TEST_CASE("upper semicontinuity at jumps: value is the larger one-sided limit") {
    Payoff g({
        {0.0, 2.0, Expr::parse("1")},
        {2.0, kInf, Expr::parse("5")},
    });
    CHECK(g(2.0) == 5.0);
    CHECK(g.left_limit(2.0) == 1.0);
    CHECK(g.right_limit(2.0) == 5.0);

    Payoff h({
        {0.0, 2.0, Expr::parse("5")},
        {2.0, kInf, Expr::parse("1")},
    });
    CHECK(h(2.0) == 5.0);
}

TEST_CASE("pieces must tile the interval") {
    CHECK_THROWS_AS(Payoff({
                        {0.0, 2.0, Expr::parse("1")},
                        {3.0, kInf, Expr::parse("2")},
                    }),
                    ValidationError);
    CHECK_THROWS_AS(Payoff({{2.0, 2.0, Expr::parse("1")}}), ValidationError);
    CHECK_THROWS_AS(Payoff(std::vector<PayoffPiece>{}), ValidationError);
}

TEST_CASE("explicit boundary values override the adjacent piece") {
    // reward 1 at the reflecting endpoint, 0 just inside
    Payoff g({{1.0, 5.0, Expr::parse("0")}, {5.0, kInf, Expr::parse("1")}},
             /*value_at_lower=*/1.0);
    CHECK(g(1.0) == 1.0);
    CHECK(g(1.0001) == 0.0);
    CHECK(g(5.0) == 1.0);
}

TEST_CASE("positivity sanity check") {
    Payoff g({{0.0, kInf, Expr::parse("0 - 1")}});
    const auto grid = log_grid(1e-3, 1e3, 64);
    CHECK_THROWS_AS(g.require_positive_somewhere(grid), ValidationError);
    auto ok = example1_payoff();
    CHECK_NOTHROW(ok.require_positive_somewhere(grid));
}
