#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ficon/model.hpp"
#include "support/oracles.hpp"

using namespace ficon;
using nlohmann::json;

TEST_CASE("constant-coefficient heat system builds") {
    json cfg = {
        {"geometry", {{"a", -1.0}, {"b", 1.0}, {"d", 0.5}, {"T", 1.0}}},
        {"M", 1.0},
        {"coefficients", {{"alpha", 0.5}}},
    };
    ProblemSpec s = build_problem(cfg);
    CHECK(s.point_mass == 1.0);
    CHECK(s.geometry.d == 0.5);
    CHECK(s.is_linear());
}

TEST_CASE("zero and negative mass rejected") {
    json cfg = {{"geometry", {{"a", -1.0}, {"b", 1.0}, {"d", 0.5}, {"T", 1.0}}},
                {"M", 0.0}};
    CHECK_THROWS_WITH_AS(build_problem(cfg), "mass must be positive", ConfigError);
    cfg["M"] = -2.0;
    CHECK_THROWS_AS(build_problem(cfg), ConfigError);
}

TEST_CASE("geometry violations rejected") {
    json base = {{"M", 1.0}};
    base["geometry"] = {{"a", 0.5}, {"b", 1.0}, {"d", 0.5}, {"T", 1.0}};
    CHECK_THROWS_AS(build_problem(base), ConfigError);
    base["geometry"] = {{"a", -1.0}, {"b", 1.0}, {"d", 1.5}, {"T", 1.0}};
    CHECK_THROWS_AS(build_problem(base), ConfigError);
    base["geometry"] = {{"a", -1.0}, {"b", 1.0}, {"d", -0.1}, {"T", 1.0}};
    CHECK_THROWS_AS(build_problem(base), ConfigError);
}

TEST_CASE("missing M names the field") {
    json cfg = {{"geometry", {{"a", -1.0}, {"b", 1.0}, {"d", 0.5}, {"T", 1.0}}}};
    CHECK_THROWS_WITH_AS(build_problem(cfg), "config is missing required field 'M'",
                         ConfigError);
}

TEST_CASE("sampled positivity: sinusoidal rho passes with alpha 0.4") {
    // T = 5 lets sin(x0) reach -1, so min over [0,T]x[0,b] of
    // 1 + 0.5 sin(x0) x1 is 0.5: clears alpha = 0.4, fails alpha = 0.7.
    json cfg = {
        {"geometry", {{"a", -1.0}, {"b", 1.0}, {"d", 0.5}, {"T", 5.0}}},
        {"M", 1.0},
        {"coefficients",
         {{"alpha", 0.4},
          {"rho_plus",
           {{"preset", "sin_tx"}, {"c0", 1.0}, {"amp", 0.5}, {"freq", 1.0}}}}},
    };
    CHECK_NOTHROW(build_problem(cfg));
    cfg["coefficients"]["alpha"] = 0.7;
    CHECK_THROWS_AS(build_problem(cfg), ConfigError);
}

TEST_CASE("nonpositive rho sample rejected") {
    json cfg = {
        {"geometry", {{"a", -1.0}, {"b", 1.0}, {"d", 0.5}, {"T", 1.0}}},
        {"M", 1.0},
        {"coefficients",
         {{"alpha", 0.1},
          {"a_minus", {{"preset", "affine"}, {"c0", 0.5}, {"cx", 1.0}}}}},
    };
    // a_minus = 0.5 + x goes negative on [a,0)
    CHECK_THROWS_AS(build_problem(cfg), ConfigError);
}

TEST_CASE("w0 must vanish at the ends") {
    json cfg = {
        {"geometry", {{"a", -1.0}, {"b", 1.0}, {"d", 0.5}, {"T", 1.0}}},
        {"M", 1.0},
        {"data", {{"w0", 1.0}}},
    };
    CHECK_THROWS_AS(build_problem(cfg), ConfigError);
    cfg["data"]["w0"] = {{"preset", "sine_mode"}, {"k", 2}, {"amp", 0.3}};
    CHECK_NOTHROW(build_problem(cfg));
}

TEST_CASE("burgers evaluation and partials") {
    Nonlinearity n = burgers_nonlinearity();
    NonlinEval e = eval_nonlinearity(n, 0.0, 0.0, 2.0, 3.0);
    CHECK(e.g == 6.0);
    CHECK(e.dg_dxi1 == 3.0);
    CHECK(e.dg_dxi2 == 2.0);

    e = eval_nonlinearity(n, 0.3, -0.2, 0.0, 17.5);
    CHECK(e.g == 0.0);
    CHECK(e.dg_dxi1 == 17.5);
    CHECK(e.dg_dxi2 == 0.0);
}

TEST_CASE("burgers partials match central differences at a spot") {
    Nonlinearity n = burgers_nonlinearity();
    double xi1 = 0.7, xi2 = -1.1;
    auto g1 = [&](double s) { return n.g(0.1, 0.2, s, xi2); };
    auto g2 = [&](double s) { return n.g(0.1, 0.2, xi1, s); };
    NonlinEval e = eval_nonlinearity(n, 0.1, 0.2, xi1, xi2);
    CHECK(std::abs(e.dg_dxi1 - test::central_diff(g1, xi1)) <= 1e-8);
    CHECK(std::abs(e.dg_dxi2 - test::central_diff(g2, xi2)) <= 1e-8);
}

TEST_CASE("analytic partials agree with finite differences on random sample") {
    Nonlinearity n = burgers_nonlinearity(0.8);
    std::mt19937_64 rng(12345);
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
        double x0 = uniform(rng, -2.0, 2.0);
        double x1 = uniform(rng, -2.0, 2.0);
        double xi1 = uniform(rng, -2.0, 2.0);
        double xi2 = uniform(rng, -2.0, 2.0);
        NonlinEval e = eval_nonlinearity(n, x0, x1, xi1, xi2);
        auto g1 = [&](double v) { return n.g(x0, x1, v, xi2); };
        auto g2 = [&](double v) { return n.g(x0, x1, xi1, v); };
        worst = std::max(worst, std::abs(e.dg_dxi1 - test::central_diff(g1, xi1)));
        worst = std::max(worst, std::abs(e.dg_dxi2 - test::central_diff(g2, xi2)));
    }
    CHECK(worst <= 1e-7);
}

TEST_CASE("default preset coefficients clear their alpha bound") {
    ProblemSpec s = default_problem();
    CHECK_NOTHROW(s.validate());
}
