#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ficon/weights.hpp"
#include "support/oracles.hpp"

using namespace ficon;

namespace {
Geometry geom() { return Geometry{-1.0, 1.0, 0.5, 1.0}; }
}

TEST_CASE("psi profiles at the pinned values") {
    WeightSystem ws = test::desk_weights(geom());
    // beta = 2: psi1(0) = 4 and psi2(0) = psi1(0)
    CHECK(ws.psi1(0.0) == 4.0);
    CHECK(ws.psi2(0.0) == 4.0);
    // x1 = 0.5: psi1 = 6.25, psi2 = 4 e^{2.25}
    CHECK(ws.psi1(0.5) == doctest::Approx(6.25));
    CHECK(ws.psi2(0.5) == doctest::Approx(4.0 * std::exp(2.25)));
    CHECK(ws.psi2(0.5) > ws.psi1(0.5));
}

TEST_CASE("phi1 equals phi2 exactly on the interface line") {
    WeightSystem ws = test::desk_weights(geom());
    for (double t : {0.1, 0.33, 0.5, 0.77, 0.9}) {
        double p1 = ws.phi(1, t, 0.0);
        double p2 = ws.phi(2, t, 0.0);
        CHECK(p1 == p2);  // bitwise: psi2(0) is computed as psi1(0)*exp(0)
        CHECK(p1 < 0.0);
    }
}

TEST_CASE("ordering holds on the default grid with positive margins") {
    Grid grid = test::desk_grid(geom());
    WeightSystem ws = test::desk_weights(geom());
    OrderingReport rep = verify_ordering(ws, grid);
    CHECK(rep.ok);
    CHECK(rep.min_margin_plus > 0.0);
    CHECK(rep.min_margin_minus > 0.0);
    CHECK(rep.max_iface_reldiff <= 1e-12);
    CHECK(rep.max_psi_star < 0.0);
}

TEST_CASE("beta = 0.5 breaks the Q- ordering and is reported") {
    Grid grid = test::desk_grid(geom());
    WeightParameters p;
    p.beta_offset = 0.5;
    WeightSystem ws = build_weight_system(geom(), p);
    OrderingReport rep = verify_ordering(ws, grid);
    CHECK_FALSE(rep.ok);
    CHECK_FALSE(rep.violations.empty());
    bool minus_side = false;
    for (const auto& v : rep.violations)
        if (v.x1 < 0.0) minus_side = true;
    CHECK(minus_side);
}

TEST_CASE("psi_star is frozen below T/2 and decreasing toward T") {
    WeightSystem ws = test::desk_weights(geom());
    double x1 = -0.4;
    CHECK(ws.psi_star(0.1, x1) == ws.psi_star(0.5, x1));
    CHECK(ws.psi_star(0.25, x1) == ws.psi_star(0.49, x1));
    // nonincreasing in t on [T/2, T)
    double prev = ws.psi_star(0.5, x1);
    for (double t = 0.55; t < 0.96; t += 0.05) {
        double cur = ws.psi_star(t, x1);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
    CHECK(ws.psi_star(1.0, x1) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("freeze variant matches psi_star away from the terminal zone") {
    WeightSystem ws = test::desk_weights(geom());
    double eps = ws.resolved_freeze();
    double x1 = 0.3;
    CHECK(ws.psi_star_eps(0.2, x1) == ws.psi_star(0.2, x1));
    CHECK(ws.psi_star_eps(1.0 - eps, x1) == ws.psi_star(1.0 - eps, x1));
    // frozen past T - eps
    CHECK(ws.psi_star_eps(1.0 - eps / 2, x1) == ws.psi_star(1.0 - eps, x1));
    CHECK(ws.psi_star_eps(1.0, x1) == ws.psi_star(1.0 - eps, x1));
    CHECK(std::isfinite(ws.psi_star_eps(1.0, x1)));
}

TEST_CASE("halving the freeze only changes values beyond the old freeze point") {
    WeightSystem ws = test::desk_weights(geom());
    double eps = ws.resolved_freeze();
    WeightSystem ws_half = ws.with_freeze(eps / 2.0);
    double T = geom().T;
    for (double t : {0.1, 0.4, 0.6, T - 1.5 * eps}) {
        CHECK(ws.psi_star_eps(t, 0.2) == ws_half.psi_star_eps(t, 0.2));
    }
    CHECK(ws.psi_star_eps(T, 0.2) != ws_half.psi_star_eps(T, 0.2));
}

TEST_CASE("theta: endpoints, C2 junctions, monotone halves, apex at T/2") {
    WeightSystem ws = test::desk_weights(geom());
    double T = geom().T;
    CHECK(ws.theta(0.1) == 0.1);
    CHECK(ws.theta(T - 0.1) == doctest::Approx(0.1).epsilon(1e-14));
    // C2 at the junction: compare one-sided second differences
    double h = 1e-5, tj = T / 4.0;
    auto th = [&](double t) { return ws.theta(t); };
    double dl = (th(tj) - 2 * th(tj - h) + th(tj - 2 * h)) / (h * h);
    double dr = (th(tj + 2 * h) - 2 * th(tj + h) + th(tj)) / (h * h);
    CHECK(std::abs(dl - dr) <= 1e-3);
    // monotone up then down
    for (double t = 0.01; t < T / 2 - 0.01; t += 0.01)
        CHECK(ws.theta(t + 0.01) >= ws.theta(t));
    for (double t = T / 2; t < T - 0.011; t += 0.01)
        CHECK(ws.theta(t + 0.01) <= ws.theta(t));
    // apex curvature negative
    double mid = T / 2;
    CHECK((th(mid + h) - 2 * th(mid) + th(mid - h)) / (h * h) < 0.0);
}

TEST_CASE("penalty factors at the terminal time follow the limit convention") {
    Grid grid = test::desk_grid(geom());
    WeightSystem ws = test::desk_weights(geom());
    PenaltyFields pf = penalty_factors(ws, grid);
    int N = grid.n_steps;
    for (int i = 0; i < grid.nx(); ++i) {
        CHECK(pf.pow15_2.at(N, i) == 0.0);
        CHECK(pf.pow3.at(N, i) == 0.0);
        CHECK(pf.mu1.at(N, i) == 0.0);
    }
    CHECK(pf.mu2[N] == 0.0);
    // Prop. 3.1 variant: m = 1 on Q-
    for (int k = 0; k <= N; ++k)
        for (int i = 0; i < grid.iface; ++i) CHECK(pf.m.at(k, i) == 1.0);
    // Theorem variant: m = (T-x0)^9 on Q-
    PenaltyFields pt = penalty_factors(ws, grid, MVariant::Theorem11);
    CHECK(pt.m.at(0, 1) == doctest::Approx(std::pow(geom().T, 9.0)));
}

TEST_CASE("all exported weight fields are finite on the default grid") {
    Grid grid = test::desk_grid(geom());
    WeightSystem ws = test::desk_weights(geom());
    CHECK_NOTHROW(penalty_factors(ws, grid));
    for (int k = 1; k < grid.n_steps; ++k)
        for (int i = 0; i < grid.nx(); ++i) {
            CHECK(std::isfinite(ws.phi(1, grid.t(k), grid.x[i])));
            CHECK(std::isfinite(ws.phi(2, grid.t(k), grid.x[i])));
            CHECK(std::isfinite(ws.ju_weight(grid.t(k), grid.x[i])));
        }
}

TEST_CASE("overflowing parameters are rejected by name") {
    WeightParameters p;
    p.lambda = 2.0;  // e^{2*psi2(b)} with psi2(b) ~ 594 overflows
    CHECK_THROWS_AS(build_weight_system(geom(), p), ConfigError);
}

TEST_CASE("literal weight form is negative and matches at mid-time") {
    WeightSystem ws = test::desk_weights(geom());
    double T = geom().T;
    for (double x1 : {-0.8, -0.2, 0.0, 0.4, 0.9}) {
        CHECK(ws.eta(x1) < 0.0);
        CHECK(ws.psi_star_literal(T / 2, x1) ==
              doctest::Approx(ws.psi_star(T / 2, x1)).epsilon(1e-12));
    }
}
