#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ficon/grid.hpp"
#include "support/oracles.hpp"

using namespace ficon;

TEST_CASE("spacings and pinned nodes") {
    Geometry g{-1.0, 1.0, 0.5, 1.0};
    Grid grid = build_grid(g, 10, 20, 50);
    CHECK(grid.dx_minus == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(grid.dx_plus == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(grid.x[grid.iface] == 0.0);
    CHECK(grid.x[grid.ictrl] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(grid.snap_note.empty());
    CHECK(grid.dt == doctest::Approx(0.02));
}

TEST_CASE("d already on a node is kept") {
    Geometry g{-1.0, 1.0, 0.3, 1.0};
    Grid grid = build_grid(g, 10, 10, 50);
    CHECK(grid.n_plus == 10);
    CHECK(grid.d_effective == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("awkward d snaps with a report") {
    Geometry g{-1.0, 1.0, 0.29, 1.0};
    Grid grid = build_grid(g, 8, 10, 50);
    CHECK_FALSE(grid.snap_note.empty());
    // d_effective must be an exact node
    CHECK(grid.x[grid.ictrl] == grid.d_effective);
}

TEST_CASE("quadrature weights: uniform 11-node mesh of [0,1] analogue") {
    // Subdomain weights are trapezoidal; check the plus side of a grid with
    // dx=0.1 there: interior nodes weigh 0.1, the b end 0.05.
    Geometry g{-1.0, 1.0, 0.5, 1.0};
    Grid grid = build_grid(g, 10, 10, 50);
    CHECK(grid.wq.back() == doctest::Approx(0.05));
    CHECK(grid.wq[grid.iface + 1] == doctest::Approx(0.1));
    // interface node carries half cells from both sides
    CHECK(grid.wq[grid.iface] == doctest::Approx(0.05 + 0.05));
    double sum = 0.0;
    for (double w : grid.wq) sum += w;
    CHECK(sum == doctest::Approx(g.b - g.a).epsilon(1e-12));
}

TEST_CASE("counts below 4 rejected") {
    Geometry g{-1.0, 1.0, 0.5, 1.0};
    CHECK_THROWS_AS(build_grid(g, 3, 20, 50), ConfigError);
    CHECK_THROWS_AS(build_grid(g, 10, 20, 3), ConfigError);
}

TEST_CASE("control mask is exactly x >= d") {
    Geometry g{-1.0, 1.0, 0.5, 1.0};
    Grid grid = build_grid(g, 7, 12, 20);
    for (int i = 0; i < grid.nx(); ++i)
        CHECK(static_cast<bool>(grid.control_mask[i]) == (grid.x[i] >= grid.d_effective));
}

TEST_CASE("norm of the unit field over Q") {
    Geometry g{-1.0, 1.0, 0.5, 1.0};
    Grid grid = build_grid(g, 8, 8, 16);
    SpaceTimeField f(grid);
    for (double& v : f.v) v = 1.0;
    CHECK(discrete_norm(grid, f, Region::Q) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    SpaceTimeField z(grid);
    CHECK(discrete_norm(grid, z, Region::Q) == 0.0);
}

TEST_CASE("slice norm of sin(pi x) on [0,1] recovers sqrt(1/2)") {
    // Trapezoid sums of sin^2 on a uniform mesh are exact by discrete
    // orthogonality, so the value lands within rounding already at n = 16.
    Geometry g{-1.0, 1.0, 0.5, 1.0};
    Grid grid = build_grid(g, 8, 16, 8);
    double nrm = 0.0;
    for (int i = grid.iface; i < grid.nx(); ++i) {
        double w = i == grid.iface ? 0.5 * grid.dx_plus : grid.wq[i];
        double v = std::sin(M_PI * grid.x[i]);
        nrm += w * v * v;
    }
    CHECK(std::sqrt(nrm) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("slice norm converges at order 2 for a generic smooth profile") {
    auto f = [](double x) { return std::exp(x) * std::sin(M_PI * x); };
    auto norm_on = [&](int n) {
        Geometry g{-1.0, 1.0, 0.5, 1.0};
        Grid grid = build_grid(g, 8, n, 8);
        double acc = 0.0;
        for (int i = grid.iface; i < grid.nx(); ++i) {
            double w = i == grid.iface ? 0.5 * grid.dx_plus : grid.wq[i];
            acc += w * f(grid.x[i]) * f(grid.x[i]);
        }
        return std::sqrt(acc);
    };
    double ref = norm_on(2048);
    std::vector<double> scales, errs;
    for (int n : {8, 16, 32, 64}) {
        scales.push_back(1.0 / n);
        errs.push_back(std::abs(norm_on(n) - ref));
    }
    CHECK(test::fitted_order(scales, errs) >= 1.9);
}

TEST_CASE("refining the mesh changes the norm of a smooth field at order 2") {
    std::vector<double> scales, errs;
    double ref = 0.0;
    {
        Geometry g{-1.0, 1.0, 0.5, 1.0};
        Grid fine = build_grid(g, 256, 256, 8);
        SpaceTimeField f = eval_on_grid(fine, [](double t, double x) {
            return std::cos(t) * std::exp(x);
        });
        ref = discrete_norm(fine, f, Region::Q);
    }
    for (int n : {8, 16, 32}) {
        Geometry g{-1.0, 1.0, 0.5, 1.0};
        Grid grid = build_grid(g, n, n, 8);
        SpaceTimeField f = eval_on_grid(grid, [](double t, double x) {
            return std::cos(t) * std::exp(x);
        });
        scales.push_back(1.0 / n);
        errs.push_back(std::abs(discrete_norm(grid, f, Region::Q) - ref));
    }
    CHECK(test::fitted_order(scales, errs) >= 1.9);
}

TEST_CASE("interface derivative accessors see one-sided slopes") {
    Geometry g{-1.0, 1.0, 0.5, 1.0};
    Grid grid = build_grid(g, 16, 16, 8);
    // piecewise-linear field with a kink at 0: slope -1 left, +2 right
    SpaceTimeField f(grid);
    for (int i = 0; i < grid.nx(); ++i)
        f.at(0, i) = grid.x[i] < 0 ? -grid.x[i] : 2.0 * grid.x[i];
    CHECK(f.d1_plus(grid, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.d1_minus(grid, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}
