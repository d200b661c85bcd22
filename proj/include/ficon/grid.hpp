#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ficon/model.hpp"

namespace ficon {

// Space-time mesh. Each subdomain is uniform; the interface x1 = 0 and the
// control edge x1 = d are exact nodes. Time levels are t_k = k*T/N.
struct Grid {
    Geometry geom;
    std::vector<double> x;      // nodes, x.front() = a, x.back() = b
    int iface = 0;              // index with x[iface] == 0
    int ictrl = 0;              // index with x[ictrl] == d_effective
    int n_minus = 0;            // cells on [a,0]
    int n_plus = 0;             // cells on [0,b]
    int n_steps = 0;            // N
    double dt = 0.0;            // T/N
    double dx_minus = 0.0;
    double dx_plus = 0.0;
    double d_effective = 0.0;   // d after snapping (== geom.d when exact)
    std::string snap_note;      // non-empty when d or n_plus was adjusted
    std::vector<double> wq;     // spatial trapezoid weights, sum == b-a
    std::vector<std::uint8_t> control_mask;  // x[i] >= d_effective

    int nx() const { return static_cast<int>(x.size()); }
    int nt() const { return n_steps + 1; }
    double t(int k) const { return geom.T * k / n_steps; }
    // Trapezoid weight of time level k (dt, halved at the end levels).
    double time_weight(int k) const {
        return (k == 0 || k == n_steps) ? 0.5 * dt : dt;
    }
    // Spacing of the subdomain node i belongs to (interface counts as either).
    double dx_at(int i) const { return i < iface ? dx_minus : dx_plus; }
};

// counts >= 4 per subdomain. If d does not land on a node of the [0,b] mesh,
// n_plus is first searched upward for an exact fit, then d is snapped to the
// nearest node; either adjustment is reported in snap_note.
Grid build_grid(const Geometry& geom, int n_minus, int n_plus, int n_steps);

// Scalar field on the space-time grid, indexed (time level, space node).
struct SpaceTimeField {
    int nt = 0, nx = 0;
    std::vector<double> v;

    SpaceTimeField() = default;
    SpaceTimeField(int nt_, int nx_) : nt(nt_), nx(nx_), v(size_t(nt_) * nx_, 0.0) {}
    explicit SpaceTimeField(const Grid& g) : SpaceTimeField(g.nt(), g.nx()) {}

    double& at(int k, int i) { return v[size_t(k) * nx + i]; }
    double at(int k, int i) const { return v[size_t(k) * nx + i]; }

    // One-sided first derivatives at the interface (2nd-order 3-point).
    double d1_plus(const Grid& g, int k) const;
    double d1_minus(const Grid& g, int k) const;
};

SpaceTimeField eval_on_grid(const Grid& g, const SpaceTimeFn& f);

enum class Region { QPlus, QMinus, Q, Interface, TimeSlice };

// Trapezoidal approximation of (integral of weight*field^2)^(1/2) over the
// region. Interface: line integral over time at x1=0. TimeSlice: spatial
// integral at level `slice`. weight == nullptr means weight == 1.
double discrete_norm(const Grid& g, const SpaceTimeField& f, Region region,
                     const SpaceTimeFn* weight = nullptr, int slice = -1);

// L2(Omega) norm of one time level.
double slice_norm(const Grid& g, const SpaceTimeField& f, int k);

}  // namespace ficon
