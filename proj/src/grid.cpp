#include "ficon/grid.hpp"

#include <cmath>
#include <sstream>

namespace ficon {

Grid build_grid(const Geometry& geom, int n_minus, int n_plus, int n_steps) {
    geom.validate();
    if (n_minus < 4 || n_plus < 4)
        throw ConfigError("grid: subdomain cell counts must be >= 4");
    if (n_steps < 4) throw ConfigError("grid: n_steps must be >= 4");

    Grid g;
    g.geom = geom;
    g.n_minus = n_minus;
    g.n_steps = n_steps;
    g.dt = geom.T / n_steps;

    // Make d a node of the uniform [0,b] mesh: keep n_plus if it already
    // fits, otherwise search upward, otherwise snap d to the nearest node.
    auto fits = [&](int np) {
        double dx = geom.b / np;
        double j = geom.d / dx;
        return std::abs(j - std::round(j)) < 1e-9 * np;
    };
    int np = n_plus;
    std::ostringstream note;
    if (!fits(np)) {
        int found = 0;
        for (int cand = n_plus + 1; cand <= 4 * n_plus; ++cand)
            if (fits(cand)) {
                found = cand;
                break;
            }
        if (found) {
            np = found;
            note << "n_plus adjusted " << n_plus << " -> " << np
                 << " so that d = " << geom.d << " is a mesh node";
        }
    }
    g.n_plus = np;
    g.dx_minus = -geom.a / n_minus;
    g.dx_plus = geom.b / np;

    g.x.resize(n_minus + np + 1);
    for (int i = 0; i <= n_minus; ++i) g.x[i] = geom.a + g.dx_minus * i;
    g.x[n_minus] = 0.0;
    for (int j = 1; j <= np; ++j) g.x[n_minus + j] = g.dx_plus * j;
    g.x.back() = geom.b;
    g.iface = n_minus;

    int jd = static_cast<int>(std::round(geom.d / g.dx_plus));
    jd = std::min(std::max(jd, 1), np - 1);
    g.ictrl = n_minus + jd;
    g.d_effective = g.x[g.ictrl];
    if (std::abs(g.d_effective - geom.d) > 1e-12 * geom.b) {
        if (note.tellp() > 0) note << "; ";
        note << "d snapped " << geom.d << " -> " << g.d_effective;
    }
    g.snap_note = note.str();

    g.wq.assign(g.x.size(), 0.0);
    for (size_t i = 0; i + 1 < g.x.size(); ++i) {
        double cell = g.x[i + 1] - g.x[i];
        g.wq[i] += 0.5 * cell;
        g.wq[i + 1] += 0.5 * cell;
    }

    g.control_mask.assign(g.x.size(), 0);
    for (size_t i = 0; i < g.x.size(); ++i)
        g.control_mask[i] = g.x[i] >= g.d_effective - 1e-14 ? 1 : 0;

    return g;
}

double SpaceTimeField::d1_plus(const Grid& g, int k) const {
    int m = g.iface;
    return (-3.0 * at(k, m) + 4.0 * at(k, m + 1) - at(k, m + 2)) / (2.0 * g.dx_plus);
}

double SpaceTimeField::d1_minus(const Grid& g, int k) const {
    int m = g.iface;
    return (3.0 * at(k, m) - 4.0 * at(k, m - 1) + at(k, m - 2)) / (2.0 * g.dx_minus);
}

SpaceTimeField eval_on_grid(const Grid& g, const SpaceTimeFn& f) {
    SpaceTimeField out(g);
    for (int k = 0; k < g.nt(); ++k)
        for (int i = 0; i < g.nx(); ++i) out.at(k, i) = f(g.t(k), g.x[i]);
    return out;
}

namespace {

bool node_in_region(const Grid& g, int i, Region region) {
    switch (region) {
        case Region::QPlus:
            return i >= g.iface;
        case Region::QMinus:
            return i <= g.iface;
        default:
            return true;
    }
}

// Spatial trapezoid weight of node i restricted to the region. The interface
// node carries only the half-cell on the region's side.
double region_weight(const Grid& g, int i, Region region) {
    if (!node_in_region(g, i, region)) return 0.0;
    if (i == g.iface) {
        if (region == Region::QPlus) return 0.5 * g.dx_plus;
        if (region == Region::QMinus) return 0.5 * g.dx_minus;
    }
    return g.wq[i];
}

}  // namespace

double discrete_norm(const Grid& g, const SpaceTimeField& f, Region region,
                     const SpaceTimeFn* weight, int slice) {
    if (f.nt != g.nt() || f.nx != g.nx())
        throw ConfigError("discrete_norm: field shape does not match grid");

    double acc = 0.0;
    if (region == Region::Interface) {
        int m = g.iface;
        for (int k = 0; k < g.nt(); ++k) {
            double w = weight ? (*weight)(g.t(k), 0.0) : 1.0;
            if (!std::isfinite(w)) throw ConfigError("discrete_norm: non-finite weight");
            acc += g.time_weight(k) * w * f.at(k, m) * f.at(k, m);
        }
        return std::sqrt(acc);
    }
    if (region == Region::TimeSlice) {
        if (slice < 0 || slice >= g.nt())
            throw ConfigError("discrete_norm: slice index out of range");
        for (int i = 0; i < g.nx(); ++i) {
            double w = weight ? (*weight)(g.t(slice), g.x[i]) : 1.0;
            acc += g.wq[i] * w * f.at(slice, i) * f.at(slice, i);
        }
        return std::sqrt(acc);
    }
    for (int k = 0; k < g.nt(); ++k) {
        double tw = g.time_weight(k);
        for (int i = 0; i < g.nx(); ++i) {
            double sw = region_weight(g, i, region);
            if (sw == 0.0) continue;
            double w = weight ? (*weight)(g.t(k), g.x[i]) : 1.0;
            if (!std::isfinite(w)) throw ConfigError("discrete_norm: non-finite weight");
            acc += tw * sw * w * f.at(k, i) * f.at(k, i);
        }
    }
    return std::sqrt(acc);
}

double slice_norm(const Grid& g, const SpaceTimeField& f, int k) {
    double acc = 0.0;
    for (int i = 0; i < g.nx(); ++i) acc += g.wq[i] * f.at(k, i) * f.at(k, i);
    return std::sqrt(acc);
}

}  // namespace ficon
