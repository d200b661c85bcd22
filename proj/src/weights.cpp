#include "ficon/weights.hpp"

#include <cmath>
#include <sstream>

namespace ficon {

namespace {

// (T-t)^p with the limit convention at t = T.
double pow_Tt(double T, double t, double p) {
    double d = T - t;
    if (d <= 0.0) {
        if (p > 0.0) return 0.0;
        if (p == 0.0) return 1.0;
        return std::numeric_limits<double>::infinity();
    }
    return std::pow(d, p);
}

}  // namespace

WeightSystem::WeightSystem(const Geometry& geom, WeightParameters params)
    : geom_(geom), params_(params) {
    geom.validate();
    if (!(params_.lambda > 0.0)) throw ConfigError("weights: lambda must be positive");
    if (!(params_.s_hat > 0.0)) throw ConfigError("weights: s_hat must be positive");
    if (!(params_.beta_offset > 0.0))
        throw ConfigError("weights: beta_offset must be positive");

    c0_ = std::max(geom.b, -geom.a);
    psi1_at_0_ = params_.beta_offset * params_.beta_offset;

    // Resolve C_shift: one more than the largest psi value on [a,b].
    double max_psi = 0.0;
    for (int i = 0; i <= 512; ++i) {
        double x1 = geom.a + (geom.b - geom.a) * i / 512.0;
        max_psi = std::max({max_psi, psi1(x1), psi2(x1)});
    }
    C_shift_ = std::isnan(params_.C_shift) ? max_psi + 1.0 : params_.C_shift;
    params_.C_shift = C_shift_;
    if (!(C_shift_ > max_psi))
        throw ConfigError("weights: C_shift must exceed max(psi1,psi2) on [a,b] "
                          "(got " + std::to_string(C_shift_) + " vs " +
                          std::to_string(max_psi) + ")");

    freeze_ = std::isnan(params_.epsilon_freeze) ? geom.T / 8.0 : params_.epsilon_freeze;
    params_.epsilon_freeze = freeze_;
    if (!(freeze_ > 0.0 && freeze_ < geom.T / 2.0))
        throw ConfigError("weights: epsilon_freeze must lie in (0, T/2)");

    // Overflow guard on the core exponentials.
    if (params_.lambda * max_psi >= kExpClampHi)
        throw ConfigError("weights: e^{lambda*psi2(b)} overflows double precision; "
                          "reduce lambda or beta_offset");
    if (params_.lambda * C_shift_ >= kExpClampHi)
        throw ConfigError("weights: e^{lambda*C_shift} overflows double precision; "
                          "reduce lambda or C_shift");
}

double WeightSystem::psi1(double x1) const {
    double s = x1 + params_.beta_offset;
    return s * s;
}

double WeightSystem::psi2(double x1) const {
    return psi1_at_0_ * std::exp(psi1(x1) - psi1_at_0_);
}

double WeightSystem::phi(int j, double t, double x1) const {
    double psi = j == 1 ? psi1(x1) : psi2(x1);
    double num = std::exp(params_.lambda * psi) - std::exp(params_.lambda * C_shift_);
    double den = t * t * t * pow_Tt(geom_.T, t, 3.0);
    return num / den;  // -inf at t = 0 or t = T (num < 0)
}

double WeightSystem::phi_star(double t, double x1) const {
    return x1 >= 0.0 ? phi(2, t, x1) : phi(1, t, x1);
}

double WeightSystem::theta(double t) const {
    double T = geom_.T;
    if (t <= T / 4.0) return t;
    if (t >= 3.0 * T / 4.0) return T - t;
    // C2 monotone blend: slope 1 / -1 and zero curvature at the junctions,
    // apex at T/2 with negative curvature.
    return T / 4.0 + (T / (2.0 * M_PI)) * std::sin(M_PI * (t - T / 4.0) / (T / 2.0));
}

double WeightSystem::psi_star(double t, double x1) const {
    double tt = std::max(t, geom_.T / 2.0);
    if (tt >= geom_.T) return -std::numeric_limits<double>::infinity();
    return params_.s_hat * phi_star(tt, x1);
}

double WeightSystem::psi_star_eps(double t, double x1) const {
    return psi_star(std::min(t, geom_.T - freeze_), x1);
}

double WeightSystem::eta(double x1) const {
    double Th = geom_.T / 2.0;
    return params_.s_hat * phi_star(Th, x1) * Th * Th * Th;
}

double WeightSystem::psi_star_literal(double t, double x1) const {
    double d = geom_.T - t;
    if (d <= 0.0) return -std::numeric_limits<double>::infinity();
    return eta(x1) / (d * d * d);
}

double WeightSystem::m_weight(double t, double x1, MVariant variant) const {
    if (x1 >= 0.0) return pow_Tt(geom_.T, t, 15.0);
    return variant == MVariant::Prop31 ? 1.0 : pow_Tt(geom_.T, t, 9.0);
}

double WeightSystem::mu1(double t, double x1, MVariant variant) const {
    double d = geom_.T - t;
    if (d <= 0.0) return 0.0;
    double logm = x1 >= 0.0 ? 15.0 * std::log(d)
                            : (variant == MVariant::Prop31 ? 0.0 : 9.0 * std::log(d));
    return exp_clamped(15.0 * std::log(d) + logm - 2.0 * psi_star_eps(t, x1));
}

double WeightSystem::mu2(double t) const {
    double d = geom_.T - t;
    if (d <= 0.0) return 0.0;
    return exp_clamped(15.0 * std::log(d) - 2.0 * psi_star_eps(t, 0.0));
}

double WeightSystem::jz_weight_plus(double t, double x1) const {
    double d = geom_.T - t;
    if (d <= 0.0) return 0.0;
    return exp_clamped(6.0 * std::log(d) - 2.0 * psi_star_eps(t, x1));
}

double WeightSystem::jz_weight_minus(double t, double x1) const {
    return exp_clamped(-2.0 * psi_star_eps(t, x1));
}

double WeightSystem::ju_weight(double t, double x1) const {
    double d = geom_.T - t;
    if (d <= 0.0) return std::numeric_limits<double>::infinity();
    return exp_clamped(15.0 * std::log(d) - 2.0 * psi_star(t, x1));
}

double WeightSystem::control_gain(double t, double x1) const {
    double d = geom_.T - t;
    if (d <= 0.0) return 0.0;
    return exp_clamped(2.0 * psi_star(t, x1) - 15.0 * std::log(d));
}

WeightSystem WeightSystem::with_freeze(double eps) const {
    WeightParameters p = params_;
    p.epsilon_freeze = eps;
    return WeightSystem(geom_, p);
}

WeightSystem WeightSystem::with_s_hat(double s) const {
    WeightParameters p = params_;
    p.s_hat = s;
    return WeightSystem(geom_, p);
}

WeightSystem build_weight_system(const Geometry& geom, const WeightParameters& params) {
    return WeightSystem(geom, params);
}

std::string OrderingReport::summary() const {
    std::ostringstream os;
    os << (ok ? "ordering OK" : "ordering VIOLATED") << ": min margin Q+ "
       << min_margin_plus << ", min margin Q- " << min_margin_minus
       << ", interface rel diff " << max_iface_reldiff << ", max psi_* "
       << max_psi_star << ", violations " << violations.size();
    return os.str();
}

OrderingReport verify_ordering(const WeightSystem& ws, const Grid& grid) {
    OrderingReport rep;
    rep.min_margin_plus = std::numeric_limits<double>::infinity();
    rep.min_margin_minus = std::numeric_limits<double>::infinity();
    rep.max_psi_star = -std::numeric_limits<double>::infinity();
    bool ok = true;

    for (int k = 1; k < grid.n_steps; ++k) {
        double t = grid.t(k);
        for (int i = 0; i < grid.nx(); ++i) {
            double x1 = grid.x[i];
            double p1 = ws.phi(1, t, x1);
            double p2 = ws.phi(2, t, x1);
            if (!std::isfinite(p1) || !std::isfinite(p2)) {
                ok = false;
                rep.violations.push_back({k, i, t, x1, p1, p2});
                continue;
            }
            if (i == grid.iface) {
                double rd = std::abs(p1 - p2) / std::max(std::abs(p1), 1e-300);
                rep.max_iface_reldiff = std::max(rep.max_iface_reldiff, rd);
                if (rd > 1e-12) {
                    ok = false;
                    rep.violations.push_back({k, i, t, x1, p1, p2});
                }
            } else if (x1 > 0.0) {
                rep.min_margin_plus = std::min(rep.min_margin_plus, p2 - p1);
                if (!(p2 > p1)) {
                    ok = false;
                    rep.violations.push_back({k, i, t, x1, p1, p2});
                }
            } else {
                rep.min_margin_minus = std::min(rep.min_margin_minus, p1 - p2);
                if (!(p1 > p2)) {
                    ok = false;
                    rep.violations.push_back({k, i, t, x1, p1, p2});
                }
            }
        }
    }
    for (int k = 0; k <= grid.n_steps; ++k)
        for (int i = 0; i < grid.nx(); ++i)
            rep.max_psi_star = std::max(rep.max_psi_star,
                                        ws.psi_star(grid.t(k), grid.x[i]));
    if (!(rep.max_psi_star < 0.0)) ok = false;
    rep.ok = ok;
    return rep;
}

PenaltyFields penalty_factors(const WeightSystem& ws, const Grid& grid,
                              MVariant variant) {
    PenaltyFields f;
    f.m = SpaceTimeField(grid);
    f.mu1 = SpaceTimeField(grid);
    f.pow3 = SpaceTimeField(grid);
    f.pow15_2 = SpaceTimeField(grid);
    f.pow9_2 = SpaceTimeField(grid);
    f.pow15 = SpaceTimeField(grid);
    f.mu2.assign(grid.nt(), 0.0);

    double T = ws.geometry().T;
    for (int k = 0; k < grid.nt(); ++k) {
        double t = grid.t(k);
        f.mu2[k] = ws.mu2(t);
        if (!std::isfinite(f.mu2[k]))
            throw SolverError("penalty_factors: non-finite mu2 at level " +
                              std::to_string(k));
        for (int i = 0; i < grid.nx(); ++i) {
            double x1 = grid.x[i];
            f.m.at(k, i) = ws.m_weight(t, x1, variant);
            f.mu1.at(k, i) = ws.mu1(t, x1, variant);
            f.pow3.at(k, i) = pow_Tt(T, t, 3.0);
            f.pow15_2.at(k, i) = pow_Tt(T, t, 7.5);
            f.pow9_2.at(k, i) = pow_Tt(T, t, 4.5);
            f.pow15.at(k, i) = pow_Tt(T, t, 15.0);
            if (!std::isfinite(f.mu1.at(k, i)) || !std::isfinite(f.m.at(k, i)))
                throw SolverError("penalty_factors: non-finite weight at node (" +
                                  std::to_string(k) + "," + std::to_string(i) + ")");
        }
    }
    return f;
}

}  // namespace ficon
