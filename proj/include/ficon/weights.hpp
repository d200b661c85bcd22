#pragma once

#include <limits>
#include <string>
#include <vector>

#include "ficon/grid.hpp"
#include "ficon/model.hpp"

namespace ficon {

// Parameters of the weight construction. The literature's constants
// (offset 10+c0, shift e^{10000*lambda*c0}) overflow double precision;
// beta_offset and C_shift generalize them preserving the properties the
// estimates use (psi1(0) >= 1, monotone ordering, shift dominating both
// psi profiles). Defaults are chosen so every derived weight stays inside
// the representable exponent range on desk-scale grids.
struct WeightParameters {
    double lambda = 2e-3;        // steepness of e^{lambda*psi_j}
    double s_hat = 1e-3;         // Carleman parameter multiplying phi_*
    double C_shift = std::numeric_limits<double>::quiet_NaN();  // default 1+max psi
    double beta_offset = 2.0;    // psi1(x1) = (x1+beta)^2
    double epsilon_freeze = std::numeric_limits<double>::quiet_NaN();  // default T/8
};

enum class MVariant {
    Prop31,      // m = 1 on Q-, (T-x0)^15 on Q+
    Theorem11,   // m = (T-x0)^9 on Q-, (T-x0)^15 on Q+
};

// The full weight family: spatial profiles psi1, psi2, space-time weights
// phi1, phi2, phi_*, the frozen weight psi_* (constant in time below T/2),
// its near-terminal freeze psi*_eps, the time profile theta, and the
// penalty factors. Immutable after construction.
class WeightSystem {
public:
    WeightSystem(const Geometry& geom, WeightParameters params);

    double psi1(double x1) const;
    double psi2(double x1) const;
    double phi(int j, double t, double x1) const;  // j = 1 or 2; needs 0 < t < T
    double phi_star(double t, double x1) const;    // phi2 on Q+, phi1 on Q-
    double theta(double t) const;

    // psi_*(t,x1): s_hat*phi_* frozen at T/2 for t < T/2. Tends to -inf as
    // t -> T (returned as -infinity at t >= T).
    double psi_star(double t, double x1) const;
    // psi_* frozen at t = T - eps_freeze; finite on [0,T].
    double psi_star_eps(double t, double x1) const;
    // Alternative literal form eta(x1)/(T-t)^3 with eta from phi_* at mid-time.
    double eta(double x1) const;
    double psi_star_literal(double t, double x1) const;

    // m(x) with the t = T limit convention (positive powers evaluate to 0).
    double m_weight(double t, double x1, MVariant variant) const;
    // Frozen composites (T-t)^15 m e^{-2 psi*_eps} and (T-t)^15 e^{-2 psi*_eps},
    // evaluated in log space.
    double mu1(double t, double x1, MVariant variant) const;
    double mu2(double t) const;

    // Quadratic-form weights of the penalized objective, in log space with
    // exponent clamping: (T-t)^6 e^{-2 psi*_eps} on Q+, e^{-2 psi*_eps} on Q-,
    // (T-t)^15 e^{-2 psi*} for the control.
    double jz_weight_plus(double t, double x1) const;
    double jz_weight_minus(double t, double x1) const;
    double ju_weight(double t, double x1) const;
    // Gain of the control law u = e^{2 psi*} (T-t)^-15 p (clamped, t < T).
    double control_gain(double t, double x1) const;

    const WeightParameters& params() const { return params_; }
    const Geometry& geometry() const { return geom_; }
    double c0() const { return c0_; }
    double resolved_C_shift() const { return C_shift_; }
    double resolved_freeze() const { return freeze_; }

    // Copies with one parameter replaced (the family stays immutable).
    WeightSystem with_freeze(double eps) const;
    WeightSystem with_s_hat(double s) const;

private:
    Geometry geom_;
    WeightParameters params_;
    double c0_ = 0.0;
    double C_shift_ = 0.0;
    double freeze_ = 0.0;
    double psi1_at_0_ = 0.0;
};

WeightSystem build_weight_system(const Geometry& geom, const WeightParameters& params);

struct OrderingViolation {
    int k, i;
    double t, x1, phi1, phi2;
};

struct OrderingReport {
    bool ok = false;
    double min_margin_plus = 0.0;    // min over Q+ nodes of phi2 - phi1
    double min_margin_minus = 0.0;   // min over Q- nodes of phi1 - phi2
    double max_iface_reldiff = 0.0;  // max |phi1-phi2|/|phi1| at x1 = 0
    double max_psi_star = 0.0;       // must be < 0
    std::vector<OrderingViolation> violations;
    std::string summary() const;
};

// Checks the pointwise ordering phi2 > phi1 on Q+, phi1 > phi2 on Q-,
// equality at the interface, and psi_* < 0, over the grid nodes
// (interior time levels; phi diverges at t = 0 and t = T).
OrderingReport verify_ordering(const WeightSystem& ws, const Grid& grid);

struct PenaltyFields {
    SpaceTimeField m, mu1, pow3, pow15_2, pow9_2, pow15;
    std::vector<double> mu2;  // on time levels, interface trace
};

// All penalty factor fields evaluated on the grid. Throws SolverError on a
// non-finite value.
PenaltyFields penalty_factors(const WeightSystem& ws, const Grid& grid,
                              MVariant variant = MVariant::Prop31);

}  // namespace ficon
