#pragma once

#include <optional>
#include <vector>

#include "ficon/banded.hpp"
#include "ficon/grid.hpp"
#include "ficon/model.hpp"

namespace ficon {

// Coefficients sampled on the space-time grid, subdomain-aware. Rows of the
// implicit scheme read level k+1 values. a_plus0/a_minus0 are the one-sided
// diffusion traces at the interface.
struct DiscreteCoefficients {
    std::vector<double> rho, a, b, c;  // (nt x nx), bulk values
    std::vector<double> a_plus0, a_minus0;  // per time level
    int nt = 0, nx = 0;

    double& at(std::vector<double>& f, int k, int i) { return f[size_t(k) * nx + i]; }
    double rho_at(int k, int i) const { return rho[size_t(k) * nx + i]; }
    double a_at(int k, int i) const { return a[size_t(k) * nx + i]; }
    double b_at(int k, int i) const { return b[size_t(k) * nx + i]; }
    double c_at(int k, int i) const { return c[size_t(k) * nx + i]; }
};

DiscreteCoefficients bake_coefficients(const ProblemSpec& spec, const Grid& grid);

// Adds per-node fields to b and c (linearization around a trajectory).
void add_overlay(DiscreteCoefficients& coef, const std::vector<double>& b_add,
                 const std::vector<double>& c_add);

struct ForwardOptions {
    // Exponential shift parameter; NaN selects 1 + max|c| + max|b|^2/(2 alpha).
    double K = std::numeric_limits<double>::quiet_NaN();
    bool physical_flux = true;  // a+ dz+ - a- dz- (false: raw derivative jump)
    bool semi_implicit = false; // semilinear stepping mode
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
};

// One implicit step operator: Dirichlet rows at the ends, bulk rows inside
// both subdomains, flux-jump row at the interface node.
struct StepSystem {
    BandMatrix matrix;
    int level;                 // solves for z^{level}
    double K;
    double dominance_margin;   // min over rows of |diag| - sum |offdiag|
};

// Assembles the step system solving for z^{level} (level >= 1), in the
// shifted z-variables: bulk rho(z^{l}-z^{l-1})/h - a D2 z + b D1 z + (c+K) z,
// interface a+ D1+ z - a- D1- z - (M/h + M K) z(0) (see rhs conventions in
// rothe_solve).
StepSystem assemble_step_system(const ProblemSpec& spec, const Grid& grid, double K,
                                int level, const ForwardOptions& opt = {});

// Sources for the shifted scheme: g(k,i) bulk rows and p(k) interface source
// sampled at the source level k = 0..N-1, initial state z0.
struct RotheData {
    std::vector<double> g;   // (N x nx); interface/boundary columns ignored
    std::vector<double> p;   // (N)
    std::vector<double> z0;  // (nx)
};

// Backward-Euler march of the discrete scheme for the shifted variable z.
SpaceTimeField rothe_solve(const DiscreteCoefficients& coef, const Grid& grid,
                           double M, double K, const RotheData& data,
                           const ForwardOptions& opt = {});

double default_shift(const ProblemSpec& spec, const Grid& grid);

// Linear solve of the physical problem: shifts data by e^{-K x0}, runs the
// Rothe march, unshifts w = z e^{K x0}. `control` (optional) is added to the
// bulk source on the control mask.
SpaceTimeField solve_linear_forward(const ProblemSpec& spec, const Grid& grid,
                                    const ForwardOptions& opt = {},
                                    const SpaceTimeField* control = nullptr);

enum class SemiMode { SemiImplicit, Newton };

SpaceTimeField solve_semilinear_forward(const ProblemSpec& spec, const Grid& grid,
                                        SemiMode mode, const ForwardOptions& opt = {},
                                        const SpaceTimeField* control = nullptr);

// Backward system (adjoint shape): -rho d0 v - a d1^2 v + b d1 v + c v = f,
// interface [d1 v] + M d0 v = r_tilde, v(T) = terminal. Realized by time
// reversal of the forward march (the reversal flips the d0 signs, so the
// +M d0 v interface row maps onto the forward flux-jump row).
SpaceTimeField solve_adjoint_backward(const ProblemSpec& spec, const Grid& grid,
                                      const SpaceFn& terminal,
                                      const SpaceTimeFn& f_plus,
                                      const SpaceTimeFn& f_minus, const TimeFn& r_tilde,
                                      const ForwardOptions& opt = {});

// LHS/RHS of the discrete analogue of the energy estimate:
// (|w|_{H^{1,2}(Q+)} + |w|_{H^{1,2}(Q-)} + |w(.,0)|_{H^1(0,T)}) /
// (|f1| + |f2| + |w0|_{H^1} + |r|). Returns 0 for all-zero data.
double energy_estimate_check(const SpaceTimeField& w, const ProblemSpec& spec,
                             const Grid& grid);

// Discrete H^{1,2}(Q+-) norm built from difference quotients.
double h12_norm(const SpaceTimeField& w, const Grid& grid, Region region);

}  // namespace ficon
