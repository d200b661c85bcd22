#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "ficon/forward.hpp"
#include "ficon/grid.hpp"
#include "ficon/weights.hpp"

namespace ficon {

enum class PrecondKind {
    None,    // plain CG
    Jacobi,  // diagonal scaling
    Block,   // exact z-block inverse (block-tridiagonal KKT) + diagonal u-block
};

struct ControlOptions {
    double cg_tol = 1e-10;
    int cg_maxiter_factor = 50;  // cap = factor * sqrt(dof)
    PrecondKind precond = PrecondKind::Block;
    MVariant m_variant = MVariant::Prop31;
};

// Optional replacements for the problem data (used by the trajectory loop,
// which feeds the nonlinear remainder in as a bulk source).
struct ControlData {
    std::vector<double> f_rows;  // (N x nx), physical source at source levels
    std::vector<double> r;       // (N), interface source at source levels
    std::vector<double> z0;      // (nx)
};

// Linear penalized controllability problem. The state and the control are
// both decision variables; the initial condition, Dirichlet ends, interface
// continuity and flux-jump are built into the variable layout, the PDE is
// penalized with weight 1/epsilon.
struct ControlProblem {
    const ProblemSpec* spec = nullptr;
    const Grid* grid = nullptr;
    const WeightSystem* ws = nullptr;
    double epsilon = 1e-3;
    ControlOptions opt;
    std::vector<double> b_overlay;  // (nt x nx) addition to b (empty: none)
    std::vector<double> c_overlay;  // (nt x nx) addition to c
    ControlData data;               // empty members fall back to spec data

    void validate() const;
};

struct OptimalityReport {
    // Relative residuals of the discrete optimality system, grouped:
    // adjoint_pde, control_law, terminal_condition, interface_adjoint,
    // interface_primal, initial (diagnostic; defines the sigma trace).
    std::map<std::string, double> residuals;
    double tolerance = 1e-6;
    bool ok = false;
    std::string summary() const;
};

struct DualityReport {
    double two_J = 0.0;
    double term_f = 0.0;     // -(p, f~)
    double term_init = 0.0;  // -((p/a)(0,.), z0)
    double term_r = 0.0;     // +(r, p(.,0))
    double gap = 0.0;        // |2J - sum| / (|2J| + |terms| + tiny)
};

struct ControlSolution {
    SpaceTimeField z;  // state
    SpaceTimeField u;  // control, zero off the mask
    SpaceTimeField p;  // multiplier (1/eps)(L~ z - chi u - f~) on rows,
                       // interface column from the constraint multipliers,
                       // identically zero at the terminal level
    double J_value = 0.0;
    std::array<double, 4> J_terms{};  // J1..J4
    double terminal_norm = 0.0;       // |z(T,.)|_{L2}
    double residual_pde = 0.0;        // |L~ z - chi u - f~|_{L2(Q)}
    int cg_iters = 0;
    double cg_relres = 0.0;
    double b_norm = 0.0;              // |b| of the normal equations
    double gradient_norm = 0.0;       // |H v - b| after the solve
    int pinned_z = 0, pinned_u = 0;   // dofs pinned by the weight cap
    std::vector<double> pi;           // interface constraint multipliers (N)
    std::vector<double> sigma;        // initial-level multipliers (nx)
    double effective_freeze = 0.0;
};

// Minimizes the discrete J_eps by (optionally Jacobi-preconditioned)
// conjugate gradients on the normal equations over the stacked (z,u) dofs.
ControlSolution solve_penalized_control(const ControlProblem& cp);

// Recomputes the full Lagrangian gradient at the returned point through an
// independent evaluation path and reports the grouped relative residuals.
OptimalityReport recover_adjoint_and_check(const ControlSolution& sol,
                                           const ControlProblem& cp);

// Exact discrete counterpart of 2J = -(p,f~) - ((p/a)(0,.),z0) + (r,p(.,0)),
// with the trace terms read off the recovered multipliers.
DualityReport duality_identity(const ControlSolution& sol, const ControlProblem& cp);

struct SweepRow {
    double epsilon = 0.0;
    double terminal_norm = 0.0;
    std::array<double, 4> J_terms{};
    double pde_residual = 0.0;
    int cg_iters = 0;
    std::string error;  // non-empty if the row failed
};

// One solve per epsilon; rows run concurrently, results in input order.
std::vector<SweepRow> epsilon_sweep(const ControlProblem& base,
                                    const std::vector<double>& epsilons);

}  // namespace ficon
