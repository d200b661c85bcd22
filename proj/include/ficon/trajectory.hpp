#pragma once

#include <vector>

#include "ficon/hum.hpp"

namespace ficon {

// Admissible pair (state, control) of the semilinear system whose terminal
// slice is the controllability target. The trajectory may be genuinely
// time-varying.
struct TargetTrajectory {
    SpaceTimeField w_bar;
    SpaceTimeField u_bar;          // supported in the control mask
    std::vector<double> terminal;  // w_bar(T, .)
    double residual = 0.0;         // discrete semilinear residual of the pair
};

// Forward-solves the semilinear system driven by u_profile (must vanish off
// the control mask) and returns the trajectory with its terminal slice.
TargetTrajectory make_target_trajectory(const ProblemSpec& spec, const Grid& grid,
                                        const SpaceTimeField& u_profile,
                                        const SpaceFn& w0_target,
                                        SemiMode mode = SemiMode::Newton);

struct LinearizedCoefficients {
    std::vector<double> b_add;  // (nt x nx): dg/dxi2 (x, w_bar, d1 w_bar)
    std::vector<double> c_add;  // (nt x nx): dg/dxi1 (x, w_bar, d1 w_bar)
};

LinearizedCoefficients linearized_coefficients(const TargetTrajectory& traj,
                                               const Nonlinearity& n, const Grid& grid);

struct PicardHistoryRow {
    int iterate = 0;
    double terminal_error = 0.0;
    double remainder_norm = 0.0;
    int inner_cg_iters = 0;
};

struct TrajectoryControlResult {
    SpaceTimeField w;        // combined state w_bar + y
    SpaceTimeField u;        // combined control u_bar + last increment
    std::vector<PicardHistoryRow> history;
    bool converged = false;
    double terminal_error = 0.0;
    double semilinear_residual = 0.0;  // of (w, u) in the discrete system
    ControlSolution last_inner;        // last linearized solve
};

// Quasi-linearized Picard loop for controllability to the trajectory: each
// iterate solves the penalized control problem for the operator linearized
// at w_bar, feeding the previous iterate's nonlinear remainder back in as a
// bulk source. Stops when |y(T)|_{L2} <= tol or after max_iters; throws
// SolverError when the terminal error grows three times in a row.
TrajectoryControlResult solve_trajectory_control(const ProblemSpec& spec,
                                                 const Grid& grid,
                                                 const WeightSystem& ws,
                                                 const TargetTrajectory& traj,
                                                 const SpaceFn& w0, double epsilon,
                                                 int max_iters, double tol,
                                                 const ControlOptions& opt = {});

// Smooth preset control bump supported in the control window.
SpaceTimeField bump_control_profile(const Grid& grid, double amplitude);

}  // namespace ficon
