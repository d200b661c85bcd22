#include "ficon/trajectory.hpp"

#include <cmath>

namespace ficon {

namespace {

// Central in-subdomain first difference used by the bulk rows.
double d1_bulk(const SpaceTimeField& w, const Grid& g, int k, int i) {
    return (w.at(k, i + 1) - w.at(k, i - 1)) / (2.0 * g.dx_at(i));
}

// Residual of the plain (unshifted) discrete semilinear system at (w, u):
// bulk rows and flux-jump rows, max-abs over all rows.
double semilinear_residual(const ProblemSpec& spec, const Grid& g,
                           const SpaceTimeField& w, const SpaceTimeField& u) {
    DiscreteCoefficients coef = bake_coefficients(spec, g);
    int n = g.nx(), N = g.n_steps, m = g.iface;
    double h = g.dt;
    double worst = 0.0;
    for (int k = 0; k < N; ++k) {
        int l = k + 1;
        double t_l = g.t(l), t_k = g.t(k);
        for (int i = 1; i < n - 1; ++i) {
            if (i == m) continue;
            double dx = g.dx_at(i);
            double d2 = (w.at(l, i + 1) - 2.0 * w.at(l, i) + w.at(l, i - 1)) / (dx * dx);
            double d1 = d1_bulk(w, g, l, i);
            double row = coef.rho_at(l, i) * (w.at(l, i) - w.at(k, i)) / h -
                         coef.a_at(l, i) * d2 + coef.b_at(l, i) * d1 +
                         coef.c_at(l, i) * w.at(l, i);
            if (spec.nonlinearity)
                row += spec.nonlinearity->g(t_l, g.x[i], w.at(l, i), d1);
            double f = i >= m ? spec.f_plus(t_k, g.x[i]) : spec.f_minus(t_k, g.x[i]);
            if (g.control_mask[i]) f += u.at(k, i);
            worst = std::max(worst, std::abs(row - f));
        }
        double flux = coef.a_plus0[l] * w.d1_plus(g, l) - coef.a_minus0[l] * w.d1_minus(g, l);
        double jump = flux - spec.point_mass * (w.at(l, m) - w.at(k, m)) / h - spec.r(t_k);
        worst = std::max(worst, std::abs(jump));
    }
    return worst;
}

}  // namespace

SpaceTimeField bump_control_profile(const Grid& grid, double amplitude) {
    SpaceTimeField u(grid);
    double d = grid.d_effective, b = grid.geom.b, T = grid.geom.T;
    double c = 0.5 * (d + b), w = 0.45 * (b - d);
    for (int k = 0; k < grid.n_steps; ++k) {
        double t = grid.t(k);
        double tprof = std::sin(M_PI * t / T);
        for (int i = 0; i < grid.nx(); ++i) {
            if (!grid.control_mask[i] || i == grid.nx() - 1) continue;
            double s = (grid.x[i] - c) / w;
            if (std::abs(s) < 1.0)
                u.at(k, i) = amplitude * tprof * std::exp(1.0 - 1.0 / (1.0 - s * s));
        }
    }
    return u;
}

TargetTrajectory make_target_trajectory(const ProblemSpec& spec, const Grid& grid,
                                        const SpaceTimeField& u_profile,
                                        const SpaceFn& w0_target, SemiMode mode) {
    for (int k = 0; k < grid.nt(); ++k)
        for (int i = 0; i < grid.nx(); ++i)
            if (!grid.control_mask[i] && u_profile.at(k, i) != 0.0)
                throw ConfigError("make_target_trajectory: control profile has support "
                                  "off the control mask");

    ProblemSpec s = spec;
    s.w0 = w0_target;
    // K = 0 keeps the discrete system identical to the rows of the penalized
    // control problem, so the Picard loop linearizes the exact scheme.
    ForwardOptions opt;
    opt.K = 0.0;

    TargetTrajectory traj;
    traj.w_bar = solve_semilinear_forward(s, grid, mode, opt, &u_profile);
    traj.u_bar = u_profile;
    traj.terminal.resize(grid.nx());
    for (int i = 0; i < grid.nx(); ++i)
        traj.terminal[i] = traj.w_bar.at(grid.n_steps, i);
    traj.residual = semilinear_residual(s, grid, traj.w_bar, traj.u_bar);
    return traj;
}

LinearizedCoefficients linearized_coefficients(const TargetTrajectory& traj,
                                               const Nonlinearity& n, const Grid& grid) {
    LinearizedCoefficients lc;
    size_t total = size_t(grid.nt()) * grid.nx();
    lc.b_add.assign(total, 0.0);
    lc.c_add.assign(total, 0.0);
    for (int l = 0; l < grid.nt(); ++l) {
        double t = grid.t(l);
        for (int i = 1; i < grid.nx() - 1; ++i) {
            if (i == grid.iface) continue;
            double wv = traj.w_bar.at(l, i);
            double dv = d1_bulk(traj.w_bar, grid, l, i);
            NonlinEval e = eval_nonlinearity(n, t, grid.x[i], wv, dv);
            lc.c_add[size_t(l) * grid.nx() + i] = e.dg_dxi1;
            lc.b_add[size_t(l) * grid.nx() + i] = e.dg_dxi2;
        }
    }
    return lc;
}

TrajectoryControlResult solve_trajectory_control(const ProblemSpec& spec,
                                                 const Grid& grid,
                                                 const WeightSystem& ws,
                                                 const TargetTrajectory& traj,
                                                 const SpaceFn& w0, double epsilon,
                                                 int max_iters, double tol,
                                                 const ControlOptions& opt) {
    const int n = grid.nx(), N = grid.n_steps, m = grid.iface;
    const bool linear = !spec.nonlinearity.has_value();

    ControlProblem cp;
    cp.spec = &spec;
    cp.grid = &grid;
    cp.ws = &ws;
    cp.epsilon = epsilon;
    cp.opt = opt;
    if (!linear) {
        LinearizedCoefficients lc = linearized_coefficients(traj, *spec.nonlinearity, grid);
        cp.b_overlay = std::move(lc.b_add);
        cp.c_overlay = std::move(lc.c_add);
    }
    cp.data.r.assign(N, 0.0);
    cp.data.z0.assign(n, 0.0);
    for (int i = 0; i < n; ++i) cp.data.z0[i] = w0(grid.x[i]) - traj.w_bar.at(0, i);
    cp.data.z0[0] = cp.data.z0[n - 1] = 0.0;
    cp.data.f_rows.assign(size_t(N) * n, 0.0);

    TrajectoryControlResult res;
    SpaceTimeField y(grid);  // previous iterate, starts at zero
    int grow_streak = 0;
    double prev_err = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= max_iters; ++it) {
        // Remainder of the previous iterate at the implicit level of each row.
        if (!linear) {
            const Nonlinearity& nl = *spec.nonlinearity;
            for (int k = 0; k < N; ++k) {
                int l = k + 1;
                double t_l = grid.t(l);
                for (int i = 1; i < n - 1; ++i) {
                    if (i == m) continue;
                    double wv = traj.w_bar.at(l, i);
                    double dv = d1_bulk(traj.w_bar, grid, l, i);
                    double yv = y.at(l, i);
                    double dy = d1_bulk(y, grid, l, i);
                    NonlinEval e0 = eval_nonlinearity(nl, t_l, grid.x[i], wv, dv);
                    double gfull = nl.g(t_l, grid.x[i], wv + yv, dv + dy);
                    double rem = gfull - e0.g - e0.dg_dxi1 * yv - e0.dg_dxi2 * dy;
                    cp.data.f_rows[size_t(k) * n + i] = -rem + 0.0;
                }
            }
        }
        double rem_norm = 0.0;
        for (double v : cp.data.f_rows) rem_norm = std::max(rem_norm, std::abs(v));

        ControlSolution inner = solve_penalized_control(cp);
        y = inner.z;
        double err = inner.terminal_norm;

        res.history.push_back({it, err, rem_norm, inner.cg_iters});
        res.last_inner = std::move(inner);
        res.terminal_error = err;

        if (linear) {
            res.converged = true;
            break;
        }
        if (err <= tol) {
            res.converged = true;
            break;
        }
        if (err > prev_err) {
            if (++grow_streak >= 3)
                throw SolverError("trajectory control diverged (terminal error grew "
                                  "three iterates in a row); reduce the initial "
                                  "perturbation");
        } else {
            grow_streak = 0;
        }
        prev_err = err;
    }

    // Combined state and control.
    res.w = SpaceTimeField(grid);
    for (int k = 0; k < grid.nt(); ++k)
        for (int i = 0; i < n; ++i)
            res.w.at(k, i) = traj.w_bar.at(k, i) + y.at(k, i);
    res.u = SpaceTimeField(grid);
    for (int k = 0; k < grid.nt(); ++k)
        for (int i = 0; i < n; ++i)
            res.u.at(k, i) = traj.u_bar.at(k, i) + res.last_inner.u.at(k, i);
    res.semilinear_residual = semilinear_residual(spec, grid, res.w, res.u);
    return res;
}

}  // namespace ficon
