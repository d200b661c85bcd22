#include "ficon/forward.hpp"

#include <cmath>

namespace ficon {

DiscreteCoefficients bake_coefficients(const ProblemSpec& spec, const Grid& grid) {
    DiscreteCoefficients c;
    c.nt = grid.nt();
    c.nx = grid.nx();
    size_t total = size_t(c.nt) * c.nx;
    c.rho.resize(total);
    c.a.resize(total);
    c.b.resize(total);
    c.c.resize(total);
    c.a_plus0.resize(c.nt);
    c.a_minus0.resize(c.nt);
    const auto& cs = spec.coefficients;
    for (int k = 0; k < c.nt; ++k) {
        double t = grid.t(k);
        c.a_plus0[k] = cs.a_plus(t, 0.0);
        c.a_minus0[k] = cs.a_minus(t, 0.0);
        for (int i = 0; i < c.nx; ++i) {
            double x = grid.x[i];
            bool plus = i >= grid.iface;
            size_t id = size_t(k) * c.nx + i;
            c.rho[id] = plus ? cs.rho_plus(t, x) : cs.rho_minus(t, x);
            c.a[id] = plus ? cs.a_plus(t, x) : cs.a_minus(t, x);
            c.b[id] = plus ? cs.b_plus(t, x) : cs.b_minus(t, x);
            c.c[id] = plus ? cs.c_plus(t, x) : cs.c_minus(t, x);
        }
    }
    return c;
}

void add_overlay(DiscreteCoefficients& coef, const std::vector<double>& b_add,
                 const std::vector<double>& c_add) {
    if (b_add.size() != coef.b.size() || c_add.size() != coef.c.size())
        throw ConfigError("coefficient overlay shape mismatch");
    for (size_t i = 0; i < coef.b.size(); ++i) coef.b[i] += b_add[i];
    for (size_t i = 0; i < coef.c.size(); ++i) coef.c[i] += c_add[i];
}

double default_shift(const ProblemSpec& spec, const Grid& grid) {
    double max_c = 0.0, max_b = 0.0;
    const auto& cs = spec.coefficients;
    for (int k = 0; k <= 16; ++k) {
        double t = grid.geom.T * k / 16.0;
        for (int i = 0; i <= 32; ++i) {
            double xp = grid.geom.b * i / 32.0;
            double xm = grid.geom.a * i / 32.0;
            max_c = std::max({max_c, std::abs(cs.c_plus(t, xp)), std::abs(cs.c_minus(t, xm))});
            max_b = std::max({max_b, std::abs(cs.b_plus(t, xp)), std::abs(cs.b_minus(t, xm))});
        }
    }
    return 1.0 + max_c + max_b * max_b / (2.0 * spec.coefficients.alpha);
}

namespace {

// Fills the band matrix for the implicit step solving level `lev` of the
// shifted variable; coefficients at time level lev.
void fill_step_matrix(BandMatrix& A, const DiscreteCoefficients& coef,
                      const Grid& grid, double M, double K, int lev,
                      bool physical_flux) {
    int n = grid.nx();
    int m = grid.iface;
    double h = grid.dt;

    A.at(0, 0) = 1.0;
    A.at(n - 1, n - 1) = 1.0;
    for (int i = 1; i < n - 1; ++i) {
        if (i == m) continue;
        double dx = grid.dx_at(i);
        double rho = coef.rho_at(lev, i);
        double a = coef.a_at(lev, i);
        double b = coef.b_at(lev, i);
        double c = coef.c_at(lev, i);
        // The exponential change of variables w = z e^{K x0} turns rho d0 w
        // into rho (d0 z + K z), so the shift enters the row as K*rho.
        A.at(i, i - 1) = -a / (dx * dx) - b / (2.0 * dx);
        A.at(i, i) = rho / h + 2.0 * a / (dx * dx) + c + K * rho;
        A.at(i, i + 1) = -a / (dx * dx) + b / (2.0 * dx);
    }
    double ap = physical_flux ? coef.a_plus0[lev] : 1.0;
    double am = physical_flux ? coef.a_minus0[lev] : 1.0;
    double cp = ap / (2.0 * grid.dx_plus);
    double cm = am / (2.0 * grid.dx_minus);
    A.at(m, m) = -3.0 * cp - 3.0 * cm - M / h - M * K;
    A.at(m, m + 1) = 4.0 * cp;
    A.at(m, m + 2) = -cp;
    A.at(m, m - 1) = 4.0 * cm;
    A.at(m, m - 2) = -cm;
}

}  // namespace

StepSystem assemble_step_system(const ProblemSpec& spec, const Grid& grid, double K,
                                int level, const ForwardOptions& opt) {
    if (level < 1 || level > grid.n_steps)
        throw ConfigError("assemble_step_system: level out of range");
    DiscreteCoefficients coef = bake_coefficients(spec, grid);
    StepSystem s{BandMatrix(grid.nx(), 2, 2), level, K, 0.0};
    fill_step_matrix(s.matrix, coef, grid, spec.point_mass, K, level,
                     opt.physical_flux);
    s.dominance_margin = s.matrix.dominance_margin();
    return s;
}

SpaceTimeField rothe_solve(const DiscreteCoefficients& coef, const Grid& grid,
                           double M, double K, const RotheData& data,
                           const ForwardOptions& opt) {
    int n = grid.nx();
    int N = grid.n_steps;
    int m = grid.iface;
    double h = grid.dt;

    SpaceTimeField z(grid);
    for (int i = 0; i < n; ++i) z.at(0, i) = data.z0[i];

    std::vector<double> rhs(n);
    for (int k = 0; k < N; ++k) {
        int lev = k + 1;
        BandMatrix A(n, 2, 2);
        fill_step_matrix(A, coef, grid, M, K, lev, opt.physical_flux);
        A.factor();

        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        for (int i = 1; i < n - 1; ++i) {
            if (i == m) continue;
            rhs[i] = data.g[size_t(k) * n + i] + coef.rho_at(lev, i) / h * z.at(k, i);
        }
        rhs[m] = data.p[k] - (M / h) * z.at(k, m);
        A.solve(rhs);
        for (int i = 0; i < n; ++i) z.at(lev, i) = rhs[i];
    }
    return z;
}

namespace {

RotheData shifted_data(const ProblemSpec& spec, const Grid& grid, double K,
                       const SpaceTimeField* control) {
    int n = grid.nx();
    int N = grid.n_steps;
    RotheData d;
    d.g.assign(size_t(N) * n, 0.0);
    d.p.assign(N, 0.0);
    d.z0.assign(n, 0.0);
    for (int i = 0; i < n; ++i) d.z0[i] = spec.w0(grid.x[i]);
    d.z0[0] = 0.0;
    d.z0[n - 1] = 0.0;
    for (int k = 0; k < N; ++k) {
        double t = grid.t(k);
        double shift = std::exp(-K * t);
        d.p[k] = shift * spec.r(t);
        for (int i = 1; i < n - 1; ++i) {
            double f = i >= grid.iface ? spec.f_plus(t, grid.x[i])
                                       : spec.f_minus(t, grid.x[i]);
            if (control && grid.control_mask[i]) f += control->at(k, i);
            d.g[size_t(k) * n + i] = shift * f;
        }
    }
    return d;
}

SpaceTimeField unshift(const Grid& grid, const SpaceTimeField& z, double K) {
    SpaceTimeField w(grid);
    for (int k = 0; k < grid.nt(); ++k) {
        double s = std::exp(K * grid.t(k));
        for (int i = 0; i < grid.nx(); ++i) w.at(k, i) = s * z.at(k, i);
    }
    return w;
}

double d1_row(const SpaceTimeField& z, const Grid& grid, int k, int i) {
    double dx = grid.dx_at(i);
    return (z.at(k, i + 1) - z.at(k, i - 1)) / (2.0 * dx);
}

}  // namespace

SpaceTimeField solve_linear_forward(const ProblemSpec& spec, const Grid& grid,
                                    const ForwardOptions& opt,
                                    const SpaceTimeField* control) {
    double K = std::isnan(opt.K) ? default_shift(spec, grid) : opt.K;
    DiscreteCoefficients coef = bake_coefficients(spec, grid);
    RotheData data = shifted_data(spec, grid, K, control);
    SpaceTimeField z = rothe_solve(coef, grid, spec.point_mass, K, data, opt);
    return unshift(grid, z, K);
}

SpaceTimeField solve_semilinear_forward(const ProblemSpec& spec, const Grid& grid,
                                        SemiMode mode, const ForwardOptions& opt,
                                        const SpaceTimeField* control) {
    if (!spec.nonlinearity) return solve_linear_forward(spec, grid, opt, control);
    const Nonlinearity& nl = *spec.nonlinearity;

    double K = std::isnan(opt.K) ? default_shift(spec, grid) : opt.K;
    DiscreteCoefficients coef = bake_coefficients(spec, grid);
    RotheData data = shifted_data(spec, grid, K, control);

    int n = grid.nx();
    int N = grid.n_steps;
    int m = grid.iface;
    double h = grid.dt;
    double M = spec.point_mass;

    SpaceTimeField z(grid);
    for (int i = 0; i < n; ++i) z.at(0, i) = data.z0[i];

    std::vector<double> rhs(n), znew(n), resid(n);
    for (int k = 0; k < N; ++k) {
        int lev = k + 1;
        double t_lev = grid.t(lev);
        double t_src = grid.t(k);

        if (mode == SemiMode::SemiImplicit) {
            BandMatrix A(n, 2, 2);
            fill_step_matrix(A, coef, grid, M, K, lev, opt.physical_flux);
            A.factor();
            rhs[0] = rhs[n - 1] = 0.0;
            double es = std::exp(K * t_src);
            double esi = std::exp(-K * t_src);
            for (int i = 1; i < n - 1; ++i) {
                if (i == m) continue;
                double w = z.at(k, i) * es;
                double dw = d1_row(z, grid, k, i) * es;
                double gnl = nl.g(t_src, grid.x[i], w, dw);
                rhs[i] = data.g[size_t(k) * n + i] - esi * gnl +
                         coef.rho_at(lev, i) / h * z.at(k, i);
            }
            rhs[m] = data.p[k] - (M / h) * z.at(k, m);
            A.solve(rhs);
            double mx = 0.0;
            for (int i = 0; i < n; ++i) {
                z.at(lev, i) = rhs[i];
                mx = std::max(mx, std::abs(rhs[i]));
            }
            if (mx > 1e10) throw SolverError("nonlinear instability, reduce dt");
            continue;
        }

        // Newton on the implicit step; nonlinearity sampled at the new level.
        for (int i = 0; i < n; ++i) znew[i] = z.at(k, i);
        znew[0] = znew[n - 1] = 0.0;
        double es = std::exp(K * t_lev);
        double esi = std::exp(-K * t_lev);
        bool converged = false;
        double rnorm = 0.0;
        for (int it = 0; it < opt.newton_max_iter; ++it) {
            BandMatrix A(n, 2, 2);
            fill_step_matrix(A, coef, grid, M, K, lev, opt.physical_flux);

            resid[0] = znew[0];
            resid[n - 1] = znew[n - 1];
            double scale = 1.0;
            for (int i = 1; i < n - 1; ++i) {
                if (i == m) continue;
                double dx = grid.dx_at(i);
                double d2 = (znew[i + 1] - 2.0 * znew[i] + znew[i - 1]) / (dx * dx);
                double d1 = (znew[i + 1] - znew[i - 1]) / (2.0 * dx);
                double lin = coef.rho_at(lev, i) * (znew[i] - z.at(k, i)) / h -
                             coef.a_at(lev, i) * d2 + coef.b_at(lev, i) * d1 +
                             (coef.c_at(lev, i) + K * coef.rho_at(lev, i)) * znew[i];
                double w = znew[i] * es;
                double dw = d1 * es;
                NonlinEval ge = eval_nonlinearity(nl, t_lev, grid.x[i], w, dw);
                resid[i] = lin + esi * ge.g - data.g[size_t(k) * n + i];
                A.at(i, i) += ge.dg_dxi1;
                A.at(i, i - 1) += -ge.dg_dxi2 / (2.0 * dx);
                A.at(i, i + 1) += ge.dg_dxi2 / (2.0 * dx);
                scale = std::max(scale, std::abs(znew[i]));
            }
            double dp = (-3.0 * znew[m] + 4.0 * znew[m + 1] - znew[m + 2]) /
                        (2.0 * grid.dx_plus);
            double dm = (3.0 * znew[m] - 4.0 * znew[m - 1] + znew[m - 2]) /
                        (2.0 * grid.dx_minus);
            double ap = opt.physical_flux ? coef.a_plus0[lev] : 1.0;
            double am = opt.physical_flux ? coef.a_minus0[lev] : 1.0;
            resid[m] = ap * dp - am * dm - (M / h) * (znew[m] - z.at(k, m)) -
                       M * K * znew[m] - data.p[k];

            rnorm = 0.0;
            for (int i = 0; i < n; ++i) rnorm = std::max(rnorm, std::abs(resid[i]));
            if (rnorm <= opt.newton_tol * scale) {
                converged = true;
                break;
            }
            A.factor();
            A.solve(resid);
            for (int i = 0; i < n; ++i) znew[i] -= resid[i];
        }
        if (!converged)
            throw SolverError("Newton did not converge at step " + std::to_string(lev) +
                              ", final residual " + std::to_string(rnorm));
        for (int i = 0; i < n; ++i) z.at(lev, i) = znew[i];
    }
    return unshift(grid, z, K);
}

SpaceTimeField solve_adjoint_backward(const ProblemSpec& spec, const Grid& grid,
                                      const SpaceFn& terminal,
                                      const SpaceTimeFn& f_plus,
                                      const SpaceTimeFn& f_minus, const TimeFn& r_tilde,
                                      const ForwardOptions& opt) {
    double T = grid.geom.T;
    if (std::abs(terminal(grid.geom.a)) > 1e-12 || std::abs(terminal(grid.geom.b)) > 1e-12)
        throw ConfigError("solve_adjoint_backward: terminal state must vanish at a and b");

    ProblemSpec rev = spec;
    auto flip = [T](const SpaceTimeFn& f) {
        return SpaceTimeFn([f, T](double t, double x) { return f(T - t, x); });
    };
    rev.coefficients.rho_plus = flip(spec.coefficients.rho_plus);
    rev.coefficients.a_plus = flip(spec.coefficients.a_plus);
    rev.coefficients.b_plus = flip(spec.coefficients.b_plus);
    rev.coefficients.c_plus = flip(spec.coefficients.c_plus);
    rev.coefficients.rho_minus = flip(spec.coefficients.rho_minus);
    rev.coefficients.a_minus = flip(spec.coefficients.a_minus);
    rev.coefficients.b_minus = flip(spec.coefficients.b_minus);
    rev.coefficients.c_minus = flip(spec.coefficients.c_minus);
    rev.f_plus = flip(f_plus);
    rev.f_minus = flip(f_minus);
    rev.r = [r_tilde, T](double t) { return r_tilde(T - t); };
    rev.w0 = terminal;
    rev.nonlinearity.reset();

    SpaceTimeField vz = solve_linear_forward(rev, grid, opt);
    SpaceTimeField v(grid);
    for (int k = 0; k < grid.nt(); ++k)
        for (int i = 0; i < grid.nx(); ++i)
            v.at(k, i) = vz.at(grid.n_steps - k, i);
    return v;
}

// ---------------------------------------------------------------------------
// Discrete norms for the energy estimate
// ---------------------------------------------------------------------------

namespace {

// One-sided / central spatial derivative restricted to a subdomain.
double d1_region(const SpaceTimeField& w, int k, int i, int lo, int hi, double dx) {
    if (i == lo) return (-3.0 * w.at(k, i) + 4.0 * w.at(k, i + 1) - w.at(k, i + 2)) / (2.0 * dx);
    if (i == hi) return (3.0 * w.at(k, i) - 4.0 * w.at(k, i - 1) + w.at(k, i - 2)) / (2.0 * dx);
    return (w.at(k, i + 1) - w.at(k, i - 1)) / (2.0 * dx);
}

double d2_region(const SpaceTimeField& w, int k, int i, int lo, int hi, double dx) {
    if (i == lo)
        return (2.0 * w.at(k, i) - 5.0 * w.at(k, i + 1) + 4.0 * w.at(k, i + 2) -
                w.at(k, i + 3)) / (dx * dx);
    if (i == hi)
        return (2.0 * w.at(k, i) - 5.0 * w.at(k, i - 1) + 4.0 * w.at(k, i - 2) -
                w.at(k, i - 3)) / (dx * dx);
    return (w.at(k, i + 1) - 2.0 * w.at(k, i) + w.at(k, i - 1)) / (dx * dx);
}

double dt_field(const SpaceTimeField& w, const Grid& g, int k, int i) {
    if (k == 0) return (w.at(1, i) - w.at(0, i)) / g.dt;
    return (w.at(k, i) - w.at(k - 1, i)) / g.dt;
}

}  // namespace

double h12_norm(const SpaceTimeField& w, const Grid& grid, Region region) {
    int lo = region == Region::QPlus ? grid.iface : 0;
    int hi = region == Region::QPlus ? grid.nx() - 1 : grid.iface;
    double dx = region == Region::QPlus ? grid.dx_plus : grid.dx_minus;
    double acc = 0.0;
    for (int k = 0; k < grid.nt(); ++k) {
        double tw = grid.time_weight(k);
        for (int i = lo; i <= hi; ++i) {
            double sw = grid.wq[i];
            if (i == grid.iface)
                sw = region == Region::QPlus ? 0.5 * grid.dx_plus : 0.5 * grid.dx_minus;
            double v = w.at(k, i);
            double v0 = dt_field(w, grid, k, i);
            double v1 = d1_region(w, k, i, lo, hi, dx);
            double v2 = d2_region(w, k, i, lo, hi, dx);
            acc += tw * sw * (v * v + v0 * v0 + v1 * v1 + v2 * v2);
        }
    }
    return std::sqrt(acc);
}

double energy_estimate_check(const SpaceTimeField& w, const ProblemSpec& spec,
                             const Grid& grid) {
    double lhs = h12_norm(w, grid, Region::QPlus) + h12_norm(w, grid, Region::QMinus);
    // H^1(0,T) norm of the interface value.
    double acc = 0.0;
    int m = grid.iface;
    for (int k = 0; k < grid.nt(); ++k) {
        double v = w.at(k, m);
        double v0 = dt_field(w, grid, k, m);
        acc += grid.time_weight(k) * (v * v + v0 * v0);
    }
    lhs += std::sqrt(acc);

    SpaceTimeField f1 = eval_on_grid(grid, spec.f_plus);
    SpaceTimeField f2 = eval_on_grid(grid, spec.f_minus);
    double rhs = discrete_norm(grid, f1, Region::QPlus) +
                 discrete_norm(grid, f2, Region::QMinus);
    double racc = 0.0;
    for (int k = 0; k < grid.nt(); ++k) {
        double rv = spec.r(grid.t(k));
        racc += grid.time_weight(k) * rv * rv;
    }
    rhs += std::sqrt(racc);
    // H^1 norm of w0 from grid samples.
    SpaceTimeField w0f(1, grid.nx());
    for (int i = 0; i < grid.nx(); ++i) w0f.at(0, i) = spec.w0(grid.x[i]);
    double w0acc = 0.0;
    for (int i = 0; i < grid.nx(); ++i) {
        int lo = i <= grid.iface ? 0 : grid.iface;
        int hi = i <= grid.iface ? grid.iface : grid.nx() - 1;
        double dx = i <= grid.iface ? grid.dx_minus : grid.dx_plus;
        double v = w0f.at(0, i);
        double d = d1_region(w0f, 0, i, lo, hi, dx);
        w0acc += grid.wq[i] * (v * v + d * d);
    }
    rhs += std::sqrt(w0acc);

    if (rhs == 0.0) return 0.0;
    return lhs / rhs;
}

}  // namespace ficon
