#include "ficon/hum.hpp"

#include <cmath>
#include <future>
#include <sstream>

namespace ficon {

void ControlProblem::validate() const {
    if (!spec || !grid || !ws) throw ConfigError("ControlProblem: missing spec/grid/ws");
    if (!(epsilon > 0.0)) throw ConfigError("ControlProblem: epsilon must be positive");
    if (!spec->is_linear() && b_overlay.empty() && c_overlay.empty())
        throw ConfigError("ControlProblem: nonlinear spec requires linearized overlays");
}

std::string OptimalityReport::summary() const {
    std::ostringstream os;
    os << (ok ? "optimality OK" : "optimality FAILED");
    for (const auto& [k, v] : residuals) os << "  " << k << "=" << v;
    return os.str();
}

namespace {

// Weight values above this cap act as exact constraints: the dof is pinned
// to zero instead of carrying an astronomically weighted quadratic term.
// The pinned optimum differs from the soft one by < cap^-1 * penalty scale,
// far below every tolerance in use, and the arithmetic stays in range.
constexpr double kWeightCap = 1e19;

// ---------------------------------------------------------------------------
// Discrete problem assembly
//
// Unknowns: z at levels 1..N on interior non-interface nodes that are not
// weight-pinned, and u at source levels on interior mask nodes that are not
// weight-pinned. The interface value is eliminated through the flux-jump
// constraint. Rows of the penalized residual are the normalized rows
// (1/a)L z - chi u - f/a at every interior non-interface node.
// ---------------------------------------------------------------------------

struct Assembled {
    const Grid* grid = nullptr;
    DiscreteCoefficients coef;
    double M = 0.0, h = 0.0, eps = 0.0;
    int N = 0, n = 0, m = 0;

    std::vector<double> f_rows;  // (N x n) f~ rows
    std::vector<double> r_k;     // (N)
    std::vector<double> z0;      // (n)

    std::vector<double> wz1, wz2;  // (nt x n) quadratic weights of J1, J2 (capped)
    std::vector<double> wrow;      // (N x n) quadrature of the penalty rows

    // Interface elimination: z^l_m = alpha_l z^{l-1}_m + sum beta z^l_{m+off} + delta_l
    static constexpr int kOff[4] = {-2, -1, 1, 2};
    std::vector<std::array<double, 4>> beta;  // per level 1..N (index l-1)
    std::vector<double> alpha_l, delta_l, s_l;

    // dof maps
    std::vector<int> zmap;           // (nt x n) -> z dof index or -1
    std::vector<int> umap;           // (N x n) -> u dof index or -1
    std::vector<std::pair<int, int>> u_list;  // dof -> (k, i)
    std::vector<double> wu;          // per u dof (capped)
    int Pz = 0, Pu = 0, P = 0;
    int pinned_z = 0, pinned_u = 0;

    size_t rid(int k, int i) const { return size_t(k) * n + i; }
    int zdof(int l, int i) const { return zmap[size_t(l) * n + i]; }
    int udof(int k, int i) const { return umap[size_t(k) * n + i]; }
};

// Row coefficient of z^l_j in the normalized PDE row (l-1, i); j-i in {-1,0,1}.
double row_coef(const Assembled& A, int l, int i, int dj) {
    double dx = A.grid->dx_at(i);
    double a = A.coef.a_at(l, i);
    if (dj == 0)
        return (A.coef.rho_at(l, i) / A.h + 2.0 * a / (dx * dx) + A.coef.c_at(l, i)) / a;
    double b = A.coef.b_at(l, i);
    if (dj == -1) return (-a / (dx * dx) - b / (2.0 * dx)) / a;
    return (-a / (dx * dx) + b / (2.0 * dx)) / a;
}

// Coefficient of the explicit (previous-level) value in row (l-1, i).
double row_coef_prev(const Assembled& A, int l, int i) {
    return -A.coef.rho_at(l, i) / (A.h * A.coef.a_at(l, i));
}

void flux_coefs(const Assembled& A, int l, double& cp, double& cm) {
    cp = A.coef.a_plus0[l] / (2.0 * A.grid->dx_plus);
    cm = A.coef.a_minus0[l] / (2.0 * A.grid->dx_minus);
}

double effective_freeze(const ControlProblem& cp) {
    // The penalty parameter tightens the terminal freeze; the grid cannot
    // resolve freezes below two time steps.
    return std::min(cp.ws->resolved_freeze(), std::max(cp.epsilon, 2.0 * cp.grid->dt));
}

Assembled assemble(const ControlProblem& cp, const WeightSystem& ws_eff) {
    const Grid& g = *cp.grid;
    Assembled A;
    A.grid = &g;
    A.coef = bake_coefficients(*cp.spec, g);
    if (!cp.b_overlay.empty() || !cp.c_overlay.empty()) {
        std::vector<double> zb(A.coef.b.size(), 0.0), zc(A.coef.c.size(), 0.0);
        add_overlay(A.coef, cp.b_overlay.empty() ? zb : cp.b_overlay,
                    cp.c_overlay.empty() ? zc : cp.c_overlay);
    }
    A.M = cp.spec->point_mass;
    A.h = g.dt;
    A.eps = cp.epsilon;
    A.N = g.n_steps;
    A.n = g.nx();
    A.m = g.iface;

    // Data rows. f~ divides by the implicit-level diffusion coefficient.
    A.f_rows.assign(size_t(A.N) * A.n, 0.0);
    A.r_k.assign(A.N, 0.0);
    A.z0.assign(A.n, 0.0);
    if (!cp.data.z0.empty()) {
        A.z0 = cp.data.z0;
    } else {
        for (int i = 0; i < A.n; ++i) A.z0[i] = cp.spec->w0(g.x[i]);
    }
    A.z0[0] = A.z0[A.n - 1] = 0.0;
    for (int k = 0; k < A.N; ++k) {
        double t = g.t(k);
        A.r_k[k] = cp.data.r.empty() ? cp.spec->r(t) : cp.data.r[k];
        for (int i = 1; i < A.n - 1; ++i) {
            if (i == A.m) continue;
            double f;
            if (!cp.data.f_rows.empty()) {
                f = cp.data.f_rows[A.rid(k, i)];
            } else {
                f = i >= A.m ? cp.spec->f_plus(t, g.x[i]) : cp.spec->f_minus(t, g.x[i]);
            }
            A.f_rows[A.rid(k, i)] = f / A.coef.a_at(k + 1, i);
        }
    }

    // Quadratic weights (capped) and pin marks.
    A.wz1.assign(size_t(g.nt()) * A.n, 0.0);
    A.wz2.assign(size_t(g.nt()) * A.n, 0.0);
    A.wrow.assign(size_t(A.N) * A.n, 0.0);
    std::vector<std::uint8_t> pin_z(size_t(g.nt()) * A.n, 0);
    for (int k = 0; k < g.nt(); ++k) {
        double t = g.t(k);
        double tw = g.time_weight(k);
        for (int i = 0; i < A.n; ++i) {
            double x1 = g.x[i];
            double raw = 0.0;
            if (i >= A.m) {
                double jz = ws_eff.jz_weight_plus(t, x1);
                raw = std::max(raw, jz);
                double sw = i == A.m ? 0.5 * g.dx_plus : g.wq[i];
                A.wz1[size_t(k) * A.n + i] = tw * sw * std::min(jz, kWeightCap);
            }
            if (i <= A.m) {
                double jz = ws_eff.jz_weight_minus(t, x1);
                raw = std::max(raw, jz);
                double sw = i == A.m ? 0.5 * g.dx_minus : g.wq[i];
                A.wz2[size_t(k) * A.n + i] = tw * sw * std::min(jz, kWeightCap);
            }
            if (raw >= kWeightCap) pin_z[size_t(k) * A.n + i] = 1;
        }
    }
    for (int k = 0; k < A.N; ++k)
        for (int i = 1; i < A.n - 1; ++i)
            if (i != A.m) A.wrow[A.rid(k, i)] = A.h * g.wq[i];

    // Interface elimination coefficients.
    A.beta.resize(A.N);
    A.alpha_l.resize(A.N + 1, 0.0);
    A.delta_l.resize(A.N + 1, 0.0);
    A.s_l.resize(A.N + 1, 0.0);
    for (int l = 1; l <= A.N; ++l) {
        double cpv, cmv;
        flux_coefs(A, l, cpv, cmv);
        double s = 3.0 * cpv + 3.0 * cmv + A.M / A.h;
        A.s_l[l] = s;
        A.alpha_l[l] = (A.M / A.h) / s;
        A.delta_l[l] = -A.r_k[l - 1] / s;
        A.beta[l - 1] = {-cmv / s, 4.0 * cmv / s, 4.0 * cpv / s, -cpv / s};
    }

    // dof maps: pinned dofs stay out of the unknown vector (their value is 0).
    A.zmap.assign(size_t(g.nt()) * A.n, -1);
    for (int l = 1; l <= A.N; ++l)
        for (int i = 1; i < A.n - 1; ++i) {
            if (i == A.m) continue;
            if (pin_z[size_t(l) * A.n + i]) {
                ++A.pinned_z;
                continue;
            }
            A.zmap[size_t(l) * A.n + i] = A.Pz++;
        }

    A.umap.assign(size_t(A.N) * A.n, -1);
    const WeightSystem& ws = *cp.ws;
    for (int k = 0; k < A.N; ++k) {
        double t = g.t(k);
        for (int i = g.ictrl; i < A.n - 1; ++i) {
            double ju = ws.ju_weight(t, g.x[i]);
            if (ju >= kWeightCap) {
                ++A.pinned_u;
                continue;
            }
            A.umap[A.rid(k, i)] = A.Pz + static_cast<int>(A.u_list.size());
            A.u_list.emplace_back(k, i);
            A.wu.push_back(A.h * g.wq[i] * ju);
        }
    }
    A.Pu = static_cast<int>(A.u_list.size());
    A.P = A.Pz + A.Pu;
    return A;
}

// Expands dof vector -> full space-time state. affine=false drops the data
// (z0, r) contributions, giving the linear part of the map.
void expand_state(const Assembled& A, const std::vector<double>& v, bool affine,
                  SpaceTimeField& z) {
    const int n = A.n, m = A.m;
    z.nt = A.N + 1;
    z.nx = n;
    z.v.assign(size_t(A.N + 1) * n, 0.0);
    if (affine)
        for (int i = 0; i < n; ++i) z.at(0, i) = A.z0[i];
    for (int l = 1; l <= A.N; ++l) {
        for (int i = 1; i < n - 1; ++i) {
            int d = A.zdof(l, i);
            if (d >= 0) z.at(l, i) = v[d];
        }
        double zm = A.alpha_l[l] * z.at(l - 1, m);
        for (int j = 0; j < 4; ++j) zm += A.beta[l - 1][j] * z.at(l, m + Assembled::kOff[j]);
        if (affine) zm += A.delta_l[l];
        z.at(l, m) = zm;
    }
}

// Transpose of the linear part of expand_state.
void expand_state_adjoint(const Assembled& A, SpaceTimeField& gz,
                          std::vector<double>& gv) {
    const int m = A.m;
    for (int l = A.N; l >= 1; --l) {
        double gm = gz.at(l, m);
        gz.at(l - 1, m) += A.alpha_l[l] * gm;
        for (int j = 0; j < 4; ++j) gz.at(l, m + Assembled::kOff[j]) += A.beta[l - 1][j] * gm;
        for (int i = 1; i < A.n - 1; ++i) {
            int d = A.zdof(l, i);
            if (d >= 0) gv[d] += gz.at(l, i);
        }
    }
}

// Penalty residual rows (1/a)L z - chi u - f~ (f~ only when affine).
void compute_residual(const Assembled& A, const SpaceTimeField& z,
                      const std::vector<double>& v, bool affine,
                      std::vector<double>& resid) {
    resid.assign(size_t(A.N) * A.n, 0.0);
    for (int k = 0; k < A.N; ++k) {
        int l = k + 1;
        for (int i = 1; i < A.n - 1; ++i) {
            if (i == A.m) continue;
            double row = row_coef(A, l, i, -1) * z.at(l, i - 1) +
                         row_coef(A, l, i, 0) * z.at(l, i) +
                         row_coef(A, l, i, 1) * z.at(l, i + 1) +
                         row_coef_prev(A, l, i) * z.at(k, i);
            int ud = A.udof(k, i);
            if (ud >= 0) row -= v[ud];
            if (affine) row -= A.f_rows[A.rid(k, i)];
            resid[A.rid(k, i)] = row;
        }
    }
}

struct Work {
    SpaceTimeField z, gz;
    std::vector<double> resid;
};

// Half-gradient sum_j G_j^T s_j(v): H*v = halfgrad(v,false), b = -halfgrad(0,true).
void half_gradient(const Assembled& A, const std::vector<double>& v, bool affine,
                   Work& w, std::vector<double>& out) {
    expand_state(A, v, affine, w.z);
    compute_residual(A, w.z, v, affine, w.resid);

    w.gz.nt = A.N + 1;
    w.gz.nx = A.n;
    w.gz.v.assign(size_t(A.N + 1) * A.n, 0.0);
    out.assign(A.P, 0.0);

    const double inv_eps = 1.0 / A.eps;
    for (int k = 0; k <= A.N; ++k)
        for (int i = 0; i < A.n; ++i) {
            size_t id = size_t(k) * A.n + i;
            w.gz.at(k, i) = (A.wz1[id] + A.wz2[id]) * w.z.at(k, i);
        }
    for (int k = 0; k < A.N; ++k) {
        int l = k + 1;
        for (int i = 1; i < A.n - 1; ++i) {
            if (i == A.m) continue;
            double c = inv_eps * A.wrow[A.rid(k, i)] * w.resid[A.rid(k, i)];
            if (c == 0.0) continue;
            w.gz.at(l, i - 1) += c * row_coef(A, l, i, -1);
            w.gz.at(l, i) += c * row_coef(A, l, i, 0);
            w.gz.at(l, i + 1) += c * row_coef(A, l, i, 1);
            w.gz.at(k, i) += c * row_coef_prev(A, l, i);
        }
    }
    for (int d = 0; d < A.Pu; ++d) {
        auto [k, i] = A.u_list[d];
        out[A.Pz + d] = A.wu[d] * v[A.Pz + d] -
                        inv_eps * A.wrow[A.rid(k, i)] * w.resid[A.rid(k, i)];
    }
    expand_state_adjoint(A, w.gz, out);
}

// ---------------------------------------------------------------------------
// Preconditioners
// ---------------------------------------------------------------------------

struct DenseLU {
    int n = 0;
    std::vector<double> a;
    std::vector<int> piv;

    void factor(std::vector<double> mat, int nn) {
        n = nn;
        a = std::move(mat);
        piv.assign(n, 0);
        for (int k = 0; k < n; ++k) {
            int ip = k;
            for (int i = k + 1; i < n; ++i)
                if (std::abs(a[size_t(i) * n + k]) > std::abs(a[size_t(ip) * n + k])) ip = i;
            piv[k] = ip;
            if (ip != k)
                for (int j = 0; j < n; ++j)
                    std::swap(a[size_t(k) * n + j], a[size_t(ip) * n + j]);
            double p = a[size_t(k) * n + k];
            if (p == 0.0 || !std::isfinite(p))
                throw SolverError("preconditioner block factorization hit a zero pivot");
            for (int i = k + 1; i < n; ++i) {
                double mfac = a[size_t(i) * n + k] / p;
                a[size_t(i) * n + k] = mfac;
                for (int j = k + 1; j < n; ++j)
                    a[size_t(i) * n + j] -= mfac * a[size_t(k) * n + j];
            }
        }
    }

    void solve(std::vector<double>& b) const {
        // Full-row pivoting in factor() pairs with applying every swap
        // before the substitution sweeps.
        for (int k = 0; k < n; ++k)
            if (piv[k] != k) std::swap(b[k], b[piv[k]]);
        for (int k = 0; k < n; ++k)
            for (int i = k + 1; i < n; ++i) b[i] -= a[size_t(i) * n + k] * b[k];
        for (int k = n - 1; k >= 0; --k) {
            for (int j = k + 1; j < n; ++j) b[k] -= a[size_t(k) * n + j] * b[j];
            b[k] /= a[size_t(k) * n + k];
        }
    }
};

// Exact inverse of the z-block of H (reduced through the interface chain),
// realized as a block-tridiagonal KKT factorization over time levels. Each
// level holds [live z dofs, interface value, flux-row multiplier]; the
// flux-jump constraint appears as a symmetric border, so no chain expansion
// is needed and the block couplings stay one level wide.
struct ZBlockPrecond {
    ZBlockPrecond(const Assembled& A) : A_(A) {
        loc_.assign(size_t(A.N + 1) * A.n, -1);
        nb_.assign(A.N + 1, 0);
        for (int l = 1; l <= A.N; ++l) {
            int c = 0;
            for (int i = 1; i < A.n - 1; ++i)
                if (A.zdof(l, i) >= 0) loc_[size_t(l) * A.n + i] = c++;
            loc_m_.push_back(c);
            loc_[size_t(l) * A.n + A.m] = c;
            nb_[l] = c + 2;  // + interface value + multiplier
        }
        assemble_and_factor();
    }

    // x = M^{-1} r on the z dofs (r given in dof numbering).
    void apply(const std::vector<double>& r, std::vector<double>& x) const {
        int N = A_.N;
        std::vector<std::vector<double>> c(N + 1);
        for (int l = 1; l <= N; ++l) {
            std::vector<double> y(nb_[l], 0.0);
            for (int i = 1; i < A_.n - 1; ++i) {
                int d = A_.zdof(l, i);
                if (d >= 0) y[loc_at(l, i)] = r[d];
            }
            if (l > 1) {
                // y -= R_{l-1}^T c_{l-1}
                const auto& R = R_[l - 1];
                for (int a = 0; a < nb_[l - 1]; ++a) {
                    double ca = c[l - 1][a];
                    if (ca == 0.0) continue;
                    for (int b = 0; b < nb_[l]; ++b)
                        y[b] -= R[size_t(a) * nb_[l] + b] * ca;
                }
            }
            lu_[l].solve(y);
            c[l] = std::move(y);
        }
        std::vector<std::vector<double>> xl(N + 1);
        xl[N] = c[N];
        for (int l = N - 1; l >= 1; --l) {
            // x_l = c_l - S_l^{-1} R_l x_{l+1}
            std::vector<double> t(nb_[l], 0.0);
            const auto& R = R_[l];
            for (int a = 0; a < nb_[l]; ++a)
                for (int b = 0; b < nb_[l + 1]; ++b)
                    t[a] += R[size_t(a) * nb_[l + 1] + b] * xl[l + 1][b];
            lu_[l].solve(t);
            xl[l] = c[l];
            for (int a = 0; a < nb_[l]; ++a) xl[l][a] -= t[a];
        }
        for (int l = 1; l <= N; ++l)
            for (int i = 1; i < A_.n - 1; ++i) {
                int d = A_.zdof(l, i);
                if (d >= 0) x[d] = xl[l][loc_at(l, i)];
            }
    }

    int loc_at(int l, int i) const { return loc_[size_t(l) * A_.n + i]; }

    void add_pair(std::vector<std::vector<double>>& D,
                  std::vector<std::vector<double>>& R, int l1, int a, int l2, int b,
                  double w) {
        if (l1 == l2) {
            D[l1][size_t(a) * nb_[l1] + b] += w;
            if (a != b) D[l1][size_t(b) * nb_[l1] + a] += w;
        } else if (l1 + 1 == l2) {
            R[l1][size_t(a) * nb_[l2] + b] += w;
        } else {
            R[l2][size_t(b) * nb_[l1] + a] += w;
        }
    }

    void assemble_and_factor() {
        const Assembled& A = A_;
        int N = A.N;
        std::vector<std::vector<double>> D(N + 1), R(N + 1);
        for (int l = 1; l <= N; ++l) {
            D[l].assign(size_t(nb_[l]) * nb_[l], 0.0);
            if (l < N) R[l].assign(size_t(nb_[l]) * nb_[l + 1], 0.0);
        }
        const double inv_eps = 1.0 / A.eps;

        // W block (live dofs and the interface value).
        for (int l = 1; l <= N; ++l)
            for (int i = 1; i < A.n - 1; ++i) {
                int a = loc_at(l, i);
                if (a < 0) continue;
                size_t id = size_t(l) * A.n + i;
                D[l][size_t(a) * nb_[l] + a] += A.wz1[id] + A.wz2[id];
            }

        // Penalty rows.
        struct Var {
            int l, a;
            double c;
        };
        for (int k = 0; k < N; ++k) {
            int l = k + 1;
            for (int i = 1; i < A.n - 1; ++i) {
                if (i == A.m) continue;
                Var vars[4];
                int nv = 0;
                for (int dj = -1; dj <= 1; ++dj) {
                    int j = i + dj;
                    int a = (j >= 1 && j <= A.n - 2) ? loc_at(l, j) : -1;
                    if (a >= 0) vars[nv++] = {l, a, row_coef(A, l, i, dj)};
                }
                if (k >= 1) {
                    int a = loc_at(k, i);
                    if (a >= 0) vars[nv++] = {k, a, row_coef_prev(A, l, i)};
                }
                double w = inv_eps * A.wrow[A.rid(k, i)];
                for (int s = 0; s < nv; ++s)
                    for (int t = s; t < nv; ++t) {
                        if (vars[s].l <= vars[t].l)
                            add_pair(D, R, vars[s].l, vars[s].a, vars[t].l, vars[t].a,
                                     w * vars[s].c * vars[t].c);
                        else
                            add_pair(D, R, vars[t].l, vars[t].a, vars[s].l, vars[s].a,
                                     w * vars[s].c * vars[t].c);
                    }
            }
        }

        // Flux-jump constraints as symmetric borders.
        for (int l = 1; l <= N; ++l) {
            int ploc = nb_[l] - 1;
            double cpv, cmv;
            flux_coefs(A, l, cpv, cmv);
            auto border = [&](int i, double cf) {
                int a = loc_at(l, i);
                if (a < 0) return;
                D[l][size_t(a) * nb_[l] + ploc] += cf;
                D[l][size_t(ploc) * nb_[l] + a] += cf;
            };
            border(A.m, -A.s_l[l]);
            border(A.m + 1, 4.0 * cpv);
            border(A.m + 2, -cpv);
            border(A.m - 1, 4.0 * cmv);
            border(A.m - 2, -cmv);
            if (l > 1) {
                int a = loc_at(l - 1, A.m);
                // coupling (z^{l-1}_m, pi_{l-1}) lives in R_{l-1}
                R[l - 1][size_t(a) * nb_[l] + ploc] += A.M / A.h;
            }
        }

        // Block-Thomas factorization.
        D_dbg_ = D;
        lu_.resize(N + 1);
        R_ = std::move(R);
        std::vector<double> S = D[1];
        lu_[1].factor(std::move(S), nb_[1]);
        for (int l = 2; l <= N; ++l) {
            // S_l = D_l - R_{l-1}^T S_{l-1}^{-1} R_{l-1}
            const auto& Rp = R_[l - 1];
            int np = nb_[l - 1], nc = nb_[l];
            std::vector<double> T(size_t(np) * nc);
            std::vector<double> col(np);
            for (int b = 0; b < nc; ++b) {
                for (int a = 0; a < np; ++a) col[a] = Rp[size_t(a) * nc + b];
                lu_[l - 1].solve(col);
                for (int a = 0; a < np; ++a) T[size_t(a) * nc + b] = col[a];
            }
            std::vector<double> Sl = D[l];
            for (int a = 0; a < nc; ++a)
                for (int b = 0; b < nc; ++b) {
                    double acc = 0.0;
                    for (int r = 0; r < np; ++r)
                        acc += Rp[size_t(r) * nc + a] * T[size_t(r) * nc + b];
                    Sl[size_t(a) * nc + b] -= acc;
                }
            lu_[l].factor(std::move(Sl), nc);
        }
    }

    const Assembled& A_;
    std::vector<std::vector<double>> D_dbg_;
    std::vector<int> loc_;
    std::vector<int> loc_m_;
    std::vector<int> nb_;
    std::vector<DenseLU> lu_;
    std::vector<std::vector<double>> R_;
};

std::vector<double> jacobi_diag(const Assembled& A) {
    std::vector<double> d(A.P, 0.0);
    const double inv_eps = 1.0 / A.eps;
    for (int l = 1; l <= A.N; ++l) {
        int k = l - 1;
        for (int i = 1; i < A.n - 1; ++i) {
            int dof = A.zdof(l, i);
            if (dof < 0) continue;
            size_t id = size_t(l) * A.n + i;
            double acc = A.wz1[id] + A.wz2[id];
            acc += inv_eps * A.wrow[A.rid(k, i)] * row_coef(A, l, i, 0) * row_coef(A, l, i, 0);
            for (int dj : {-1, 1}) {
                int jn = i + dj;
                if (jn <= 0 || jn >= A.n - 1 || jn == A.m) continue;
                double cf = row_coef(A, l, jn, -dj);
                acc += inv_eps * A.wrow[A.rid(k, jn)] * cf * cf;
            }
            if (l < A.N)
                acc += inv_eps * A.wrow[A.rid(l, i)] * row_coef_prev(A, l + 1, i) *
                       row_coef_prev(A, l + 1, i);
            int dist = i - A.m;
            if (dist >= -2 && dist <= 2 && dist != 0) {
                int j = dist < 0 ? dist + 2 : dist + 1;
                double bta = A.beta[l - 1][j];
                size_t idm = size_t(l) * A.n + A.m;
                acc += bta * bta * (A.wz1[idm] + A.wz2[idm]);
            }
            d[dof] = acc;
        }
    }
    for (int dd = 0; dd < A.Pu; ++dd) {
        auto [k, i] = A.u_list[dd];
        d[A.Pz + dd] = A.wu[dd] + inv_eps * A.wrow[A.rid(k, i)];
    }
    for (double& v : d) v = std::max(v, 1e-300);
    return d;
}

struct CgResult {
    std::vector<double> x;
    int iters = 0;
    double relres = 0.0;
    double b_norm = 0.0;
};

CgResult conjugate_gradient(const Assembled& A, const std::vector<double>& b,
                            const ControlOptions& opt) {
    CgResult res;
    res.x.assign(A.P, 0.0);
    double bnorm2 = 0.0;
    for (double v : b) bnorm2 += v * v;
    res.b_norm = std::sqrt(bnorm2);
    if (bnorm2 == 0.0) return res;

    std::vector<double> dinv;
    std::unique_ptr<ZBlockPrecond> zprec;
    std::vector<double> udiag;
    if (opt.precond == PrecondKind::Jacobi) {
        auto d = jacobi_diag(A);
        dinv.resize(A.P);
        for (int i = 0; i < A.P; ++i) dinv[i] = 1.0 / d[i];
    } else if (opt.precond == PrecondKind::Block) {
        zprec = std::make_unique<ZBlockPrecond>(A);
        auto d = jacobi_diag(A);
        udiag.assign(d.begin() + A.Pz, d.end());
    }

    auto apply_precond = [&](const std::vector<double>& r, std::vector<double>& z) {
        if (opt.precond == PrecondKind::None) {
            z = r;
        } else if (opt.precond == PrecondKind::Jacobi) {
            z.resize(A.P);
            for (int i = 0; i < A.P; ++i) z[i] = dinv[i] * r[i];
        } else {
            z.assign(A.P, 0.0);
            zprec->apply(r, z);
            for (int i = 0; i < A.Pu; ++i) z[A.Pz + i] = r[A.Pz + i] / udiag[i];
        }
    };

    Work w;
    std::vector<double> r = b, zv, p, q;
    apply_precond(r, zv);
    p = zv;
    double rz = 0.0;
    for (int i = 0; i < A.P; ++i) rz += r[i] * zv[i];

    int max_iters = static_cast<int>(std::ceil(opt.cg_maxiter_factor * std::sqrt(double(A.P))));
    double relres = 1.0;
    int it = 0;
    for (; it < max_iters; ++it) {
        half_gradient(A, p, false, w, q);
        double pq = 0.0;
        for (int i = 0; i < A.P; ++i) pq += p[i] * q[i];
        if (!(pq > 0.0))
            throw SolverError("CG: operator lost positive definiteness (p^T H p = " +
                              std::to_string(pq) + ")");
        double alpha = rz / pq;
        double rn2 = 0.0;
        for (int i = 0; i < A.P; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            rn2 += r[i] * r[i];
        }
        relres = std::sqrt(rn2 / bnorm2);
        if (relres <= opt.cg_tol) {
            ++it;
            break;
        }
        apply_precond(r, zv);
        double rz_new = 0.0;
        for (int i = 0; i < A.P; ++i) rz_new += r[i] * zv[i];
        double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < A.P; ++i) p[i] = zv[i] + beta * p[i];
    }
    res.iters = it;
    res.relres = relres;
    if (relres > opt.cg_tol)
        throw SolverError("CG did not reach tolerance " + std::to_string(opt.cg_tol) +
                          " within " + std::to_string(max_iters) + " iterations " +
                          "(relative residual " + std::to_string(relres) +
                          "); the normal equations are badly conditioned - "
                          "consider a larger epsilon or a coarser grid");
    return res;
}

// Multiplier recovery: pi from the stationarity rows of the eliminated
// interface values (triangular backward in time), sigma from level 0.
void recover_multipliers(const Assembled& A, const SpaceTimeField& z,
                         const std::vector<double>& q, std::vector<double>& pi,
                         std::vector<double>& sigma) {
    pi.assign(A.N, 0.0);
    sigma.assign(A.n, 0.0);
    double pinext = 0.0;
    for (int l = A.N; l >= 1; --l) {
        int k = l - 1;
        size_t id = size_t(l) * A.n + A.m;
        double grad = 2.0 * (A.wz1[id] + A.wz2[id]) * z.at(l, A.m);
        for (int dj : {-1, 1}) {
            int i = A.m + dj;
            grad += 2.0 * A.wrow[A.rid(k, i)] * q[A.rid(k, i)] * row_coef(A, l, i, -dj);
        }
        // -s_l pi_{l-1} + (M/h) pi_l + grad = 0
        pi[l - 1] = (grad + (A.M / A.h) * pinext) / A.s_l[l];
        pinext = pi[l - 1];
    }
    for (int i = 1; i < A.n - 1; ++i) {
        size_t id = i;  // level 0
        double grad = 2.0 * (A.wz1[id] + A.wz2[id]) * z.at(0, i);
        if (i != A.m)
            grad += 2.0 * A.wrow[A.rid(0, i)] * q[A.rid(0, i)] * row_coef_prev(A, 1, i);
        if (i == A.m) grad += pi[0] * (A.M / A.h);
        sigma[i] = -grad;
    }
}

}  // namespace

ControlSolution solve_penalized_control(const ControlProblem& cp) {
    cp.validate();
    const Grid& g = *cp.grid;
    WeightSystem ws_eff = cp.ws->with_freeze(effective_freeze(cp));
    Assembled A = assemble(cp, ws_eff);

    Work w;
    std::vector<double> zero(A.P, 0.0), b;
    half_gradient(A, zero, true, w, b);
    for (double& v : b) v = -v;

    CgResult cg = conjugate_gradient(A, b, cp.opt);

    ControlSolution sol;
    sol.effective_freeze = ws_eff.resolved_freeze();
    sol.cg_iters = cg.iters;
    sol.cg_relres = cg.relres;
    sol.b_norm = cg.b_norm;
    sol.pinned_z = A.pinned_z;
    sol.pinned_u = A.pinned_u;

    expand_state(A, cg.x, true, sol.z);
    sol.u = SpaceTimeField(g);
    for (int d = 0; d < A.Pu; ++d) {
        auto [k, i] = A.u_list[d];
        sol.u.at(k, i) = cg.x[A.Pz + d];
    }

    std::vector<double> resid;
    compute_residual(A, sol.z, cg.x, true, resid);

    // Multiplier field p = (1/eps) * residual on rows; terminal level zero.
    sol.p = SpaceTimeField(g);
    const double inv_eps = 1.0 / A.eps;
    std::vector<double> q(resid.size());
    for (size_t i = 0; i < resid.size(); ++i) q[i] = inv_eps * resid[i];
    for (int k = 0; k < A.N; ++k)
        for (int i = 1; i < A.n - 1; ++i)
            if (i != A.m) sol.p.at(k, i) = q[A.rid(k, i)];

    recover_multipliers(A, sol.z, q, sol.pi, sol.sigma);
    // Interface trace completion of the multiplier field.
    for (int k = 0; k < A.N; ++k) sol.p.at(k, A.m) = -sol.pi[k] / (2.0 * A.h);

    double J1 = 0.0, J2 = 0.0, J3 = 0.0, J4 = 0.0;
    for (int k = 0; k <= A.N; ++k)
        for (int i = 0; i < A.n; ++i) {
            size_t id = size_t(k) * A.n + i;
            double zz = sol.z.at(k, i) * sol.z.at(k, i);
            J1 += A.wz1[id] * zz;
            J2 += A.wz2[id] * zz;
        }
    for (int d = 0; d < A.Pu; ++d) J3 += A.wu[d] * cg.x[A.Pz + d] * cg.x[A.Pz + d];
    double res2 = 0.0;
    for (int k = 0; k < A.N; ++k)
        for (int i = 1; i < A.n - 1; ++i)
            if (i != A.m) res2 += A.wrow[A.rid(k, i)] * resid[A.rid(k, i)] * resid[A.rid(k, i)];
    J4 = inv_eps * res2;
    sol.J_terms = {J1, J2, J3, J4};
    sol.J_value = J1 + J2 + J3 + J4;
    sol.residual_pde = std::sqrt(res2);
    sol.terminal_norm = slice_norm(g, sol.z, A.N);

    std::vector<double> hg;
    half_gradient(A, cg.x, true, w, hg);
    double gn = 0.0;
    for (double v : hg) gn += v * v;
    sol.gradient_norm = std::sqrt(gn);

    return sol;
}

// ---------------------------------------------------------------------------
// Optimality checks: independent re-evaluation of the Lagrangian gradient
// ---------------------------------------------------------------------------

namespace {

struct GroupAcc {
    double max_resid = 0.0;
    double scale = 0.0;
    void add(double resid, double terms_scale) {
        max_resid = std::max(max_resid, std::abs(resid));
        scale = std::max(scale, terms_scale);
    }
    double relative() const { return scale > 0.0 ? max_resid / scale : 0.0; }
};

}  // namespace

OptimalityReport recover_adjoint_and_check(const ControlSolution& sol,
                                           const ControlProblem& cp) {
    const Grid& g = *cp.grid;
    WeightSystem ws_eff = cp.ws->with_freeze(effective_freeze(cp));
    Assembled A = assemble(cp, ws_eff);
    const int n = A.n, m = A.m, N = A.N;
    const double inv_eps = 1.0 / A.eps;

    // Residual rows recomputed directly from the returned fields.
    std::vector<double> q(size_t(N) * n, 0.0);
    for (int k = 0; k < N; ++k) {
        int l = k + 1;
        for (int i = 1; i < n - 1; ++i) {
            if (i == m) continue;
            double row = row_coef(A, l, i, -1) * sol.z.at(l, i - 1) +
                         row_coef(A, l, i, 0) * sol.z.at(l, i) +
                         row_coef(A, l, i, 1) * sol.z.at(l, i + 1) +
                         row_coef_prev(A, l, i) * sol.z.at(k, i);
            double u = g.control_mask[i] ? sol.u.at(k, i) : 0.0;
            q[A.rid(k, i)] = inv_eps * (row - u - A.f_rows[A.rid(k, i)]);
        }
    }

    std::vector<double> pi, sigma;
    recover_multipliers(A, sol.z, q, pi, sigma);

    GroupAcc adjoint_pde, control_law, terminal, iface_adj, iface_primal;

    for (int l = 1; l <= N; ++l) {
        int k = l - 1;
        for (int i = 1; i < n - 1; ++i) {
            if (i == m || A.zdof(l, i) < 0) continue;  // pinned dofs are constrained
            size_t id = size_t(l) * n + i;
            double t1 = 2.0 * (A.wz1[id] + A.wz2[id]) * sol.z.at(l, i);
            double acc = t1;
            double scale = std::abs(t1);
            for (int dj = -1; dj <= 1; ++dj) {
                int j = i + dj;  // row (k, j) touches z^l_i
                if (j <= 0 || j >= n - 1 || j == m) continue;
                double term = 2.0 * A.wrow[A.rid(k, j)] * q[A.rid(k, j)] *
                              row_coef(A, l, j, -dj);
                acc += term;
                scale += std::abs(term);
            }
            if (l < N) {
                double term = 2.0 * A.wrow[A.rid(l, i)] * q[A.rid(l, i)] *
                              row_coef_prev(A, l + 1, i);
                acc += term;
                scale += std::abs(term);
            }
            int dist = i - m;
            if (dist >= -2 && dist <= 2 && dist != 0) {
                double cpv, cmv;
                flux_coefs(A, l, cpv, cmv);
                double coef = dist == -2 ? -cmv : dist == -1 ? 4.0 * cmv
                                       : dist == 1 ? 4.0 * cpv : -cpv;
                double term = pi[l - 1] * coef;
                acc += term;
                scale += std::abs(term);
                iface_adj.add(acc, scale);
            } else if (l == N) {
                terminal.add(acc, scale);
            } else {
                adjoint_pde.add(acc, scale);
            }
        }
    }

    // Control law: wu u = wrow q on the live mask dofs.
    for (int d = 0; d < A.Pu; ++d) {
        auto [k, i] = A.u_list[d];
        double t1 = A.wu[d] * sol.u.at(k, i);
        double t2 = A.wrow[A.rid(k, i)] * q[A.rid(k, i)];
        control_law.add(t1 - t2, std::abs(t1) + std::abs(t2));
    }

    // Primal feasibility of the flux-jump rows.
    for (int l = 1; l <= N; ++l) {
        double cpv, cmv;
        flux_coefs(A, l, cpv, cmv);
        double dp = (-3.0 * sol.z.at(l, m) + 4.0 * sol.z.at(l, m + 1) - sol.z.at(l, m + 2));
        double dm = (3.0 * sol.z.at(l, m) - 4.0 * sol.z.at(l, m - 1) + sol.z.at(l, m - 2));
        double flux = cpv * dp - cmv * dm;
        double dz0 = A.M * (sol.z.at(l, m) - sol.z.at(l - 1, m)) / A.h;
        double resid = flux - dz0 - A.r_k[l - 1];
        iface_primal.add(resid, std::abs(flux) + std::abs(dz0) + std::abs(A.r_k[l - 1]));
    }

    OptimalityReport rep;
    rep.residuals["adjoint_pde"] = adjoint_pde.relative();
    rep.residuals["control_law"] = control_law.relative();
    rep.residuals["terminal_condition"] = terminal.relative();
    rep.residuals["interface_adjoint"] = iface_adj.relative();
    rep.residuals["interface_primal"] = iface_primal.relative();
    rep.ok = true;
    for (const auto& [k, v] : rep.residuals)
        if (v > rep.tolerance) rep.ok = false;
    return rep;
}

DualityReport duality_identity(const ControlSolution& sol, const ControlProblem& cp) {
    WeightSystem ws_eff = cp.ws->with_freeze(effective_freeze(cp));
    Assembled A = assemble(cp, ws_eff);

    DualityReport rep;
    rep.two_J = 2.0 * sol.J_value;

    double tf = 0.0;
    for (int k = 0; k < A.N; ++k)
        for (int i = 1; i < A.n - 1; ++i)
            if (i != A.m)
                tf += A.wrow[A.rid(k, i)] * A.f_rows[A.rid(k, i)] * sol.p.at(k, i);
    rep.term_f = -2.0 * tf;

    double ti = 0.0;
    for (int i = 0; i < A.n; ++i) ti += sol.sigma[i] * A.z0[i];
    rep.term_init = -ti;

    double tr = 0.0;
    for (int k = 0; k < A.N; ++k) tr += sol.pi[k] * A.r_k[k];
    rep.term_r = -tr;

    double rhs = rep.term_f + rep.term_init + rep.term_r;
    double scale = std::abs(rep.two_J) + std::abs(rep.term_f) + std::abs(rep.term_init) +
                   std::abs(rep.term_r) + 1e-300;
    rep.gap = std::abs(rep.two_J - rhs) / scale;
    return rep;
}

std::vector<SweepRow> epsilon_sweep(const ControlProblem& base,
                                    const std::vector<double>& epsilons) {
    std::vector<std::future<SweepRow>> futs;
    futs.reserve(epsilons.size());
    for (double eps : epsilons) {
        futs.push_back(std::async(std::launch::async, [&base, eps]() {
            SweepRow row;
            row.epsilon = eps;
            try {
                ControlProblem cp = base;
                cp.epsilon = eps;
                ControlSolution sol = solve_penalized_control(cp);
                row.terminal_norm = sol.terminal_norm;
                row.J_terms = sol.J_terms;
                row.pde_residual = sol.residual_pde;
                row.cg_iters = sol.cg_iters;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            return row;
        }));
    }
    std::vector<SweepRow> rows;
    rows.reserve(futs.size());
    for (auto& f : futs) rows.push_back(f.get());
    return rows;
}

}  // namespace ficon
