#include "ficon/observability.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

namespace ficon {

namespace {

double psi_of(const WeightSystem& ws, ObservabilityWeight wtype, double t, double x1) {
    return wtype == ObservabilityWeight::FromPhiStar ? ws.psi_star(t, x1)
                                                     : ws.psi_star_literal(t, x1);
}

// |(T-t)^pow e^{psi} val|, 0 at t = T (the exponential wins the limit).
double weighted_value(double T, double t, double pow, double psi, double val) {
    double d = T - t;
    if (d <= 0.0 || val == 0.0) return 0.0;
    return exp_clamped(pow * std::log(d) + psi) * std::abs(val);
}

struct TermAccumulator {
    const Grid& g;
    const WeightSystem& ws;
    ObservabilityWeight wtype;
    double T;

    double volume(const SpaceTimeField& f, Region region, double pow) const {
        double acc = 0.0;
        for (int k = 0; k < g.nt(); ++k) {
            double t = g.t(k);
            double tw = g.time_weight(k);
            for (int i = 0; i < g.nx(); ++i) {
                bool in = region == Region::QPlus ? i >= g.iface : i <= g.iface;
                if (!in) continue;
                double sw = g.wq[i];
                if (i == g.iface)
                    sw = region == Region::QPlus ? 0.5 * g.dx_plus : 0.5 * g.dx_minus;
                double wv = weighted_value(T, t, pow, psi_of(ws, wtype, t, g.x[i]),
                                           f.at(k, i));
                acc += tw * sw * wv * wv;
            }
        }
        return std::sqrt(acc);
    }

    double window(const SpaceTimeField& f, double pow) const {
        double acc = 0.0;
        for (int k = 0; k < g.nt(); ++k) {
            double t = g.t(k);
            double tw = g.time_weight(k);
            for (int i = 0; i < g.nx(); ++i) {
                if (!g.control_mask[i]) continue;
                double sw = i == g.ictrl || i == g.nx() - 1 ? 0.5 * g.dx_plus : g.wq[i];
                double wv = weighted_value(T, t, pow, psi_of(ws, wtype, t, g.x[i]),
                                           f.at(k, i));
                acc += tw * sw * wv * wv;
            }
        }
        return std::sqrt(acc);
    }

    double trace(const std::vector<double>& vals, double pow) const {
        double acc = 0.0;
        for (int k = 0; k < g.nt(); ++k) {
            double t = g.t(k);
            double wv = weighted_value(T, t, pow, psi_of(ws, wtype, t, 0.0), vals[k]);
            acc += g.time_weight(k) * wv * wv;
        }
        return std::sqrt(acc);
    }
};

SpaceTimeField d1_field(const SpaceTimeField& v, const Grid& g) {
    SpaceTimeField d(g);
    int m = g.iface, n = g.nx();
    for (int k = 0; k < g.nt(); ++k) {
        for (int i = 0; i < n; ++i) {
            int lo = i <= m ? 0 : m;
            int hi = i <= m ? m : n - 1;
            double dx = i <= m ? g.dx_minus : g.dx_plus;
            double val;
            if (i == lo)
                val = (-3.0 * v.at(k, i) + 4.0 * v.at(k, i + 1) - v.at(k, i + 2)) / (2.0 * dx);
            else if (i == hi)
                val = (3.0 * v.at(k, i) - 4.0 * v.at(k, i - 1) + v.at(k, i - 2)) / (2.0 * dx);
            else
                val = (v.at(k, i + 1) - v.at(k, i - 1)) / (2.0 * dx);
            d.at(k, i) = val;
        }
    }
    return d;
}

SpaceTimeField dt_field_of(const SpaceTimeField& v, const Grid& g) {
    SpaceTimeField d(g);
    for (int k = 0; k < g.nt(); ++k)
        for (int i = 0; i < g.nx(); ++i)
            d.at(k, i) = k == 0 ? (v.at(1, i) - v.at(0, i)) / g.dt
                                : (v.at(k, i) - v.at(k - 1, i)) / g.dt;
    return d;
}

}  // namespace

ObservabilityCase observability_ratio(const ProblemSpec& spec, const Grid& grid,
                                      const WeightSystem& ws,
                                      const ObservabilityData& data,
                                      ObservabilityWeight wtype) {
    // Reject the vacuous all-zero case.
    double data_scale = 0.0;
    for (int i = 0; i < grid.nx(); ++i)
        data_scale = std::max(data_scale, std::abs(data.terminal(grid.x[i])));
    for (int k = 0; k < grid.nt(); ++k) {
        double t = grid.t(k);
        data_scale = std::max(data_scale, std::abs(data.r_tilde(t)));
        for (int i = 0; i < grid.nx(); ++i) {
            double x = grid.x[i];
            data_scale = std::max(data_scale, std::abs(x >= 0 ? data.f_plus(t, x)
                                                              : data.f_minus(t, x)));
        }
    }
    if (data_scale == 0.0)
        throw ConfigError("observability_ratio: vacuous case, all data zero");

    ObservabilityCase oc;
    oc.v = solve_adjoint_backward(spec, grid, data.terminal, data.f_plus, data.f_minus,
                                  data.r_tilde);

    SpaceTimeField dv = d1_field(oc.v, grid);
    SpaceTimeField dtv = dt_field_of(oc.v, grid);
    SpaceTimeField f1 = eval_on_grid(grid, data.f_plus);
    SpaceTimeField f2 = eval_on_grid(grid, data.f_minus);

    int m = grid.iface;
    std::vector<double> tr_v(grid.nt()), tr_dt(grid.nt()), tr_dp(grid.nt()), tr_dm(grid.nt());
    for (int k = 0; k < grid.nt(); ++k) {
        tr_v[k] = oc.v.at(k, m);
        tr_dt[k] = dtv.at(k, m);
        tr_dp[k] = oc.v.d1_plus(grid, k);
        tr_dm[k] = oc.v.d1_minus(grid, k);
    }

    TermAccumulator acc{grid, ws, wtype, grid.geom.T};
    // ((T-t)^-3)^s powers of the corollary, alpha over {(0,0),(0,1)}.
    oc.lhs_terms["v_minus"] = acc.volume(oc.v, Region::QMinus, -4.5);
    oc.lhs_terms["d1v_minus"] = acc.volume(dv, Region::QMinus, -1.5);
    oc.lhs_terms["v_plus"] = acc.volume(oc.v, Region::QPlus, -7.5);
    oc.lhs_terms["d1v_plus"] = acc.volume(dv, Region::QPlus, -4.5);
    oc.lhs_terms["trace_d1_plus"] = acc.trace(tr_dp, -4.5);
    oc.lhs_terms["trace_d1_minus"] = acc.trace(tr_dm, -1.5);
    oc.lhs_terms["trace_dt"] = acc.trace(tr_dt, -1.5);
    oc.lhs_terms["trace_v"] = acc.trace(tr_v, -7.5);

    oc.rhs_terms["f_plus"] = acc.volume(f1, Region::QPlus, -3.0);
    oc.rhs_terms["f_minus"] = acc.volume(f2, Region::QMinus, 0.0);
    std::vector<double> rvals(grid.nt());
    for (int k = 0; k < grid.nt(); ++k) rvals[k] = data.r_tilde(grid.t(k));
    oc.rhs_terms["r"] = acc.trace(rvals, -1.5);
    oc.rhs_terms["observation"] = acc.window(oc.v, -7.5);

    for (const auto& [k, v] : oc.lhs_terms) oc.lhs += v;
    for (const auto& [k, v] : oc.rhs_terms) oc.rhs += v;
    oc.ratio = oc.rhs > 0.0 ? oc.lhs / oc.rhs : 0.0;
    return oc;
}

EnsembleReport ensemble_constant(const ProblemSpec& spec, const Grid& grid,
                                 const WeightSystem& ws, int n_samples,
                                 std::uint64_t seed, ObservabilityWeight wtype,
                                 bool sweep_s_hat) {
    if (n_samples < 10)
        throw ConfigError("ensemble_constant: n_samples must be >= 10");

    EnsembleReport rep;
    rep.n_samples = n_samples;
    rep.seed = seed;

    struct Sample {
        double ratio = 0.0;
        double ratio_2s = 0.0, ratio_4s = 0.0;
        std::string error;
    };

    WeightSystem ws2 = ws.with_s_hat(2.0 * ws.params().s_hat);
    WeightSystem ws4 = ws.with_s_hat(4.0 * ws.params().s_hat);

    auto run_sample = [&](int idx) {
        Sample out;
        try {
            std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (idx + 1));
            double a = grid.geom.a, b = grid.geom.b, T = grid.geom.T;
            std::vector<double> modes(5);
            for (double& c : modes) c = uniform(rng, -1.0, 1.0);
            double ramp = uniform(rng, -1.0, 1.0);
            double rcen = uniform(rng, 0.2 * T, 0.8 * T);
            double rwid = uniform(rng, 0.1 * T, 0.3 * T);

            ObservabilityData data;
            data.terminal = [modes, a, b](double x) {
                double s = 0.0;
                for (size_t k = 0; k < modes.size(); ++k)
                    s += modes[k] * std::sin((k + 1) * M_PI * (x - a) / (b - a));
                return s;
            };
            data.f_plus = [](double, double) { return 0.0; };
            data.f_minus = [](double, double) { return 0.0; };
            data.r_tilde = [ramp, rcen, rwid](double t) {
                double s = (t - rcen) / rwid;
                return std::abs(s) < 1.0 ? ramp * std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
            };

            ObservabilityCase oc = observability_ratio(spec, grid, ws, data, wtype);
            out.ratio = oc.ratio;
            if (sweep_s_hat) {
                ObservabilityCase o2 = observability_ratio(spec, grid, ws2, data, wtype);
                ObservabilityCase o4 = observability_ratio(spec, grid, ws4, data, wtype);
                out.ratio_2s = o2.ratio;
                out.ratio_4s = o4.ratio;
            }
        } catch (const std::exception& e) {
            out.error = std::to_string(idx) + ": " + e.what();
        }
        return out;
    };

    std::vector<std::future<Sample>> futs;
    futs.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i)
        futs.push_back(std::async(std::launch::async, run_sample, i));

    double max1 = 0.0, max2 = 0.0, max4 = 0.0;
    for (auto& f : futs) {
        Sample s = f.get();
        if (!s.error.empty()) {
            rep.errors.push_back(s.error);
            continue;
        }
        rep.ratios.push_back(s.ratio);
        max1 = std::max(max1, s.ratio);
        max2 = std::max(max2, s.ratio_2s);
        max4 = std::max(max4, s.ratio_4s);
    }
    if (!rep.ratios.empty()) {
        std::vector<double> sorted = rep.ratios;
        std::sort(sorted.begin(), sorted.end());
        size_t nn = sorted.size();
        rep.min_ratio = sorted.front();
        rep.max_ratio = sorted.back();
        rep.median_ratio = nn % 2 ? sorted[nn / 2]
                                  : 0.5 * (sorted[nn / 2 - 1] + sorted[nn / 2]);
    }
    if (sweep_s_hat) {
        rep.s_hat_sweep["s"] = max1;
        rep.s_hat_sweep["2s"] = max2;
        rep.s_hat_sweep["4s"] = max4;
    }
    return rep;
}

}  // namespace ficon
