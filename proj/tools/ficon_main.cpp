#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ficon/hum.hpp"
#include "ficon/io.hpp"
#include "ficon/observability.hpp"
#include "ficon/trajectory.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace ficon;

struct Ctx {
    json config;
    fs::path out;
    ProblemSpec spec;
    Grid grid;
    WeightParameters wp;
    std::chrono::steady_clock::time_point t0;
    std::vector<fs::path> outputs;
};

double jnum(const json& j, const char* key, double dflt) {
    return j.contains(key) ? j[key].get<double>() : dflt;
}

Ctx load_context(const std::string& config_path, const std::string& out_dir) {
    Ctx ctx;
    ctx.t0 = std::chrono::steady_clock::now();
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open config file " + config_path);
    try {
        is >> ctx.config;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ctx.out = out_dir;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir);

    if (!ctx.config.contains("problem"))
        throw ConfigError("config is missing required section 'problem'");
    ctx.spec = build_problem(ctx.config["problem"]);

    const json grid_cfg = ctx.config.value("grid", json::object());
    int n_minus = static_cast<int>(jnum(grid_cfg, "n_minus", 12));
    int n_plus = static_cast<int>(jnum(grid_cfg, "n_plus", 24));
    int n_steps = static_cast<int>(jnum(grid_cfg, "n_steps", 48));
    ctx.grid = build_grid(ctx.spec.geometry, n_minus, n_plus, n_steps);
    if (!ctx.grid.snap_note.empty())
        std::cerr << "note: " << ctx.grid.snap_note << "\n";

    const json w = ctx.config.value("weights", json::object());
    ctx.wp.lambda = jnum(w, "lambda", ctx.wp.lambda);
    ctx.wp.s_hat = jnum(w, "s_hat", ctx.wp.s_hat);
    ctx.wp.beta_offset = jnum(w, "beta_offset", ctx.wp.beta_offset);
    if (w.contains("C_shift")) ctx.wp.C_shift = w["C_shift"].get<double>();
    if (w.contains("epsilon_freeze"))
        ctx.wp.epsilon_freeze = w["epsilon_freeze"].get<double>();
    return ctx;
}

void finish(Ctx& ctx) {
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                ctx.t0).count();
    write_manifest(ctx.out, ordered_json(ctx.config), ctx.outputs, wall);
}

ControlOptions control_options(const json& c) {
    ControlOptions opt;
    opt.cg_tol = jnum(c, "cg_tol", opt.cg_tol);
    opt.cg_maxiter_factor = static_cast<int>(jnum(c, "cg_maxiter_factor",
                                                  opt.cg_maxiter_factor));
    if (c.contains("precond")) {
        std::string v = c["precond"].get<std::string>();
        if (v == "none") opt.precond = PrecondKind::None;
        else if (v == "jacobi") opt.precond = PrecondKind::Jacobi;
        else if (v == "block") opt.precond = PrecondKind::Block;
        else throw ConfigError("unknown precond '" + v + "'");
    }
    if (c.contains("m_variant")) {
        std::string v = c["m_variant"].get<std::string>();
        if (v == "prop31") opt.m_variant = MVariant::Prop31;
        else if (v == "theorem") opt.m_variant = MVariant::Theorem11;
        else throw ConfigError("unknown m_variant '" + v + "'");
    }
    return opt;
}

ordered_json optimality_json(const OptimalityReport& rep) {
    ordered_json j;
    for (const auto& [k, v] : rep.residuals) j[k] = v;
    j["ok"] = rep.ok;
    return j;
}

int cmd_forward(Ctx& ctx) {
    const json fcfg = ctx.config.value("forward", json::object());
    std::string mode = fcfg.value("mode", std::string("linear"));
    ForwardOptions opt;
    if (fcfg.contains("K")) opt.K = fcfg["K"].get<double>();

    SpaceTimeField w;
    if (mode == "linear") {
        w = solve_linear_forward(ctx.spec, ctx.grid, opt);
    } else if (mode == "semi_implicit") {
        w = solve_semilinear_forward(ctx.spec, ctx.grid, SemiMode::SemiImplicit, opt);
    } else if (mode == "newton") {
        w = solve_semilinear_forward(ctx.spec, ctx.grid, SemiMode::Newton, opt);
    } else {
        throw ConfigError("unknown forward mode '" + mode + "'");
    }

    fs::path sol = ctx.out / "solution.csv";
    write_field_csv(sol, ctx.grid, w);
    ctx.outputs.push_back(sol);

    ordered_json summary;
    summary["command"] = "forward";
    summary["mode"] = mode;
    summary["grid_snap"] = ctx.grid.snap_note;
    summary["norm_Q"] = discrete_norm(ctx.grid, w, Region::Q);
    summary["norm_Q_plus"] = discrete_norm(ctx.grid, w, Region::QPlus);
    summary["norm_Q_minus"] = discrete_norm(ctx.grid, w, Region::QMinus);
    summary["norm_interface"] = discrete_norm(ctx.grid, w, Region::Interface);
    summary["terminal_norm"] = slice_norm(ctx.grid, w, ctx.grid.n_steps);
    if (ctx.spec.is_linear())
        summary["energy_ratio"] = energy_estimate_check(w, ctx.spec, ctx.grid);
    fs::path sj = ctx.out / "summary.json";
    write_json(sj, summary);
    ctx.outputs.push_back(sj);
    finish(ctx);
    return 0;
}

int cmd_weights_check(Ctx& ctx) {
    WeightSystem ws = build_weight_system(ctx.spec.geometry, ctx.wp);
    OrderingReport rep = verify_ordering(ws, ctx.grid);
    PenaltyFields pf = penalty_factors(ws, ctx.grid);
    (void)pf;

    std::vector<std::vector<std::string>> rows;
    for (int k = 1; k < ctx.grid.n_steps; ++k) {
        double t = ctx.grid.t(k);
        for (int i = 0; i < ctx.grid.nx(); ++i) {
            double x1 = ctx.grid.x[i];
            rows.push_back({format_double(t), format_double(x1),
                            format_double(ws.phi(1, t, x1)),
                            format_double(ws.phi(2, t, x1)),
                            format_double(ws.psi_star(t, x1))});
        }
    }
    fs::path wcsv = ctx.out / "weights.csv";
    write_csv(wcsv, "x0,x1,phi1,phi2,psi_star", rows);
    ctx.outputs.push_back(wcsv);

    ordered_json rj;
    rj["command"] = "weights-check";
    rj["ok"] = rep.ok;
    rj["min_margin_plus"] = rep.min_margin_plus;
    rj["min_margin_minus"] = rep.min_margin_minus;
    rj["max_interface_reldiff"] = rep.max_iface_reldiff;
    rj["max_psi_star"] = rep.max_psi_star;
    rj["violations"] = rep.violations.size();
    fs::path rp = ctx.out / "report.json";
    write_json(rp, rj);
    ctx.outputs.push_back(rp);
    finish(ctx);
    if (!rep.ok) {
        std::cerr << rep.summary() << "\n";
        return 4;
    }
    return 0;
}

int cmd_control(Ctx& ctx) {
    WeightSystem ws = build_weight_system(ctx.spec.geometry, ctx.wp);
    const json ccfg = ctx.config.value("control", json::object());
    ControlProblem cp;
    cp.spec = &ctx.spec;
    cp.grid = &ctx.grid;
    cp.ws = &ws;
    cp.epsilon = jnum(ccfg, "epsilon", 1e-3);
    cp.opt = control_options(ccfg);

    ControlSolution sol = solve_penalized_control(cp);
    OptimalityReport orep = recover_adjoint_and_check(sol, cp);
    DualityReport drep = duality_identity(sol, cp);

    for (auto [name, field] : {std::pair<const char*, const SpaceTimeField*>{"z.csv", &sol.z},
                               {"u.csv", &sol.u},
                               {"p.csv", &sol.p}}) {
        fs::path p = ctx.out / name;
        write_field_csv(p, ctx.grid, *field);
        ctx.outputs.push_back(p);
    }

    ordered_json summary;
    summary["command"] = "control";
    summary["epsilon"] = cp.epsilon;
    summary["J"] = sol.J_value;
    summary["J1"] = sol.J_terms[0];
    summary["J2"] = sol.J_terms[1];
    summary["J3"] = sol.J_terms[2];
    summary["J4"] = sol.J_terms[3];
    summary["terminal_norm"] = sol.terminal_norm;
    summary["pde_residual"] = sol.residual_pde;
    summary["cg_iters"] = sol.cg_iters;
    summary["cg_relres"] = sol.cg_relres;
    summary["pinned_z"] = sol.pinned_z;
    summary["pinned_u"] = sol.pinned_u;
    summary["effective_freeze"] = sol.effective_freeze;
    summary["optimality"] = optimality_json(orep);
    summary["duality"] = {{"two_J", drep.two_J},
                          {"term_f", drep.term_f},
                          {"term_init", drep.term_init},
                          {"term_r", drep.term_r},
                          {"gap", drep.gap}};
    fs::path sj = ctx.out / "summary.json";
    write_json(sj, summary);
    ctx.outputs.push_back(sj);
    finish(ctx);
    return orep.ok ? 0 : 4;
}

int cmd_sweep(Ctx& ctx) {
    WeightSystem ws = build_weight_system(ctx.spec.geometry, ctx.wp);
    const json scfg = ctx.config.value("sweep", json::object());
    std::vector<double> epsilons =
        scfg.contains("epsilons") ? scfg["epsilons"].get<std::vector<double>>()
                                  : std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};

    ControlProblem cp;
    cp.spec = &ctx.spec;
    cp.grid = &ctx.grid;
    cp.ws = &ws;
    cp.opt = control_options(ctx.config.value("control", json::object()));

    std::vector<SweepRow> rows = epsilon_sweep(cp, epsilons);

    std::vector<std::vector<std::string>> csv;
    bool any_error = false;
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            any_error = true;
            continue;
        }
        csv.push_back({format_double(r.epsilon), format_double(r.terminal_norm),
                       format_double(r.J_terms[0]), format_double(r.J_terms[1]),
                       format_double(r.J_terms[2]), format_double(r.J_terms[3]),
                       format_double(r.pde_residual), std::to_string(r.cg_iters)});
    }
    fs::path sc = ctx.out / "sweep.csv";
    write_csv(sc, "epsilon,terminal_norm,J1,J2,J3,J4,pde_residual,cg_iters", csv);
    ctx.outputs.push_back(sc);

    ordered_json summary;
    summary["command"] = "sweep";
    summary["rows"] = rows.size();
    summary["fixture_hash"] = content_hash(sc);
    ordered_json errs = ordered_json::array();
    for (const auto& r : rows)
        if (!r.error.empty()) errs.push_back(format_double(r.epsilon) + ": " + r.error);
    summary["errors"] = errs;
    fs::path sj = ctx.out / "summary.json";
    write_json(sj, summary);
    ctx.outputs.push_back(sj);
    finish(ctx);
    return any_error ? 3 : 0;
}

int cmd_trajectory(Ctx& ctx) {
    WeightSystem ws = build_weight_system(ctx.spec.geometry, ctx.wp);
    const json tcfg = ctx.config.value("trajectory", json::object());
    double eps = jnum(tcfg, "epsilon", 1e-4);
    int max_iters = static_cast<int>(jnum(tcfg, "max_iters", 8));
    double tol = jnum(tcfg, "tol", 1e-4);
    double amp = jnum(tcfg, "control_amplitude", 1.0);
    std::string mode = tcfg.value("mode", std::string("newton"));

    SpaceFn target_w0 = tcfg.contains("target_w0")
                            ? parse_space_fn(tcfg["target_w0"], "target_w0", ctx.spec.geometry)
                            : ctx.spec.w0;
    SpaceTimeField u_profile = bump_control_profile(ctx.grid, amp);
    TargetTrajectory traj = make_target_trajectory(
        ctx.spec, ctx.grid, u_profile, target_w0,
        mode == "semi_implicit" ? SemiMode::SemiImplicit : SemiMode::Newton);

    SpaceFn w0 = ctx.spec.w0;
    if (tcfg.contains("perturbation")) {
        SpaceFn pert = parse_space_fn(tcfg["perturbation"], "perturbation",
                                      ctx.spec.geometry);
        SpaceFn base = target_w0;
        w0 = [base, pert](double x) { return base(x) + pert(x); };
    }

    TrajectoryControlResult res = solve_trajectory_control(
        ctx.spec, ctx.grid, ws, traj, w0, eps, max_iters, tol,
        control_options(ctx.config.value("control", json::object())));

    std::vector<std::vector<std::string>> hist;
    for (const auto& row : res.history)
        hist.push_back({std::to_string(row.iterate), format_double(row.terminal_error),
                        format_double(row.remainder_norm),
                        std::to_string(row.inner_cg_iters)});
    fs::path hc = ctx.out / "history.csv";
    write_csv(hc, "iterate,terminal_error,remainder_norm,inner_cg_iters", hist);
    ctx.outputs.push_back(hc);

    fs::path wc = ctx.out / "w.csv";
    write_field_csv(wc, ctx.grid, res.w);
    ctx.outputs.push_back(wc);
    fs::path uc = ctx.out / "u.csv";
    write_field_csv(uc, ctx.grid, res.u);
    ctx.outputs.push_back(uc);

    ordered_json summary;
    summary["command"] = "trajectory";
    summary["converged"] = res.converged;
    summary["iterates"] = res.history.size();
    summary["terminal_error"] = res.terminal_error;
    summary["trajectory_residual"] = traj.residual;
    summary["semilinear_residual"] = res.semilinear_residual;
    fs::path sj = ctx.out / "summary.json";
    write_json(sj, summary);
    ctx.outputs.push_back(sj);
    finish(ctx);
    return res.converged ? 0 : 4;
}

int cmd_observability(Ctx& ctx, std::uint64_t seed, bool seed_given) {
    const json ocfg = ctx.config.value("observability", json::object());
    if (!seed_given) {
        if (!ocfg.contains("seed"))
            throw ConfigError("observability requires a seed (--seed or config)");
        seed = ocfg["seed"].get<std::uint64_t>();
    }
    WeightSystem ws = build_weight_system(ctx.spec.geometry, ctx.wp);
    int n_samples = static_cast<int>(jnum(ocfg, "n_samples", 20));
    bool sweep = ocfg.value("s_hat_sweep", true);
    ObservabilityWeight wtype = ocfg.value("weight_form", std::string("phi_star")) ==
                                        "literal"
                                    ? ObservabilityWeight::Literal
                                    : ObservabilityWeight::FromPhiStar;

    EnsembleReport rep = ensemble_constant(ctx.spec, ctx.grid, ws, n_samples, seed,
                                           wtype, sweep);

    ordered_json rj;
    rj["command"] = "observability";
    rj["samples"] = rep.n_samples;
    rj["seed"] = rep.seed;
    rj["ratios"] = rep.ratios;
    rj["max"] = rep.max_ratio;
    rj["median"] = rep.median_ratio;
    rj["min"] = rep.min_ratio;
    ordered_json sweep_j = ordered_json::object();
    for (const auto& [k, v] : rep.s_hat_sweep) sweep_j[k] = v;
    rj["s_hat_sweep"] = sweep_j;
    rj["errors"] = rep.errors;
    fs::path rp = ctx.out / "report.json";
    write_json(rp, rj);
    ctx.outputs.push_back(rp);

    std::vector<std::vector<std::string>> rows;
    for (size_t i = 0; i < rep.ratios.size(); ++i)
        rows.push_back({std::to_string(i), format_double(rep.ratios[i])});
    fs::path sc = ctx.out / "samples.csv";
    write_csv(sc, "sample,ratio", rows);
    ctx.outputs.push_back(sc);

    finish(ctx);
    return rep.errors.empty() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ficon: two-domain parabolic control experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) {
            seed_given = true;
        });
    };
    CLI::App* c_forward = app.add_subcommand("forward", "forward solve");
    CLI::App* c_control = app.add_subcommand("control", "penalized control solve");
    CLI::App* c_traj = app.add_subcommand("trajectory", "controllability to trajectory");
    CLI::App* c_obs = app.add_subcommand("observability", "observability ensemble");
    CLI::App* c_sweep = app.add_subcommand("sweep", "epsilon sweep");
    CLI::App* c_weights = app.add_subcommand("weights-check", "weight ordering check");
    for (CLI::App* sub : {c_forward, c_control, c_traj, c_obs, c_sweep, c_weights})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        Ctx ctx = load_context(config_path, out_dir);
        if (app.got_subcommand(c_forward)) return cmd_forward(ctx);
        if (app.got_subcommand(c_control)) return cmd_control(ctx);
        if (app.got_subcommand(c_traj)) return cmd_trajectory(ctx);
        if (app.got_subcommand(c_obs)) return cmd_observability(ctx, seed, seed_given);
        if (app.got_subcommand(c_sweep)) return cmd_sweep(ctx);
        if (app.got_subcommand(c_weights)) return cmd_weights_check(ctx);
        return 2;
    } catch (const ficon::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ficon::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
