#include "ficon/model.hpp"

#include <cmath>

namespace ficon {

namespace {

constexpr int kPositivitySamples = 96;  // per axis, >= 64 required

void check_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw ConfigError(what + " evaluates to a non-finite value");
}

// Samples f over [t0,t1] x [x0,x1] on an n x n closed lattice, returns min.
double sampled_min(const SpaceTimeFn& f, double t0, double t1, double xlo,
                   double xhi, const std::string& what) {
    double mn = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= kPositivitySamples; ++it) {
        double t = t0 + (t1 - t0) * it / kPositivitySamples;
        for (int ix = 0; ix <= kPositivitySamples; ++ix) {
            double x = xlo + (xhi - xlo) * ix / kPositivitySamples;
            double v = f(t, x);
            check_finite(v, what);
            mn = std::min(mn, v);
        }
    }
    return mn;
}

}  // namespace

void Geometry::validate() const {
    if (!(a < 0.0)) throw ConfigError("geometry: left endpoint a must satisfy a < 0");
    if (!(b > 0.0)) throw ConfigError("geometry: right endpoint b must satisfy b > 0");
    if (!(d > 0.0 && d < b))
        throw ConfigError("geometry: control window edge d must lie in (0,b)");
    if (!(T > 0.0)) throw ConfigError("geometry: time horizon T must be positive");
}

CoefficientSet CoefficientSet::constant(double rho, double a, double b, double c,
                                        double alpha) {
    CoefficientSet s;
    auto cf = [](double v) { return SpaceTimeFn([v](double, double) { return v; }); };
    s.rho_plus = cf(rho);
    s.a_plus = cf(a);
    s.b_plus = cf(b);
    s.c_plus = cf(c);
    s.rho_minus = cf(rho);
    s.a_minus = cf(a);
    s.b_minus = cf(b);
    s.c_minus = cf(c);
    s.alpha = alpha;
    return s;
}

Nonlinearity burgers_nonlinearity(double scale) {
    Nonlinearity n;
    n.name = scale == 1.0 ? "burgers" : "burgers(scale=" + std::to_string(scale) + ")";
    n.g = [scale](double, double, double xi1, double xi2) { return scale * xi1 * xi2; };
    n.dg_dxi1 = [scale](double, double, double, double xi2) { return scale * xi2; };
    n.dg_dxi2 = [scale](double, double, double xi1, double) { return scale * xi1; };
    n.p1 = 1.0;
    n.p2 = 1.0;
    n.p3 = 1.0;
    return n;
}

NonlinEval eval_nonlinearity(const Nonlinearity& n, double x0, double x1,
                             double xi1, double xi2) {
    NonlinEval e{n.g(x0, x1, xi1, xi2), n.dg_dxi1(x0, x1, xi1, xi2),
                 n.dg_dxi2(x0, x1, xi1, xi2)};
    if (!std::isfinite(e.g) || !std::isfinite(e.dg_dxi1) || !std::isfinite(e.dg_dxi2))
        throw ConfigError("nonlinearity '" + n.name + "' produced a non-finite value");
    return e;
}

void ProblemSpec::validate() const {
    geometry.validate();
    if (!(point_mass > 0.0)) throw ConfigError("mass must be positive");

    const auto& g = geometry;
    const auto& c = coefficients;
    if (!(c.alpha > 0.0)) throw ConfigError("coefficients: alpha must be positive");

    struct Item {
        const SpaceTimeFn* f;
        double xlo, xhi;
        const char* name;
    };
    const Item items[] = {
        {&c.rho_plus, 0.0, g.b, "rho_plus"},   {&c.a_plus, 0.0, g.b, "a_plus"},
        {&c.rho_minus, g.a, 0.0, "rho_minus"}, {&c.a_minus, g.a, 0.0, "a_minus"},
    };
    for (const auto& it : items) {
        double mn = sampled_min(*it.f, 0.0, g.T, it.xlo, it.xhi, it.name);
        if (!(mn >= c.alpha))
            throw ConfigError(std::string(it.name) + ": sampled minimum " +
                              std::to_string(mn) + " violates lower bound alpha = " +
                              std::to_string(c.alpha));
    }
    // b and c only need to be finite.
    sampled_min(c.b_plus, 0.0, g.T, 0.0, g.b, "b_plus");
    sampled_min(c.b_minus, 0.0, g.T, g.a, 0.0, "b_minus");
    sampled_min(c.c_plus, 0.0, g.T, 0.0, g.b, "c_plus");
    sampled_min(c.c_minus, 0.0, g.T, g.a, 0.0, "c_minus");

    if (std::abs(w0(g.a)) > 1e-12 || std::abs(w0(g.b)) > 1e-12)
        throw ConfigError("w0 must vanish at both endpoints a and b");

    if (nonlinearity) {
        // g(x,0,0) finite on a coarse sample of the closed cylinder.
        for (int it = 0; it <= 8; ++it)
            for (int ix = 0; ix <= 8; ++ix)
                eval_nonlinearity(*nonlinearity, g.T * it / 8.0,
                                  g.a + (g.b - g.a) * ix / 8.0, 0.0, 0.0);
    }
}

ProblemSpec default_problem() {
    ProblemSpec s;
    s.geometry = Geometry{-1.0, 1.0, 0.5, 1.0};
    s.coefficients = CoefficientSet::constant(1.0, 1.0, 0.0, 0.0, 0.5);
    s.point_mass = 1.0;
    s.f_plus = [](double, double) { return 0.0; };
    s.f_minus = [](double, double) { return 0.0; };
    s.r = [](double) { return 0.0; };
    s.w0 = [](double) { return 0.0; };
    return s;
}

// ---------------------------------------------------------------------------
// Preset catalogue
// ---------------------------------------------------------------------------

namespace {

double require_number(const nlohmann::json& j, const std::string& key,
                      const std::string& field) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError(field + ": preset requires numeric key '" + key + "'");
    return j[key].get<double>();
}

double number_or(const nlohmann::json& j, const std::string& key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) throw ConfigError("key '" + key + "' must be numeric");
    return j[key].get<double>();
}

}  // namespace

SpaceTimeFn parse_space_time_fn(const nlohmann::json& j, const std::string& field) {
    if (j.is_number()) {
        double v = j.get<double>();
        return [v](double, double) { return v; };
    }
    if (!j.is_object() || !j.contains("preset"))
        throw ConfigError(field + ": expected a number or an object with a 'preset' key");
    std::string p = j["preset"].get<std::string>();
    if (p == "zero") return [](double, double) { return 0.0; };
    if (p == "constant") {
        double v = require_number(j, "value", field);
        return [v](double, double) { return v; };
    }
    if (p == "affine") {
        double c0 = number_or(j, "c0", 0.0);
        double cx = number_or(j, "cx", 0.0);
        double ct = number_or(j, "ct", 0.0);
        return [=](double t, double x) { return c0 + cx * x + ct * t; };
    }
    if (p == "sin_t") {  // c0 + amp*sin(freq*x0)
        double c0 = number_or(j, "c0", 0.0);
        double amp = require_number(j, "amp", field);
        double freq = number_or(j, "freq", 1.0);
        return [=](double t, double) { return c0 + amp * std::sin(freq * t); };
    }
    if (p == "sin_tx") {  // c0 + amp*sin(freq*x0)*x1
        double c0 = number_or(j, "c0", 0.0);
        double amp = require_number(j, "amp", field);
        double freq = number_or(j, "freq", 1.0);
        return [=](double t, double x) { return c0 + amp * std::sin(freq * t) * x; };
    }
    throw ConfigError(field + ": unknown space-time preset '" + p + "'");
}

TimeFn parse_time_fn(const nlohmann::json& j, const std::string& field) {
    if (j.is_number()) {
        double v = j.get<double>();
        return [v](double) { return v; };
    }
    if (!j.is_object() || !j.contains("preset"))
        throw ConfigError(field + ": expected a number or an object with a 'preset' key");
    std::string p = j["preset"].get<std::string>();
    if (p == "zero") return [](double) { return 0.0; };
    if (p == "constant") {
        double v = require_number(j, "value", field);
        return [v](double) { return v; };
    }
    if (p == "sine") {  // amp*sin(freq*x0 + phase)
        double amp = require_number(j, "amp", field);
        double freq = number_or(j, "freq", 1.0);
        double phase = number_or(j, "phase", 0.0);
        return [=](double t) { return amp * std::sin(freq * t + phase); };
    }
    if (p == "pulse") {  // smooth bump centered at t0 with half-width w
        double amp = require_number(j, "amp", field);
        double t0 = require_number(j, "center", field);
        double w = require_number(j, "width", field);
        return [=](double t) {
            double s = (t - t0) / w;
            return std::abs(s) < 1.0 ? amp * std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
        };
    }
    throw ConfigError(field + ": unknown time preset '" + p + "'");
}

SpaceFn parse_space_fn(const nlohmann::json& j, const std::string& field,
                       const Geometry& geom) {
    double a = geom.a, b = geom.b;
    if (j.is_number()) {
        double v = j.get<double>();
        return [v](double) { return v; };
    }
    if (!j.is_object() || !j.contains("preset"))
        throw ConfigError(field + ": expected a number or an object with a 'preset' key");
    std::string p = j["preset"].get<std::string>();
    if (p == "zero") return [](double) { return 0.0; };
    if (p == "sine_mode") {  // amp*sin(k*pi*(x-a)/(b-a)); vanishes at a,b
        double amp = number_or(j, "amp", 1.0);
        int k = static_cast<int>(number_or(j, "k", 1.0));
        return [=](double x) { return amp * std::sin(k * M_PI * (x - a) / (b - a)); };
    }
    if (p == "sine_combo") {
        if (!j.contains("coeffs") || !j["coeffs"].is_array())
            throw ConfigError(field + ": sine_combo requires a 'coeffs' array");
        std::vector<double> c = j["coeffs"].get<std::vector<double>>();
        return [=](double x) {
            double s = 0.0;
            for (size_t k = 0; k < c.size(); ++k)
                s += c[k] * std::sin((k + 1) * M_PI * (x - a) / (b - a));
            return s;
        };
    }
    if (p == "bump") {
        double amp = require_number(j, "amp", field);
        double x0 = require_number(j, "center", field);
        double w = require_number(j, "width", field);
        return [=](double x) {
            double s = (x - x0) / w;
            return std::abs(s) < 1.0 ? amp * std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
        };
    }
    throw ConfigError(field + ": unknown space preset '" + p + "'");
}

ProblemSpec build_problem(const nlohmann::json& config) {
    if (!config.is_object()) throw ConfigError("problem config must be a JSON object");
    ProblemSpec s = default_problem();

    if (config.contains("geometry")) {
        const auto& g = config["geometry"];
        s.geometry.a = number_or(g, "a", s.geometry.a);
        s.geometry.b = number_or(g, "b", s.geometry.b);
        s.geometry.d = number_or(g, "d", s.geometry.d);
        s.geometry.T = number_or(g, "T", s.geometry.T);
    }
    if (!config.contains("M")) throw ConfigError("config is missing required field 'M'");
    if (!config["M"].is_number()) throw ConfigError("'M' must be numeric");
    s.point_mass = config["M"].get<double>();

    if (config.contains("coefficients")) {
        const auto& c = config["coefficients"];
        auto coef = [&](const char* key, SpaceTimeFn& dst) {
            if (c.contains(key)) dst = parse_space_time_fn(c[key], key);
        };
        coef("rho_plus", s.coefficients.rho_plus);
        coef("a_plus", s.coefficients.a_plus);
        coef("b_plus", s.coefficients.b_plus);
        coef("c_plus", s.coefficients.c_plus);
        coef("rho_minus", s.coefficients.rho_minus);
        coef("a_minus", s.coefficients.a_minus);
        coef("b_minus", s.coefficients.b_minus);
        coef("c_minus", s.coefficients.c_minus);
        s.coefficients.alpha = number_or(c, "alpha", s.coefficients.alpha);
    }

    if (config.contains("nonlinearity") && !config["nonlinearity"].is_null()) {
        const auto& n = config["nonlinearity"];
        std::string name = n.is_string() ? n.get<std::string>()
                                         : n.value("preset", std::string("burgers"));
        if (name == "burgers") {
            double scale = n.is_object() ? number_or(n, "scale", 1.0) : 1.0;
            s.nonlinearity = burgers_nonlinearity(scale);
        } else if (name == "none") {
            s.nonlinearity.reset();
        } else {
            throw ConfigError("unknown nonlinearity preset '" + name + "'");
        }
    }

    if (config.contains("data")) {
        const auto& d = config["data"];
        if (d.contains("f_plus")) s.f_plus = parse_space_time_fn(d["f_plus"], "f_plus");
        if (d.contains("f_minus")) s.f_minus = parse_space_time_fn(d["f_minus"], "f_minus");
        if (d.contains("r")) s.r = parse_time_fn(d["r"], "r");
        if (d.contains("w0")) s.w0 = parse_space_fn(d["w0"], "w0", s.geometry);
    }

    s.validate();
    return s;
}

}  // namespace ficon
