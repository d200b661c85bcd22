#pragma once

#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "ficon/common.hpp"

namespace ficon {

using SpaceTimeFn = std::function<double(double, double)>;  // (x0, x1)
using TimeFn = std::function<double(double)>;               // (x0)
using SpaceFn = std::function<double(double)>;              // (x1)

// Domain [a,b] split at the interface x1 = 0, control window (d,b),
// time horizon T.
struct Geometry {
    double a = -1.0;
    double b = 1.0;
    double d = 0.5;
    double T = 1.0;

    void validate() const;
    double length() const { return b - a; }
};

// Coefficients of the two parabolic operators, one set per subdomain.
// rho and a must stay >= alpha > 0 on the closed subdomains.
struct CoefficientSet {
    SpaceTimeFn rho_plus, a_plus, b_plus, c_plus;      // on [0,T] x [0,b]
    SpaceTimeFn rho_minus, a_minus, b_minus, c_minus;  // on [0,T] x [a,0]
    double alpha = 0.0;

    static CoefficientSet constant(double rho, double a, double b, double c,
                                   double alpha);
};

struct NonlinEval {
    double g;
    double dg_dxi1;
    double dg_dxi2;
};

// Semilinear term g(x, xi1, xi2) with analytic partials in xi1, xi2.
// Same g on both subdomains. p1..p3 are the declared growth exponents.
struct Nonlinearity {
    std::string name;
    std::function<double(double, double, double, double)> g;        // (x0,x1,xi1,xi2)
    std::function<double(double, double, double, double)> dg_dxi1;
    std::function<double(double, double, double, double)> dg_dxi2;
    double p1 = 1.0, p2 = 1.0, p3 = 1.0;
};

// g = scale * xi1 * xi2 (the Burgers convection term).
Nonlinearity burgers_nonlinearity(double scale = 1.0);

NonlinEval eval_nonlinearity(const Nonlinearity& n, double x0, double x1,
                             double xi1, double xi2);

// Full continuous problem: geometry, operators, point mass M, data.
struct ProblemSpec {
    Geometry geometry;
    CoefficientSet coefficients;
    double point_mass = 1.0;
    std::optional<Nonlinearity> nonlinearity;
    SpaceTimeFn f_plus;   // bulk source on Q+
    SpaceTimeFn f_minus;  // bulk source on Q-
    TimeFn r;             // interface source
    SpaceFn w0;           // initial state, w0(a) = w0(b) = 0

    bool is_linear() const { return !nonlinearity.has_value(); }
    void validate() const;
};

// Convenience: constant-coefficient heat system with zero data.
ProblemSpec default_problem();

// Builds and validates a ProblemSpec from a JSON configuration document.
// Coefficients and data come from a closed preset catalogue; see README
// for the schema. Throws ConfigError naming the offending field.
ProblemSpec build_problem(const nlohmann::json& config);

// Parses one scalar-function preset (shared by coefficients and data).
SpaceTimeFn parse_space_time_fn(const nlohmann::json& j, const std::string& field);
TimeFn parse_time_fn(const nlohmann::json& j, const std::string& field);
SpaceFn parse_space_fn(const nlohmann::json& j, const std::string& field,
                       const Geometry& geom);

}  // namespace ficon
