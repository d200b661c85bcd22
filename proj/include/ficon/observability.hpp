#pragma once

#include <map>
#include <string>
#include <vector>

#include "ficon/forward.hpp"
#include "ficon/weights.hpp"

namespace ficon {

enum class ObservabilityWeight {
    FromPhiStar,  // psi_* = s_hat * phi_* with the mid-time freeze
    Literal,      // psi_* = eta(x1)/(T-x0)^3
};

struct ObservabilityData {
    SpaceFn terminal;   // adjoint terminal state (vanishing at a, b)
    SpaceTimeFn f_plus;
    SpaceTimeFn f_minus;
    TimeFn r_tilde;
};

// One backward solve plus the itemized terms of the weighted observability
// inequality: LHS interior/trace terms against RHS data terms plus the
// observation over the control window.
struct ObservabilityCase {
    SpaceTimeField v;
    std::map<std::string, double> lhs_terms;
    std::map<std::string, double> rhs_terms;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

ObservabilityCase observability_ratio(const ProblemSpec& spec, const Grid& grid,
                                      const WeightSystem& ws,
                                      const ObservabilityData& data,
                                      ObservabilityWeight wtype =
                                          ObservabilityWeight::FromPhiStar);

struct EnsembleReport {
    int n_samples = 0;
    std::uint64_t seed = 0;
    std::vector<double> ratios;
    double max_ratio = 0.0;
    double median_ratio = 0.0;
    double min_ratio = 0.0;
    std::map<std::string, double> s_hat_sweep;  // "s", "2s", "4s" -> max ratio
    std::vector<std::string> errors;            // per failed sample: "idx: what"
};

// Random smooth data ensemble: terminal states are low-frequency sine
// combinations, r~ smooth pulses. Deterministic for a fixed seed; samples
// run concurrently with per-sample generators.
EnsembleReport ensemble_constant(const ProblemSpec& spec, const Grid& grid,
                                 const WeightSystem& ws, int n_samples,
                                 std::uint64_t seed,
                                 ObservabilityWeight wtype =
                                     ObservabilityWeight::FromPhiStar,
                                 bool sweep_s_hat = true);

}  // namespace ficon
