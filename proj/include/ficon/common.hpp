#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ficon {

// Configuration / validation problems: CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures (singular step matrix, CG stall, Newton divergence): exit code 3.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Exponent range where exp() is finite and nonzero in double precision.
inline constexpr double kExpClampLo = -700.0;
inline constexpr double kExpClampHi = 700.0;

// exp with the exponent clamped to the representable range. The weight
// families blow up/down like exp(c/(T-x0)^3) near the terminal time; the
// clamp caps them at e^{+-700} which is below overflow and above underflow.
inline double exp_clamped(double e) {
    return std::exp(std::clamp(e, kExpClampLo, kExpClampHi));
}

// Deterministic uniform double in [0,1) from a 64-bit generator state.
// Avoids std::uniform_real_distribution so output bytes do not depend on
// the standard library implementation.
template <typename Rng>
double u01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * u01(rng);
}

inline bool nearly_equal(double a, double b, double rel_tol) {
    double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) <= rel_tol * scale;
}

}  // namespace ficon
