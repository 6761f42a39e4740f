#pragma once

#include <complex>
#include <cstdint>
#include <utility>

#include "farmstate/timeseries.hpp"

namespace farmstate {

// Piecewise turbine power curve: zero below cut-in, cubic ramp between
// cut-in and rated speed, flat at rated power above.
struct PowerCurve {
    double cut_in_speed = 3.0;     // m/s
    double rated_speed = 12.0;     // m/s
    double rated_power_kw = 2000.0;

    double operator()(double speed) const;
};

// Desk-scale correlated farm scenario. The velocity at each turbine is a
// discrete Ornstein-Uhlenbeck process around mean_wind; innovations are
// correlated across turbines with correlation exp(-distance /
// correlation_length) in turbine-index distance. correlation_length may be
// infinite (fully synchronized farm).
struct FarmScenario {
    int n_turbines = 10;
    int n_steps = 10000;
    std::uint64_t seed = 42;
    double correlation_length = 5.0;
    std::complex<double> mean_wind{8.0, 3.0};
    double ou_theta = 0.05;  // per-step mean reversion in (0, 1]
    double ou_sigma = 0.5;   // per-step innovation scale, m/s
    double sample_interval_s = 600.0;
    double floor_epsilon_rel = 1e-6;
    PowerCurve power_curve;

    void validate() const;
};

// Deterministic per seed: mt19937_64 uniforms fed through a fixed Box-Muller
// transform, turbines correlated by a first-order spatial recursion (the
// Cholesky factor of the exponential correlation matrix).
std::pair<VelocityField, PowerSeries> generate(const FarmScenario& scn);

}  // namespace farmstate
