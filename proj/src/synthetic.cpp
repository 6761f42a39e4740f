#include "farmstate/synthetic.hpp"

#include <cmath>
#include <random>

#include "farmstate/errors.hpp"

namespace farmstate {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Deterministic standard-normal pairs: two 64-bit draws mapped to uniforms
// u = (x >> 11) * 2^-53, then Box-Muller with u1 -> 1 - u1 to stay in (0, 1].
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

    std::complex<double> next_complex() {
        const double u1 = 1.0 - to_unit(rng_());
        const double u2 = to_unit(rng_());
        const double radius = std::sqrt(-2.0 * std::log(u1));
        return {radius * std::cos(kTwoPi * u2), radius * std::sin(kTwoPi * u2)};
    }

private:
    static double to_unit(std::uint64_t x) {
        return static_cast<double>(x >> 11) * 0x1.0p-53;
    }
    std::mt19937_64 rng_;
};

}  // namespace

double PowerCurve::operator()(double speed) const {
    if (speed < cut_in_speed) return 0.0;
    if (speed >= rated_speed) return rated_power_kw;
    const double c3 = cut_in_speed * cut_in_speed * cut_in_speed;
    const double r3 = rated_speed * rated_speed * rated_speed;
    const double s3 = speed * speed * speed;
    return rated_power_kw * (s3 - c3) / (r3 - c3);
}

void FarmScenario::validate() const {
    if (n_turbines < 1) throw ArgumentError("n_turbines must be >= 1");
    if (n_steps < 2) throw ArgumentError("n_steps must be >= 2");
    if (!(correlation_length > 0.0))
        throw ArgumentError("correlation_length must be positive (inf allowed)");
    if (!(ou_theta > 0.0) || ou_theta > 1.0)
        throw ArgumentError("ou_theta must be in (0, 1]");
    if (ou_sigma < 0.0) throw ArgumentError("ou_sigma must be >= 0");
    if (!(power_curve.cut_in_speed < power_curve.rated_speed))
        throw ArgumentError("cut-in speed must be below rated speed");
    if (!(power_curve.cut_in_speed >= 0.0))
        throw ArgumentError("cut-in speed must be >= 0");
    if (!(power_curve.rated_power_kw > 0.0))
        throw ArgumentError("rated power must be positive");
    if (!(sample_interval_s > 0.0))
        throw ArgumentError("sample interval must be positive");
    if (!(floor_epsilon_rel >= 0.0))
        throw ArgumentError("floor_epsilon_rel must be >= 0");
}

std::pair<VelocityField, PowerSeries> generate(const FarmScenario& scn) {
    scn.validate();

    // Adjacent-turbine innovation correlation; 1 when fully synchronized.
    const double rho = std::isinf(scn.correlation_length)
                           ? 1.0
                           : std::exp(-1.0 / scn.correlation_length);
    const double mix = std::sqrt(std::max(0.0, 1.0 - rho * rho));

    NormalSource normals(scn.seed);
    Eigen::MatrixXcd values(scn.n_turbines, scn.n_steps);
    Eigen::VectorXd power(scn.n_steps);
    std::vector<std::complex<double>> state(
        static_cast<size_t>(scn.n_turbines), scn.mean_wind);
    std::vector<std::complex<double>> innov(static_cast<size_t>(scn.n_turbines));

    for (int t = 0; t < scn.n_steps; ++t) {
        double total = 0.0;
        for (int n = 0; n < scn.n_turbines; ++n) {
            if (t > 0) {
                const std::complex<double> z = normals.next_complex();
                innov[static_cast<size_t>(n)] =
                    n == 0 ? z : rho * innov[static_cast<size_t>(n - 1)] + mix * z;
                auto& x = state[static_cast<size_t>(n)];
                x += scn.ou_theta * (scn.mean_wind - x) +
                     scn.ou_sigma * innov[static_cast<size_t>(n)];
            }
            values(n, t) = state[static_cast<size_t>(n)];
            total += scn.power_curve(std::abs(state[static_cast<size_t>(n)]));
        }
        power(t) = total;
    }

    VelocityField field(std::move(values), scn.sample_interval_s);
    const double floor_eps = scn.floor_epsilon_rel * power.maxCoeff();
    PowerSeries series(std::move(power), floor_eps);
    return {std::move(field), std::move(series)};
}

}  // namespace farmstate
