#include <doctest.h>

#include <cmath>

#include "farmstate/covariance.hpp"
#include "farmstate/errors.hpp"
#include "farmstate/spectral.hpp"
#include "farmstate/synthetic.hpp"
#include "oracles.hpp"

using namespace farmstate;

TEST_CASE("power curve shape") {
    PowerCurve curve;
    curve.cut_in_speed = 3.0;
    curve.rated_speed = 12.0;
    curve.rated_power_kw = 2000.0;
    CHECK(curve(0.0) == 0.0);
    CHECK(curve(2.999) == 0.0);
    CHECK(curve(3.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(curve(12.0) == 2000.0);
    CHECK(curve(25.0) == 2000.0);
    // Cubic ramp between the knots.
    const double mid = curve(8.0);
    CHECK(mid == doctest::Approx(2000.0 * (512.0 - 27.0) / (1728.0 - 27.0)));
    CHECK(curve(11.999) < 2000.0);
    CHECK(curve(11.999) > 1990.0);
}

TEST_CASE("generate: zero volatility keeps the field at the mean") {
    FarmScenario scn;
    scn.n_turbines = 3;
    scn.n_steps = 50;
    scn.ou_sigma = 0.0;
    const auto [field, power] = generate(scn);
    for (int n = 0; n < 3; ++n)
        for (int t = 0; t < 50; ++t) CHECK(field.at(n, t) == scn.mean_wind);
    const double expected_power = 3.0 * scn.power_curve(std::abs(scn.mean_wind));
    for (int t = 0; t < 50; ++t) CHECK(power.at(t) == expected_power);
    CHECK(oracles::max_abs(compute_block(field, 0).entries) == 0.0);
    CHECK(oracles::max_abs(compute_block(field, 3).entries) == 0.0);
}

TEST_CASE("generate: fixed seed reproduces the dataset bit for bit") {
    FarmScenario scn;
    scn.n_turbines = 4;
    scn.n_steps = 1000;
    scn.seed = 42;
    const auto [f1, p1] = generate(scn);
    const auto [f2, p2] = generate(scn);
    CHECK(oracles::max_abs(f1.values() - f2.values()) == 0.0);
    CHECK((p1.values() - p2.values()).cwiseAbs().maxCoeff() == 0.0);

    scn.seed = 43;
    const auto [f3, p3] = generate(scn);
    CHECK(oracles::max_abs(f1.values() - f3.values()) > 0.0);
}

TEST_CASE("generate: adjacent-turbine correlation approaches the target") {
    FarmScenario scn;
    scn.n_turbines = 6;
    scn.n_steps = 20000;
    scn.seed = 4242;
    scn.correlation_length = 2.0;
    scn.ou_theta = 0.3;
    scn.ou_sigma = 0.6;
    const auto [field, power] = generate(scn);
    const double target = std::exp(-1.0 / scn.correlation_length);

    for (int n = 0; n + 1 < scn.n_turbines; ++n) {
        // Correlation of the x components of neighbouring turbines.
        double ma = 0.0, mb = 0.0;
        for (int t = 0; t < scn.n_steps; ++t) {
            ma += field.at(n, t).real();
            mb += field.at(n + 1, t).real();
        }
        ma /= scn.n_steps;
        mb /= scn.n_steps;
        double num = 0.0, va = 0.0, vb = 0.0;
        for (int t = 0; t < scn.n_steps; ++t) {
            const double a = field.at(n, t).real() - ma;
            const double b = field.at(n + 1, t).real() - mb;
            num += a * b;
            va += a * a;
            vb += b * b;
        }
        const double corr = num / std::sqrt(va * vb);
        CHECK(std::abs(corr - target) <= 0.05);
    }
}

TEST_CASE("generate: power stays within physical bounds") {
    FarmScenario scn;
    scn.n_turbines = 5;
    scn.n_steps = 5000;
    scn.seed = 7;
    scn.ou_sigma = 2.0;  // wide excursions
    const auto [field, power] = generate(scn);
    const double cap = 5.0 * scn.power_curve.rated_power_kw;
    for (int t = 0; t < scn.n_steps; ++t) {
        CHECK(power.at(t) >= 0.0);
        CHECK(power.at(t) <= cap);
    }
}

TEST_CASE("generate: infinite correlation length synchronizes the farm") {
    FarmScenario scn;
    scn.n_turbines = 5;
    scn.n_steps = 4000;
    scn.seed = 99;
    scn.correlation_length = std::numeric_limits<double>::infinity();
    scn.ou_theta = 0.05;
    const auto [field, power] = generate(scn);

    for (int n = 1; n < scn.n_turbines; ++n)
        for (int t = 0; t < scn.n_steps; ++t)
            CHECK(field.at(n, t) == field.at(0, t));

    // Cross-turbine covariance at zero lag is rank one: the leading mode of
    // the zero-lag block carries essentially all variance.
    const SpectralBasis basis = decompose(assemble_master(field, LagSet({0})));
    CHECK(explained_variance(basis, 1) >= 0.99);
}

TEST_CASE("generate: invalid scenarios are rejected") {
    FarmScenario scn;
    scn.n_turbines = 0;
    CHECK_THROWS_AS(generate(scn), ArgumentError);
    scn = FarmScenario{};
    scn.ou_theta = 0.0;
    CHECK_THROWS_AS(generate(scn), ArgumentError);
    scn = FarmScenario{};
    scn.power_curve.cut_in_speed = 15.0;  // above rated speed
    CHECK_THROWS_AS(generate(scn), ArgumentError);
    scn = FarmScenario{};
    scn.correlation_length = -1.0;
    CHECK_THROWS_AS(generate(scn), ArgumentError);
}
