#include <doctest.h>

#include <random>

#include "farmstate/errors.hpp"
#include "farmstate/spectral.hpp"
#include "oracles.hpp"

using namespace farmstate;

namespace {

MasterMatrix hermitian_from(const Eigen::MatrixXcd& m, int n_turbines,
                            std::vector<int> lags) {
    return MasterMatrix::from_dense(m, n_turbines, std::move(lags));
}

Eigen::MatrixXcd random_hermitian(std::mt19937& rng, int dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXcd a(dim, dim);
    for (int c = 0; c < dim; ++c)
        for (int r = 0; r < dim; ++r) a(r, c) = std::complex<double>(u(rng), u(rng));
    return 0.5 * (a + a.adjoint().eval());
}

}  // namespace

TEST_CASE("decompose: diagonal matrix") {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    const SpectralBasis basis = decompose(hermitian_from(d, 2, {0}));
    CHECK(basis.eigenvalue(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(basis.eigenvalue(1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(basis.eigenvector(0)(0) - std::complex<double>(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(basis.eigenvector(0)(1)) < 1e-12);
    CHECK(std::abs(basis.eigenvector(1)(1) - std::complex<double>(1.0, 0.0)) < 1e-12);

    CHECK(explained_variance(basis, 1) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(explained_variance(basis, 2) == doctest::Approx(1.0).epsilon(1e-14));

    const ModeProfile profile = mode_profile(basis, 0);
    CHECK(profile.abs_components(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(profile.abs_components(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("decompose: zero matrix reports zero total variance") {
    const auto zero = hermitian_from(Eigen::MatrixXcd::Zero(4, 4), 2, {0, 1});
    try {
        decompose(zero);
        FAIL("expected ArgumentError");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("zero total variance") != std::string::npos);
    }
}

TEST_CASE("decompose: magnitude ordering handles negative eigenvalues") {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(3, 3);
    d(0, 0) = -3.0;
    d(1, 1) = 2.0;
    d(2, 2) = 0.5;
    const SpectralBasis basis = decompose(hermitian_from(d, 3, {0}));
    CHECK(basis.eigenvalue(0) == doctest::Approx(-3.0));
    CHECK(basis.eigenvalue(1) == doctest::Approx(2.0));
    CHECK(basis.eigenvalue(2) == doctest::Approx(0.5));
    CHECK(explained_variance(basis, 1) == doctest::Approx(3.0 / 5.5));
}

TEST_CASE("decompose: reconstruction, orthonormality and phase fixing") {
    std::mt19937 rng(41);
    const Eigen::MatrixXcd h = random_hermitian(rng, 12);
    const SpectralBasis basis = decompose(hermitian_from(h, 12, {0}));

    Eigen::MatrixXcd recon = Eigen::MatrixXcd::Zero(12, 12);
    for (int i = 0; i < 12; ++i)
        recon += basis.eigenvalue(i) *
                 (basis.eigenvector(i) * basis.eigenvector(i).adjoint());
    CHECK(oracles::max_abs(recon - h) <= 1e-8);

    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
            const std::complex<double> g =
                basis.eigenvector(i).dot(basis.eigenvector(j));
            CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-8);
        }
    }

    for (int i = 0; i < 12; ++i) {
        const Eigen::VectorXcd v = basis.eigenvector(i);
        int arg = 0;
        double best = -1.0;
        for (int r = 0; r < 12; ++r)
            if (std::abs(v(r)) > best) { best = std::abs(v(r)); arg = r; }
        CHECK(v(arg).imag() == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(v(arg).real() > 0.0);
    }
}

TEST_CASE("decompose: cumulative fraction is monotone and reaches 1") {
    std::mt19937 rng(42);
    const Eigen::MatrixXcd h = random_hermitian(rng, 9);
    const SpectralBasis basis = decompose(hermitian_from(h, 9, {0}));
    double prev = 0.0;
    for (int i = 0; i < 9; ++i) {
        CHECK(basis.cumulative_fraction()(i) >= prev);
        prev = basis.cumulative_fraction()(i);
    }
    CHECK(basis.cumulative_fraction()(8) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decompose: rejects non-Hermitian input") {
    Eigen::MatrixXcd bad = Eigen::MatrixXcd::Zero(2, 2);
    bad(0, 1) = 1.0;  // Missing conjugate partner
    CHECK_THROWS_AS(decompose(hermitian_from(bad, 2, {0})), ArgumentError);
}

TEST_CASE("explained_variance: order bounds") {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Identity(2, 2);
    const SpectralBasis basis = decompose(hermitian_from(d, 2, {0}));
    CHECK_THROWS_AS(explained_variance(basis, 0), ArgumentError);
    CHECK_THROWS_AS(explained_variance(basis, 3), ArgumentError);
}

TEST_CASE("degenerate clusters are detected and extended") {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(3, 3);
    d(0, 0) = 5.0;
    d(1, 1) = 5.0;
    d(2, 2) = 1.0;
    const SpectralBasis basis = decompose(hermitian_from(d, 3, {0}));
    CHECK(basis.splits_cluster(1));
    CHECK(!basis.splits_cluster(2));
    CHECK(basis.extend_to_cluster(1) == 2);
    CHECK(basis.extend_to_cluster(2) == 2);
}

TEST_CASE("mode profile: squared magnitudes sum to one") {
    std::mt19937 rng(43);
    const Eigen::MatrixXcd h = random_hermitian(rng, 8);
    const SpectralBasis basis = decompose(hermitian_from(h, 2, {0, 1, 2, 3}));
    for (int m = 0; m < basis.n_modes(); ++m) {
        const ModeProfile p = mode_profile(basis, m);
        CHECK(p.abs_components.rows() == 2);
        CHECK(p.abs_components.cols() == 4);
        CHECK(p.abs_components.array().square().sum() ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK_THROWS_AS(mode_profile(basis, 8), ArgumentError);
}

TEST_CASE("mode profile: dominant turbine cluster carries mode 1") {
    // Turbines 0 and 1 share a strong common signal; 2..4 carry weak noise.
    std::mt19937 rng(44);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n_steps = 400;
    Eigen::MatrixXcd values(5, n_steps);
    for (int t = 0; t < n_steps; ++t) {
        const std::complex<double> shared(3.0 * u(rng), 3.0 * u(rng));
        values(0, t) = shared;
        values(1, t) = shared + 0.05 * std::complex<double>(u(rng), u(rng));
        for (int n = 2; n < 5; ++n)
            values(n, t) = 0.2 * std::complex<double>(u(rng), u(rng));
    }
    const VelocityField field(std::move(values), 600.0);
    const SpectralBasis basis = decompose(assemble_master(field, LagSet({0})));
    const ModeProfile p = mode_profile(basis, 0);
    const double weakest_dominant =
        std::min(p.abs_components(0, 0), p.abs_components(1, 0));
    for (int n = 2; n < 5; ++n)
        CHECK(p.abs_components(n, 0) < weakest_dominant);
}

TEST_CASE("spectrum export and basis cache round trip") {
    std::mt19937 rng(45);
    const Eigen::MatrixXcd h = random_hermitian(rng, 6);
    const SpectralBasis basis = decompose(hermitian_from(h, 3, {0, 1}));

    oracles::TempDir dir("basis");
    write_spectrum_csv(dir.file("spectrum.csv"), basis);
    write_mode_profiles_csv(dir.file("profiles.csv"), basis, 2);

    save_basis(dir.file("basis.bin"), basis);
    const SpectralBasis loaded = load_basis(dir.file("basis.bin"));
    CHECK(loaded.dimension() == basis.dimension());
    CHECK(loaded.n_turbines() == basis.n_turbines());
    CHECK(loaded.lags() == basis.lags());
    for (int i = 0; i < basis.dimension(); ++i)
        CHECK(loaded.eigenvalue(i) == basis.eigenvalue(i));
    CHECK(oracles::max_abs(loaded.eigenvectors() - basis.eigenvectors()) == 0.0);
}
