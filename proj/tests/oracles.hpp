// Test-only reference implementations, written as literal loops so they stay
// independent of the library's computation paths.
#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <complex>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "farmstate/covariance.hpp"
#include "farmstate/spectral.hpp"
#include "farmstate/timeseries.hpp"

namespace oracles {

// Whole-series mean per turbine, gap steps excluded.
inline Eigen::VectorXcd series_means(const farmstate::VelocityField& field) {
    Eigen::VectorXcd means(field.n_turbines());
    for (int i = 0; i < field.n_turbines(); ++i) {
        std::complex<double> sum = 0.0;
        int count = 0;
        for (int t = 0; t < field.n_steps(); ++t) {
            if (field.is_gap(t)) continue;
            sum += field.at(i, t);
            ++count;
        }
        means(i) = sum / static_cast<double>(count);
    }
    return means;
}

// Covariance of turbines (i, j) at lag pair (tau_k, tau_l): the average of
// (V_i(t+tau_k) - m_i) * conj(V_j(t+tau_l) - m_j) over every t for which both
// samples exist, with whole-series means. The signed t range makes the window
// depend only on tau_l - tau_k.
inline std::complex<double> brute_cov_entry(const farmstate::VelocityField& field,
                                            const Eigen::VectorXcd& means, int i,
                                            int tau_k, int j, int tau_l) {
    const int n = field.n_steps();
    const int t_lo = -std::min(tau_k, tau_l);
    const int t_hi = n - 1 - std::max(tau_k, tau_l);  // inclusive
    std::complex<double> acc = 0.0;
    int count = 0;
    for (int t = t_lo; t <= t_hi; ++t) {
        if (field.is_gap(t + tau_k) || field.is_gap(t + tau_l)) continue;
        acc += (field.at(i, t + tau_k) - means(i)) *
               std::conj(field.at(j, t + tau_l) - means(j));
        ++count;
    }
    return acc / static_cast<double>(count);
}

// Master matrix assembled entry by entry from brute_cov_entry, with the
// lag-major turbine-minor flat index.
inline Eigen::MatrixXcd brute_master(const farmstate::VelocityField& field,
                                     const std::vector<int>& lags) {
    const int nw = field.n_turbines();
    const int nl = static_cast<int>(lags.size());
    const Eigen::VectorXcd means = series_means(field);
    Eigen::MatrixXcd m(nw * nl, nw * nl);
    for (int k = 0; k < nl; ++k)
        for (int l = 0; l < nl; ++l)
            for (int i = 0; i < nw; ++i)
                for (int j = 0; j < nw; ++j)
                    m(k * nw + i, l * nw + j) =
                        brute_cov_entry(field, means, i, lags[static_cast<size_t>(k)],
                                        j, lags[static_cast<size_t>(l)]);
    return m;
}

// Literal farm-state formula: eigenvalue-weighted magnitudes of the plain
// double sum over turbines and lags, written exactly as a triple loop.
inline double brute_state_at(const farmstate::VelocityField& field,
                             const farmstate::SpectralBasis& basis,
                             const std::vector<int>& lags, int q, int t) {
    const int nw = field.n_turbines();
    const int nl = static_cast<int>(lags.size());
    double numer = 0.0;
    double denom = 0.0;
    for (int i = 0; i < q; ++i) {
        std::complex<double> inner = 0.0;
        for (int j = 0; j < nw; ++j)
            for (int k = 0; k < nl; ++k)
                inner += basis.eigenvectors()(k * nw + j, i) *
                         field.at(j, t - lags[static_cast<size_t>(k)]);
        numer += std::abs(basis.eigenvalue(i) * inner);
        denom += std::abs(basis.eigenvalue(i));
    }
    return numer / denom;
}

inline double max_abs(const Eigen::MatrixXcd& m) {
    double v = 0.0;
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) v = std::max(v, std::abs(m(r, c)));
    return v;
}

// Random complex field with O(1) variance around a nonzero mean.
inline farmstate::VelocityField random_field(std::mt19937& rng, int n_turbines,
                                             int n_steps) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXcd values(n_turbines, n_steps);
    for (int t = 0; t < n_steps; ++t)
        for (int n = 0; n < n_turbines; ++n)
            values(n, t) = std::complex<double>(5.0 + u(rng), 2.0 + u(rng));
    return farmstate::VelocityField(std::move(values), 600.0);
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("farmstate_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace oracles
