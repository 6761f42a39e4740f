#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "farmstate/covariance.hpp"

namespace farmstate {

// Eigenpairs of the master matrix ordered by descending |eigenvalue|, with
// cumulative explained-variance fractions. Eigenvector components follow the
// master matrix flat index convention (lag-major, turbine-minor). Each
// eigenvector is phase-fixed: its largest-magnitude component is real and
// non-negative, which makes dumps byte-reproducible.
class SpectralBasis {
public:
    SpectralBasis(Eigen::VectorXd eigenvalues, Eigen::MatrixXcd eigenvectors,
                  int n_turbines, std::vector<int> lags);

    int dimension() const { return static_cast<int>(eigenvalues_.size()); }
    int n_modes() const { return static_cast<int>(eigenvectors_.cols()); }
    int n_turbines() const { return n_turbines_; }
    int n_lags() const { return static_cast<int>(lags_.size()); }
    const std::vector<int>& lags() const { return lags_; }

    double eigenvalue(int mode) const { return eigenvalues_(mode); }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    Eigen::VectorXcd eigenvector(int mode) const { return eigenvectors_.col(mode); }
    const Eigen::MatrixXcd& eigenvectors() const { return eigenvectors_; }

    double total_abs() const { return total_abs_; }
    const Eigen::VectorXd& cumulative_fraction() const { return cumulative_; }

    // True when truncating at order q would separate eigenvalues whose
    // magnitudes are numerically tied; the eigenvector split inside such a
    // cluster is solver-dependent, so q must cover the whole cluster.
    bool splits_cluster(int q, double rel_tol = 1e-10) const;
    int extend_to_cluster(int q, double rel_tol = 1e-10) const;

private:
    Eigen::VectorXd eigenvalues_;   // full spectrum, |.|-descending
    Eigen::MatrixXcd eigenvectors_; // dimension x n_modes
    Eigen::VectorXd cumulative_;
    double total_abs_ = 0.0;
    int n_turbines_ = 0;
    std::vector<int> lags_;
};

// Decomposes a Hermitian master matrix. n_modes = 0 keeps every eigenvector;
// eigenvalues and explained fractions always cover the full spectrum.
// Residual and orthonormality gates run before returning.
SpectralBasis decompose(const MasterMatrix& m, int n_modes = 0);

// Share of total |eigenvalue| mass carried by the first m modes, m in
// [1, dimension].
double explained_variance(const SpectralBasis& basis, int m);

// |component| of one eigenvector arranged by (turbine, lag); mode is 0-based.
struct ModeProfile {
    int mode = 0;
    std::vector<int> lags;
    Eigen::MatrixXd abs_components;  // n_turbines x n_lags
};

ModeProfile mode_profile(const SpectralBasis& basis, int mode);

// Plot-ready exports. Mode and turbine columns are 1-based, the lag column
// holds the actual lag value.
void write_spectrum_csv(const std::string& path, const SpectralBasis& basis);
void write_mode_profiles_csv(const std::string& path, const SpectralBasis& basis,
                             int n_modes);

// Binary cache of a basis (eigenvalues + retained eigenvectors), exact
// round-trip.
void save_basis(const std::string& path, const SpectralBasis& basis);
SpectralBasis load_basis(const std::string& path);

}  // namespace farmstate
