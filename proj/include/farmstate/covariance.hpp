#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "farmstate/timeseries.hpp"

namespace farmstate {

// Set of time lags used to build the lagged covariance matrix. The first lag
// is always 0 so that the zero-lag block anchors the Toeplitz structure.
class LagSet {
public:
    explicit LagSet(std::vector<int> lags);
    static LagSet contiguous(int max_lag);

    int n_lags() const { return static_cast<int>(lags_.size()); }
    int at(int k) const { return lags_[static_cast<size_t>(k)]; }
    int max_lag() const { return lags_.back(); }
    const std::vector<int>& lags() const { return lags_; }

private:
    std::vector<int> lags_;
};

// One N_W x N_W covariance block for a fixed lag difference d: entry (i, j)
// is the time average of (V_i(t) - mean_i) * conj(V_j(t+d) - mean_j) over the
// maximal overlap window, with whole-series per-turbine means.
struct CovarianceBlock {
    Eigen::MatrixXcd entries;
    int lag_diff = 0;
};

// Lagged covariance matrix over all (turbine, lag) pairs. Flat index
// convention: row/col = lag_index * n_turbines + turbine_index. Immutable
// once assembled.
struct MasterMatrix {
    Eigen::MatrixXcd entries;
    int n_turbines = 0;
    std::vector<int> lags;

    // Distinct non-negative lag-difference blocks actually computed; the rest
    // of the matrix is their conjugate-transposed mirror.
    std::vector<CovarianceBlock> block_cache;

    // Max |M - M^H| measured before the enforced (M + M^H)/2 step.
    double presym_hermitian_dev = 0.0;
    bool presym_available = false;

    // Max deviation between each assembled block and a literal per-lag-pair
    // re-evaluation that uses shifted-window means (the stationarity
    // approximation error). Populated when measure_toeplitz is enabled.
    double toeplitz_stationarity_dev = 0.0;
    bool stationarity_available = false;

    int dimension() const { return static_cast<int>(entries.rows()); }
    int n_lags() const { return static_cast<int>(lags.size()); }
    double max_abs_entry() const;

    // Wraps an existing Hermitian matrix (tests, cache loads).
    static MasterMatrix from_dense(Eigen::MatrixXcd m, int n_turbines,
                                   std::vector<int> lags);
};

struct StructureReport {
    int dimension = 0;
    int n_turbines = 0;
    int n_lags = 0;
    double max_abs_entry = 0.0;

    double hermitian_dev_abs = 0.0;
    double hermitian_dev_rel = 0.0;
    double presym_hermitian_dev_abs = 0.0;
    double presym_hermitian_dev_rel = 0.0;
    bool presym_available = false;

    // Entry-level comparison of block positions sharing a lag difference.
    // Zero for matrices assembled through the block cache.
    double toeplitz_consistency_abs = 0.0;
    double toeplitz_consistency_rel = 0.0;
    bool toeplitz_warning = false;
    double warn_threshold_rel = 1e-6;

    // Stationarity-approximation deviation recorded at assembly time.
    double toeplitz_stationarity_abs = 0.0;
    double toeplitz_stationarity_rel = 0.0;
    bool stationarity_available = false;
};

struct AssembleOptions {
    bool measure_toeplitz = true;
    int threads = 1;
};

CovarianceBlock compute_block(const VelocityField& field, int lag_diff);

MasterMatrix assemble_master(const VelocityField& field, const LagSet& lagset,
                             const AssembleOptions& opt = {});

StructureReport verify_structure(const MasterMatrix& m,
                                 double warn_threshold_rel = 1e-6);

// Binary cache format: 16-byte header (magic "WFMM", u32 dimension, 8
// reserved zero bytes), then row-major little-endian f64 pairs (re, im).
void save_master(const std::string& path, const MasterMatrix& m);
MasterMatrix load_master(const std::string& path, int n_turbines,
                         const LagSet& lagset);

}  // namespace farmstate
