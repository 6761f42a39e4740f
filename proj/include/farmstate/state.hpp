#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "farmstate/spectral.hpp"
#include "farmstate/timeseries.hpp"

namespace farmstate {

// Scalar farm state per time step for one truncation order q:
//
//   S(t) = sum_{i<=q} | lambda_i * sum_{j,k} w_i[(j,k)] * V_j(t - tau_k) |
//          / sum_{i<=q} |lambda_i|
//
// where w_i is eigenvector i and the (j, k) sum runs over the flat
// (lag-major, turbine-minor) index. The state looks backward: it is defined
// from valid_from = max lag onward. Values at steps whose lag window touches
// a gap are flagged invalid and stored as zero.
struct StateSeries {
    Eigen::VectorXd values;           // index 0 corresponds to t = valid_from
    std::vector<std::uint8_t> valid;  // empty means every step is valid
    int q = 1;
    int valid_from = 0;

    int size() const { return static_cast<int>(values.size()); }
    // Value by absolute time index t in [valid_from, n_steps).
    double at_time(int t) const { return values(t - valid_from); }
    bool valid_at_time(int t) const {
        if (t < valid_from || t - valid_from >= size()) return false;
        return valid.empty() || valid[static_cast<size_t>(t - valid_from)] != 0;
    }
    int valid_count() const;
};

StateSeries compute_state(const VelocityField& field, const SpectralBasis& basis,
                          const LagSet& lagset, int q);

struct StateSummary {
    double min = 0.0;
    double max = 0.0;
    std::vector<long long> counts;
    std::vector<double> probability;  // counts / total, sums to 1
    std::vector<double> bin_centers;
};

StateSummary state_summary(const StateSeries& series, int n_bins);

// Fig.-2-style export, schema t,q,S; only valid steps are written.
void write_state_csv(const std::string& path,
                     const std::vector<StateSeries>& series_per_q);

}  // namespace farmstate
