#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "farmstate/state.hpp"
#include "farmstate/timeseries.hpp"

namespace farmstate {

struct BinningConfig {
    int n_state_bins = 50;
    // Odd by default so that r = 0 is the center of the middle bin (return
    // axes span a symmetric range around zero).
    int n_return_bins = 101;
    int min_samples_per_bin = 30;

    void validate() const;
};

// Equal-width binning over [lo, hi]. A zero-width range collapses every
// sample into bin 0, whose center is the single observed value.
struct BinAxis {
    double lo = 0.0;
    double hi = 0.0;
    int n = 1;

    static BinAxis over_range(double lo, double hi, int n);
    static BinAxis symmetric(double max_abs, int n);

    double width() const { return hi > lo ? (hi - lo) / n : 0.0; }
    int index(double v) const;
    double center(int b) const;
};

// Histogram estimate of the joint density of (S, r) and the derived
// conditional rows. Rows are state bins, columns return bins.
struct ConditionalDensity {
    BinAxis state_axis;
    BinAxis return_axis;
    Eigen::MatrixXd joint_counts;
    long long total = 0;
    Eigen::VectorXd marginal_state;  // joint row sums / total
    Eigen::MatrixXd conditional;     // row-normalized joint; zero rows where unsupported
    std::vector<std::uint8_t> support;
    int min_samples = 1;
};

// Pairs S(t) with the return realized over [t, t+lag] and bins the result.
// Axes span the paired sample set: the state axis covers its observed range,
// the return axis is symmetric about zero.
ConditionalDensity estimate_density(const StateSeries& state,
                                    const ReturnSeries& returns,
                                    const BinningConfig& cfg);

// Same estimator with caller-supplied axes (shared binning across a table).
ConditionalDensity estimate_density_with_axes(const StateSeries& state,
                                              const ReturnSeries& returns,
                                              const BinAxis& state_axis,
                                              const BinAxis& return_axis,
                                              int min_samples);

struct UnconditionalStats {
    double expected_return = 0.0;
    double risk = 0.0;  // biased sample variance
    int n_samples = 0;
};

UnconditionalStats unconditional_stats(const ReturnSeries& returns);

// Per-state-bin expected return and risk from the conditional rows, using
// bin centers. Unsupported bins carry no value.
struct ConditionalStats {
    Eigen::VectorXd expected_return;
    Eigen::VectorXd risk;
    std::vector<std::uint8_t> supported;
};

ConditionalStats conditional_stats(const ConditionalDensity& density);

struct RiskReturnCell {
    double expected_return = 0.0;
    double risk = 0.0;
    double quotient = 0.0;
    long long samples = 0;
    bool supported = false;
    bool quotient_defined = false;  // supported and risk > 0
};

// Conditional risk-return surfaces over the (q, tau) grid with one shared
// state axis, so a state bin means the same physical S interval everywhere.
struct RiskReturnTable {
    std::vector<int> q_values;
    std::vector<int> tau_values;
    BinAxis state_axis;
    std::vector<double> state_centers;  // authoritative for exports
    std::vector<BinAxis> return_axes;   // one per tau
    // cells[q_index][tau_index][state_bin]
    std::vector<std::vector<std::vector<RiskReturnCell>>> cells;

    int n_state_bins() const { return static_cast<int>(state_centers.size()); }
    const RiskReturnCell& cell(int qi, int ti, int bin) const {
        return cells[static_cast<size_t>(qi)][static_cast<size_t>(ti)]
                    [static_cast<size_t>(bin)];
    }
};

struct TableOptions {
    int threads = 1;
};

RiskReturnTable build_table(const VelocityField& field, const PowerSeries& power,
                            const SpectralBasis& basis, const LagSet& lagset,
                            const std::vector<int>& q_values,
                            const std::vector<int>& tau_values,
                            const BinningConfig& cfg,
                            const TableOptions& opt = {});

struct PolicyEntry {
    int state_bin = 0;
    double s_bin_center = 0.0;
    int q_max = 0;
    int tau_max = 0;
    double abs_quotient = 0.0;
};

struct OptimalPolicy {
    std::vector<PolicyEntry> entries;     // decided bins, ascending bin index
    std::vector<int> undecided_bins;      // no supported cell with defined quotient
    std::vector<int> q_values;
    std::vector<int> tau_values;
    BinAxis state_axis;
};

// Per state bin, the (q, tau) cell maximizing |quotient| among supported
// cells with defined quotients. Ties go to the smallest tau, then smallest q.
OptimalPolicy optimize_policy(const RiskReturnTable& table);

void write_joint_density_csv(const std::string& path,
                             const ConditionalDensity& density);
void write_table_csv(const std::string& path, const RiskReturnTable& table);
// Rebuilds a table from its CSV export; support and quotient flags are
// recovered from field finiteness.
RiskReturnTable read_table_csv(const std::string& path);
void write_policy_csv(const std::string& path, const OptimalPolicy& policy);

}  // namespace farmstate
