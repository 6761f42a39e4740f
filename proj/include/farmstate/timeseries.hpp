#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace farmstate {

// Horizontal wind velocity per turbine per time step, stored as one complex
// number per entry: real part is the x component, imaginary part the y
// component, in m/s. Immutable after construction and safe to share across
// threads.
class VelocityField {
public:
    // gap_mask marks whole time steps whose samples are missing; entries at
    // flagged steps are stored as zero. An empty mask means no gaps.
    VelocityField(Eigen::MatrixXcd values, double sample_interval_s,
                  std::vector<std::uint8_t> gap_mask = {});

    int n_turbines() const { return static_cast<int>(values_.rows()); }
    int n_steps() const { return static_cast<int>(values_.cols()); }
    double sample_interval_s() const { return sample_interval_s_; }

    const Eigen::MatrixXcd& values() const { return values_; }
    std::complex<double> at(int turbine, int step) const {
        return values_(turbine, step);
    }

    bool has_gaps() const { return !gap_mask_.empty(); }
    bool is_gap(int step) const {
        return !gap_mask_.empty() && gap_mask_[static_cast<size_t>(step)] != 0;
    }
    const std::vector<std::uint8_t>& gap_mask() const { return gap_mask_; }

private:
    Eigen::MatrixXcd values_;  // n_turbines x n_steps
    double sample_interval_s_;
    std::vector<std::uint8_t> gap_mask_;
};

// Total farm power per time step, kW. floor_epsilon is the threshold below
// which returns are left undefined (division guard).
class PowerSeries {
public:
    PowerSeries(Eigen::VectorXd values, double floor_epsilon,
                std::vector<std::uint8_t> gap_mask = {});

    int n_steps() const { return static_cast<int>(values_.size()); }
    double at(int step) const { return values_(step); }
    const Eigen::VectorXd& values() const { return values_; }
    double floor_epsilon() const { return floor_epsilon_; }

    bool has_gaps() const { return !gap_mask_.empty(); }
    bool is_gap(int step) const {
        return !gap_mask_.empty() && gap_mask_[static_cast<size_t>(step)] != 0;
    }

private:
    Eigen::VectorXd values_;
    double floor_epsilon_;
    std::vector<std::uint8_t> gap_mask_;
};

// Percentage power return r(t) = (P(t+lag) - P(t)) / P(t) for a fixed lag in
// steps. values[t] is only meaningful where valid[t] is set; invalid slots
// hold zero.
struct ReturnSeries {
    Eigen::VectorXd values;             // length n_steps - lag
    std::vector<std::uint8_t> valid;    // same length
    int lag = 1;

    int size() const { return static_cast<int>(values.size()); }
    int valid_count() const;
};

struct IngestOptions {
    // Reject files with missing samples by default. When true, empty or
    // non-finite cells flag the whole step as a gap instead.
    bool allow_gaps = false;
    // floor_epsilon = floor_epsilon_rel * max observed power.
    double floor_epsilon_rel = 1e-6;
    double sample_interval_s = 600.0;
    // When >= 0, the loaded series length must match exactly.
    long long expected_steps = -1;
};

// Wide-format velocity CSV: header "t,vx_1,vy_1,...,vx_N,vy_N", one row per
// step, t consecutive from 0. Lines starting with '#' are comments.
VelocityField load_velocity_field(const std::string& path,
                                  const IngestOptions& opt = {});

// Power CSV: header "t,power_kw".
PowerSeries load_power_series(const std::string& path,
                              const IngestOptions& opt = {});

void write_velocity_csv(const std::string& path, const VelocityField& field);
void write_power_csv(const std::string& path, const PowerSeries& power);

ReturnSeries compute_returns(const PowerSeries& power, int lag);

}  // namespace farmstate
