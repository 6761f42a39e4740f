#include "farmstate/conditional_risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

#include "farmstate/csv.hpp"
#include "farmstate/errors.hpp"
#include "farmstate/parallel.hpp"

namespace farmstate {

void BinningConfig::validate() const {
    if (n_state_bins < 2) throw ArgumentError("n_state_bins must be >= 2");
    if (n_return_bins < 1) throw ArgumentError("n_return_bins must be >= 1");
    if (min_samples_per_bin < 1)
        throw ArgumentError("min_samples_per_bin must be >= 1");
}

BinAxis BinAxis::over_range(double lo, double hi, int n) {
    if (n < 1) throw ArgumentError("bin axis needs at least 1 bin");
    if (!(lo <= hi)) throw ArgumentError("bin axis range is inverted");
    return BinAxis{lo, hi, n};
}

BinAxis BinAxis::symmetric(double max_abs, int n) {
    if (max_abs < 0.0) throw ArgumentError("symmetric axis needs max_abs >= 0");
    if (max_abs == 0.0) return BinAxis{0.0, 0.0, n};
    return BinAxis{-max_abs, max_abs, n};
}

int BinAxis::index(double v) const {
    if (hi <= lo) return 0;
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
    return std::min(std::max(b, 0), n - 1);
}

double BinAxis::center(int b) const {
    if (hi <= lo) return lo + b;  // degenerate axis: only bin 0 is occupied
    return lo + (b + 0.5) * (hi - lo) / n;
}

namespace {

// Time indices where both the state and the return are defined. The return
// at index t covers [t, t+lag].
std::vector<int> paired_steps(const StateSeries& state, const ReturnSeries& returns) {
    std::vector<int> steps;
    const int t_end = returns.size();
    for (int t = state.valid_from; t < t_end; ++t) {
        if (!state.valid_at_time(t)) continue;
        if (returns.valid[static_cast<size_t>(t)] == 0) continue;
        steps.push_back(t);
    }
    return steps;
}

ConditionalDensity bin_pairs(const StateSeries& state, const ReturnSeries& returns,
                             const std::vector<int>& steps, const BinAxis& state_axis,
                             const BinAxis& return_axis, int min_samples) {
    ConditionalDensity d;
    d.state_axis = state_axis;
    d.return_axis = return_axis;
    d.min_samples = min_samples;
    d.joint_counts = Eigen::MatrixXd::Zero(state_axis.n, return_axis.n);
    for (int t : steps) {
        const int sb = state_axis.index(state.at_time(t));
        const int rb = return_axis.index(returns.values(t));
        d.joint_counts(sb, rb) += 1.0;
    }
    d.total = static_cast<long long>(steps.size());

    d.marginal_state.resize(state_axis.n);
    d.conditional = Eigen::MatrixXd::Zero(state_axis.n, return_axis.n);
    d.support.assign(static_cast<size_t>(state_axis.n), 0);
    for (int b = 0; b < state_axis.n; ++b) {
        const double row = d.joint_counts.row(b).sum();
        d.marginal_state(b) = row / static_cast<double>(d.total);
        if (row >= min_samples) {
            d.support[static_cast<size_t>(b)] = 1;
            d.conditional.row(b) = d.joint_counts.row(b) / row;
        }
    }
    return d;
}

bool is_finite(double v) { return std::isfinite(v); }

}  // namespace

ConditionalDensity estimate_density(const StateSeries& state,
                                    const ReturnSeries& returns,
                                    const BinningConfig& cfg) {
    cfg.validate();
    const auto steps = paired_steps(state, returns);
    if (steps.empty())
        throw ArgumentError("no overlapping valid (state, return) samples");
    double s_min = std::numeric_limits<double>::infinity();
    double s_max = -s_min;
    double r_absmax = 0.0;
    for (int t : steps) {
        const double s = state.at_time(t);
        s_min = std::min(s_min, s);
        s_max = std::max(s_max, s);
        r_absmax = std::max(r_absmax, std::abs(returns.values(t)));
    }
    return bin_pairs(state, returns, steps,
                     BinAxis::over_range(s_min, s_max, cfg.n_state_bins),
                     BinAxis::symmetric(r_absmax, cfg.n_return_bins),
                     cfg.min_samples_per_bin);
}

ConditionalDensity estimate_density_with_axes(const StateSeries& state,
                                              const ReturnSeries& returns,
                                              const BinAxis& state_axis,
                                              const BinAxis& return_axis,
                                              int min_samples) {
    const auto steps = paired_steps(state, returns);
    if (steps.empty())
        throw ArgumentError("no overlapping valid (state, return) samples");
    return bin_pairs(state, returns, steps, state_axis, return_axis, min_samples);
}

UnconditionalStats unconditional_stats(const ReturnSeries& returns) {
    UnconditionalStats s;
    double sum = 0.0;
    for (int t = 0; t < returns.size(); ++t) {
        if (returns.valid[static_cast<size_t>(t)] == 0) continue;
        sum += returns.values(t);
        ++s.n_samples;
    }
    if (s.n_samples < 2)
        throw ArgumentError("need at least 2 valid return samples, have " +
                            std::to_string(s.n_samples));
    s.expected_return = sum / s.n_samples;
    double acc = 0.0;
    for (int t = 0; t < returns.size(); ++t) {
        if (returns.valid[static_cast<size_t>(t)] == 0) continue;
        const double d = returns.values(t) - s.expected_return;
        acc += d * d;
    }
    s.risk = acc / s.n_samples;
    return s;
}

ConditionalStats conditional_stats(const ConditionalDensity& density) {
    const int n_bins = density.state_axis.n;
    ConditionalStats out;
    out.expected_return = Eigen::VectorXd::Zero(n_bins);
    out.risk = Eigen::VectorXd::Zero(n_bins);
    out.supported = density.support;
    for (int b = 0; b < n_bins; ++b) {
        if (density.support[static_cast<size_t>(b)] == 0) continue;
        double mean = 0.0;
        for (int j = 0; j < density.return_axis.n; ++j)
            mean += density.conditional(b, j) * density.return_axis.center(j);
        double var = 0.0;
        for (int j = 0; j < density.return_axis.n; ++j) {
            const double d = density.return_axis.center(j) - mean;
            var += density.conditional(b, j) * d * d;
        }
        out.expected_return(b) = mean;
        out.risk(b) = var;
    }
    return out;
}

RiskReturnTable build_table(const VelocityField& field, const PowerSeries& power,
                            const SpectralBasis& basis, const LagSet& lagset,
                            const std::vector<int>& q_values,
                            const std::vector<int>& tau_values,
                            const BinningConfig& cfg, const TableOptions& opt) {
    cfg.validate();
    if (q_values.empty()) throw ArgumentError("q range must be non-empty");
    if (tau_values.empty()) throw ArgumentError("tau range must be non-empty");
    for (int q : q_values) {
        if (q < 1 || q > basis.dimension())
            throw ArgumentError("q=" + std::to_string(q) + " out of range");
        if (basis.splits_cluster(q))
            throw ArgumentError("q=" + std::to_string(q) +
                                " splits a degenerate eigenvalue cluster");
    }
    for (int tau : tau_values)
        if (tau < 1 || tau >= power.n_steps())
            throw ArgumentError("tau=" + std::to_string(tau) + " out of range");

    const size_t nq = q_values.size();
    const size_t nt = tau_values.size();

    std::vector<StateSeries> states(nq);
    parallel_for(nq, opt.threads, [&](size_t qi) {
        states[qi] = compute_state(field, basis, lagset,
                                   q_values[qi]);
    });
    std::vector<ReturnSeries> returns(nt);
    for (size_t ti = 0; ti < nt; ++ti)
        returns[ti] = compute_returns(power, tau_values[ti]);

    // The pairing only depends on tau: state validity is identical across q.
    std::vector<std::vector<int>> steps(nt);
    for (size_t ti = 0; ti < nt; ++ti)
        steps[ti] = paired_steps(states[0], returns[ti]);

    // Shared state axis over every sample any cell will bin; per-tau return
    // axes symmetric about zero.
    double s_min = std::numeric_limits<double>::infinity();
    double s_max = -s_min;
    std::vector<BinAxis> return_axes(nt);
    bool any = false;
    for (size_t ti = 0; ti < nt; ++ti) {
        double r_absmax = 0.0;
        for (int t : steps[ti]) {
            r_absmax = std::max(r_absmax, std::abs(returns[ti].values(t)));
            for (size_t qi = 0; qi < nq; ++qi) {
                const double s = states[qi].at_time(t);
                s_min = std::min(s_min, s);
                s_max = std::max(s_max, s);
            }
            any = true;
        }
        return_axes[ti] = BinAxis::symmetric(r_absmax, cfg.n_return_bins);
    }
    if (!any) throw ArgumentError("no overlapping valid (state, return) samples");

    RiskReturnTable table;
    table.q_values = q_values;
    table.tau_values = tau_values;
    table.state_axis = BinAxis::over_range(s_min, s_max, cfg.n_state_bins);
    table.return_axes = return_axes;
    table.state_centers.resize(static_cast<size_t>(cfg.n_state_bins));
    for (int b = 0; b < cfg.n_state_bins; ++b)
        table.state_centers[static_cast<size_t>(b)] = table.state_axis.center(b);
    table.cells.assign(nq, std::vector<std::vector<RiskReturnCell>>(
                               nt, std::vector<RiskReturnCell>(
                                       static_cast<size_t>(cfg.n_state_bins))));

    parallel_for(nq * nt, opt.threads, [&](size_t job) {
        const size_t qi = job / nt;
        const size_t ti = job % nt;
        const ConditionalDensity density =
            bin_pairs(states[qi], returns[ti], steps[ti], table.state_axis,
                      return_axes[ti], cfg.min_samples_per_bin);
        const ConditionalStats stats = conditional_stats(density);
        for (int b = 0; b < cfg.n_state_bins; ++b) {
            RiskReturnCell& cell = table.cells[qi][ti][static_cast<size_t>(b)];
            cell.samples =
                static_cast<long long>(density.joint_counts.row(b).sum());
            cell.supported = density.support[static_cast<size_t>(b)] != 0;
            if (!cell.supported) continue;
            cell.expected_return = stats.expected_return(b);
            cell.risk = stats.risk(b);
            if (cell.risk > 0.0) {
                cell.quotient = cell.expected_return / cell.risk;
                cell.quotient_defined = true;
            }
        }
    });
    return table;
}

OptimalPolicy optimize_policy(const RiskReturnTable& table) {
    OptimalPolicy policy;
    policy.q_values = table.q_values;
    policy.tau_values = table.tau_values;
    policy.state_axis = table.state_axis;
    for (int b = 0; b < table.n_state_bins(); ++b) {
        bool found = false;
        double best_aq = 0.0;
        int best_q = 0, best_tau = 0;
        for (size_t qi = 0; qi < table.q_values.size(); ++qi) {
            for (size_t ti = 0; ti < table.tau_values.size(); ++ti) {
                const RiskReturnCell& cell = table.cells[qi][ti][static_cast<size_t>(b)];
                if (!cell.quotient_defined) continue;
                const double aq = std::abs(cell.quotient);
                const int q = table.q_values[qi];
                const int tau = table.tau_values[ti];
                bool better = false;
                if (!found || aq > best_aq) {
                    better = true;
                } else if (aq == best_aq) {
                    // Deterministic tie-break: smallest tau, then smallest q.
                    better = tau < best_tau || (tau == best_tau && q < best_q);
                }
                if (better) {
                    found = true;
                    best_aq = aq;
                    best_q = q;
                    best_tau = tau;
                }
            }
        }
        if (found) {
            policy.entries.push_back(
                {b, table.state_centers[static_cast<size_t>(b)], best_q, best_tau,
                 best_aq});
        } else {
            policy.undecided_bins.push_back(b);
        }
    }
    return policy;
}

void write_joint_density_csv(const std::string& path,
                             const ConditionalDensity& density) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: s_bin_center,r_bin_center,joint_density\n";
    out << "s_bin_center,r_bin_center,joint_density\n";
    const double ws = density.state_axis.width() > 0.0 ? density.state_axis.width() : 1.0;
    const double wr = density.return_axis.width() > 0.0 ? density.return_axis.width() : 1.0;
    const double norm = 1.0 / (static_cast<double>(density.total) * ws * wr);
    for (int b = 0; b < density.state_axis.n; ++b) {
        for (int j = 0; j < density.return_axis.n; ++j) {
            out << csv::format_double(density.state_axis.center(b)) << ','
                << csv::format_double(density.return_axis.center(j)) << ','
                << csv::format_double(density.joint_counts(b, j) * norm) << "\n";
        }
    }
    if (!out) throw IoError("write failure: " + path);
}

void write_table_csv(const std::string& path, const RiskReturnTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: q,tau,s_bin_center,expected_return,risk,quotient,samples\n";
    out << "q,tau,s_bin_center,expected_return,risk,quotient,samples\n";
    for (size_t qi = 0; qi < table.q_values.size(); ++qi) {
        for (size_t ti = 0; ti < table.tau_values.size(); ++ti) {
            for (int b = 0; b < table.n_state_bins(); ++b) {
                const RiskReturnCell& cell = table.cells[qi][ti][static_cast<size_t>(b)];
                out << table.q_values[qi] << ',' << table.tau_values[ti] << ','
                    << csv::format_double(table.state_centers[static_cast<size_t>(b)])
                    << ',';
                if (cell.supported)
                    out << csv::format_double(cell.expected_return) << ','
                        << csv::format_double(cell.risk) << ',';
                else
                    out << "nan,nan,";
                if (cell.quotient_defined)
                    out << csv::format_double(cell.quotient);
                else
                    out << "nan";
                out << ',' << cell.samples << "\n";
            }
        }
    }
    if (!out) throw IoError("write failure: " + path);
}

RiskReturnTable read_table_csv(const std::string& path) {
    const std::string content = csv::read_file(path);
    RiskReturnTable table;
    std::vector<std::tuple<int, int, double, double, double, double, long long>> rows;
    size_t pos = 0;
    long long line_no = 0;
    bool header_seen = false;
    while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line(content.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != "q,tau,s_bin_center,expected_return,risk,quotient,samples")
                throw SchemaError(path + ": unexpected table header");
            header_seen = true;
            continue;
        }
        const auto fields = csv::split_fields(line);
        if (fields.size() != 7)
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": expected 7 fields");
        long long q = 0, tau = 0, samples = 0;
        double center = 0.0, er = 0.0, risk = 0.0, quot = 0.0;
        if (!csv::try_parse_index(fields[0], q) || !csv::try_parse_index(fields[1], tau) ||
            !csv::try_parse_double(fields[2], center) ||
            !csv::try_parse_double(fields[3], er) ||
            !csv::try_parse_double(fields[4], risk) ||
            !csv::try_parse_double(fields[5], quot) ||
            !csv::try_parse_index(fields[6], samples))
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": unparsable row");
        rows.emplace_back(static_cast<int>(q), static_cast<int>(tau), center, er,
                          risk, quot, samples);
    }
    if (rows.empty()) throw SchemaError(path + ": no table rows");

    for (const auto& row : rows) {
        const int q = std::get<0>(row);
        const int tau = std::get<1>(row);
        if (std::find(table.q_values.begin(), table.q_values.end(), q) ==
            table.q_values.end())
            table.q_values.push_back(q);
        if (std::find(table.tau_values.begin(), table.tau_values.end(), tau) ==
            table.tau_values.end())
            table.tau_values.push_back(tau);
    }
    const size_t nq = table.q_values.size();
    const size_t nt = table.tau_values.size();
    if (rows.size() % (nq * nt) != 0)
        throw SchemaError(path + ": inconsistent table shape");
    const size_t n_bins = rows.size() / (nq * nt);
    if (n_bins < 1) throw SchemaError(path + ": no state bins");

    table.state_centers.resize(n_bins);
    for (size_t b = 0; b < n_bins; ++b)
        table.state_centers[b] = std::get<2>(rows[b]);
    const double w = n_bins > 1 ? table.state_centers[1] - table.state_centers[0] : 1.0;
    table.state_axis = BinAxis{table.state_centers[0] - 0.5 * w,
                               table.state_centers[0] - 0.5 * w +
                                   w * static_cast<double>(n_bins),
                               static_cast<int>(n_bins)};
    table.cells.assign(nq, std::vector<std::vector<RiskReturnCell>>(
                               nt, std::vector<RiskReturnCell>(n_bins)));

    size_t idx = 0;
    for (size_t qi = 0; qi < nq; ++qi) {
        for (size_t ti = 0; ti < nt; ++ti) {
            for (size_t b = 0; b < n_bins; ++b, ++idx) {
                const auto& row = rows[idx];
                if (std::get<0>(row) != table.q_values[qi] ||
                    std::get<1>(row) != table.tau_values[ti])
                    throw SchemaError(path + ": rows out of order");
                RiskReturnCell& cell = table.cells[qi][ti][b];
                cell.samples = std::get<6>(row);
                cell.expected_return = std::get<3>(row);
                cell.risk = std::get<4>(row);
                cell.quotient = std::get<5>(row);
                cell.supported = is_finite(cell.expected_return) && is_finite(cell.risk);
                cell.quotient_defined = is_finite(cell.quotient);
                if (!cell.supported) cell.expected_return = cell.risk = 0.0;
                if (!cell.quotient_defined) cell.quotient = 0.0;
            }
        }
    }
    return table;
}

void write_policy_csv(const std::string& path, const OptimalPolicy& policy) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: s_bin_center,q_max,tau_max,abs_quotient\n";
    out << "s_bin_center,q_max,tau_max,abs_quotient\n";
    for (const auto& e : policy.entries) {
        out << csv::format_double(e.s_bin_center) << ',' << e.q_max << ','
            << e.tau_max << ',' << csv::format_double(e.abs_quotient) << "\n";
    }
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace farmstate
