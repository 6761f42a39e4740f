#include "farmstate/timeseries.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "farmstate/csv.hpp"
#include "farmstate/errors.hpp"

namespace farmstate {

namespace {

// Splits a file into lines, dropping '#' comment lines and a trailing empty
// line. Keeps 1-based physical line numbers for error messages.
struct Line {
    std::string_view text;
    long long number;
};

std::vector<Line> content_lines(const std::string& content) {
    std::vector<Line> lines;
    long long number = 0;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t eol = content.find('\n', pos);
        std::string_view line;
        if (eol == std::string::npos) {
            line = std::string_view(content).substr(pos);
            pos = content.size() + 1;
        } else {
            line = std::string_view(content).substr(pos, eol - pos);
            pos = eol + 1;
        }
        ++number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() && pos > content.size()) break;
        if (!line.empty() && line.front() == '#') continue;
        lines.push_back({line, number});
    }
    return lines;
}

void check_step_index(std::string_view field, long long expected,
                      long long line_number) {
    long long t = 0;
    if (!csv::try_parse_index(field, t))
        throw ParseError("line " + std::to_string(line_number) +
                         ": cannot parse step index '" + std::string(field) +
                         "'");
    if (t != expected)
        throw ValidationError(
            "line " + std::to_string(line_number) + ": step index " +
            std::to_string(t) + " out of order, expected " +
            std::to_string(expected) + " (t column must be 0,1,2,... consecutive)");
}

}  // namespace

VelocityField::VelocityField(Eigen::MatrixXcd values, double sample_interval_s,
                             std::vector<std::uint8_t> gap_mask)
    : values_(std::move(values)),
      sample_interval_s_(sample_interval_s),
      gap_mask_(std::move(gap_mask)) {
    if (values_.rows() < 1) throw ValidationError("velocity field needs at least 1 turbine");
    if (values_.cols() < 2) throw ValidationError("velocity field needs at least 2 steps");
    if (!gap_mask_.empty() &&
        gap_mask_.size() != static_cast<size_t>(values_.cols()))
        throw ArgumentError("gap mask length does not match step count");
    for (int t = 0; t < values_.cols(); ++t) {
        if (is_gap(t)) continue;
        for (int n = 0; n < values_.rows(); ++n) {
            const auto v = values_(n, t);
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw ValidationError("non-finite velocity at turbine " +
                                      std::to_string(n + 1) + ", step " +
                                      std::to_string(t));
        }
    }
}

PowerSeries::PowerSeries(Eigen::VectorXd values, double floor_epsilon,
                         std::vector<std::uint8_t> gap_mask)
    : values_(std::move(values)),
      floor_epsilon_(floor_epsilon),
      gap_mask_(std::move(gap_mask)) {
    if (!gap_mask_.empty() &&
        gap_mask_.size() != static_cast<size_t>(values_.size()))
        throw ArgumentError("gap mask length does not match step count");
    for (int t = 0; t < values_.size(); ++t) {
        if (is_gap(t)) continue;
        if (!std::isfinite(values_(t)))
            throw ValidationError("non-finite power at step " + std::to_string(t));
        if (values_(t) < 0.0)
            throw ValidationError("negative power at step " + std::to_string(t));
    }
    if (floor_epsilon_ < 0.0) throw ArgumentError("floor_epsilon must be >= 0");
}

int ReturnSeries::valid_count() const {
    int n = 0;
    for (auto v : valid) n += (v != 0);
    return n;
}

VelocityField load_velocity_field(const std::string& path,
                                  const IngestOptions& opt) {
    const std::string content = csv::read_file(path);
    const auto lines = content_lines(content);
    if (lines.empty()) throw SchemaError(path + ": empty file");

    const auto header = csv::split_fields(lines[0].text);
    if (header.size() < 3 || header[0] != "t" || header.size() % 2 != 1)
        throw SchemaError(path + ": header must be t,vx_1,vy_1,...,vx_N,vy_N");
    const int n_turbines = static_cast<int>((header.size() - 1) / 2);
    for (int n = 0; n < n_turbines; ++n) {
        const std::string vx = "vx_" + std::to_string(n + 1);
        const std::string vy = "vy_" + std::to_string(n + 1);
        if (header[1 + 2 * n] != vx || header[2 + 2 * n] != vy)
            throw SchemaError(path + ": header column " + std::to_string(2 + 2 * n) +
                              " must be " + vx + "," + vy);
    }

    const long long n_steps = static_cast<long long>(lines.size()) - 1;
    if (n_steps < 2) throw SchemaError(path + ": needs at least 2 data rows");
    if (opt.expected_steps >= 0 && n_steps != opt.expected_steps)
        throw SchemaError(path + ": expected " + std::to_string(opt.expected_steps) +
                          " steps, found " + std::to_string(n_steps));

    Eigen::MatrixXcd values(n_turbines, n_steps);
    std::vector<std::uint8_t> gap_mask;
    bool any_gap = false;

    for (long long t = 0; t < n_steps; ++t) {
        const auto& line = lines[static_cast<size_t>(t) + 1];
        const auto fields = csv::split_fields(line.text);
        if (fields.size() != header.size())
            throw ParseError(path + ": line " + std::to_string(line.number) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
        check_step_index(fields[0], t, line.number);

        bool row_gap = false;
        for (int n = 0; n < n_turbines && !row_gap; ++n) {
            for (int c = 0; c < 2; ++c) {
                const auto field = fields[static_cast<size_t>(1 + 2 * n + c)];
                double v = 0.0;
                const bool parsed = csv::try_parse_double(field, v);
                if (parsed && std::isfinite(v)) continue;
                if (!parsed && !field.empty())
                    throw ParseError(path + ": line " + std::to_string(line.number) +
                                     ": cannot parse value '" + std::string(field) + "'");
                // Empty or non-finite cell: a gap when allowed, else an error.
                if (!opt.allow_gaps)
                    throw ValidationError(
                        path + ": non-finite or missing velocity at turbine " +
                        std::to_string(n + 1) + ", step " + std::to_string(t) +
                        " (line " + std::to_string(line.number) + ")");
                row_gap = true;
                break;
            }
        }
        if (row_gap) {
            if (gap_mask.empty()) gap_mask.assign(static_cast<size_t>(n_steps), 0);
            gap_mask[static_cast<size_t>(t)] = 1;
            any_gap = true;
            values.col(t).setZero();
            continue;
        }
        for (int n = 0; n < n_turbines; ++n) {
            double vx = 0.0, vy = 0.0;
            csv::try_parse_double(fields[static_cast<size_t>(1 + 2 * n)], vx);
            csv::try_parse_double(fields[static_cast<size_t>(2 + 2 * n)], vy);
            values(n, t) = std::complex<double>(vx, vy);
        }
    }
    if (!any_gap) gap_mask.clear();
    return VelocityField(std::move(values), opt.sample_interval_s, std::move(gap_mask));
}

PowerSeries load_power_series(const std::string& path, const IngestOptions& opt) {
    const std::string content = csv::read_file(path);
    const auto lines = content_lines(content);
    if (lines.empty()) throw SchemaError(path + ": empty file");

    const auto header = csv::split_fields(lines[0].text);
    if (header.size() != 2 || header[0] != "t" || header[1] != "power_kw")
        throw SchemaError(path + ": header must be t,power_kw");

    const long long n_steps = static_cast<long long>(lines.size()) - 1;
    if (n_steps < 1) throw SchemaError(path + ": no data rows");
    if (opt.expected_steps >= 0 && n_steps != opt.expected_steps)
        throw SchemaError(path + ": expected " + std::to_string(opt.expected_steps) +
                          " steps, found " + std::to_string(n_steps));

    Eigen::VectorXd values(n_steps);
    std::vector<std::uint8_t> gap_mask;
    bool any_gap = false;

    for (long long t = 0; t < n_steps; ++t) {
        const auto& line = lines[static_cast<size_t>(t) + 1];
        const auto fields = csv::split_fields(line.text);
        if (fields.size() != 2)
            throw ParseError(path + ": line " + std::to_string(line.number) +
                             ": expected 2 fields, found " + std::to_string(fields.size()));
        check_step_index(fields[0], t, line.number);

        double p = 0.0;
        const bool parsed = csv::try_parse_double(fields[1], p);
        if (!parsed && !fields[1].empty())
            throw ParseError(path + ": line " + std::to_string(line.number) +
                             ": cannot parse value '" + std::string(fields[1]) + "'");
        if (!parsed || !std::isfinite(p)) {
            if (!opt.allow_gaps)
                throw ValidationError(path + ": non-finite or missing power at step " +
                                      std::to_string(t) + " (line " +
                                      std::to_string(line.number) + ")");
            if (gap_mask.empty()) gap_mask.assign(static_cast<size_t>(n_steps), 0);
            gap_mask[static_cast<size_t>(t)] = 1;
            any_gap = true;
            values(t) = 0.0;
            continue;
        }
        if (p < 0.0)
            throw ValidationError(path + ": negative power at step " + std::to_string(t) +
                                  " (line " + std::to_string(line.number) + ")");
        values(t) = p;
    }
    if (!any_gap) gap_mask.clear();

    double max_power = 0.0;
    for (long long t = 0; t < n_steps; ++t) {
        const bool gap = !gap_mask.empty() && gap_mask[static_cast<size_t>(t)] != 0;
        if (!gap) max_power = std::max(max_power, values(t));
    }
    return PowerSeries(std::move(values), opt.floor_epsilon_rel * max_power,
                       std::move(gap_mask));
}

void write_velocity_csv(const std::string& path, const VelocityField& field) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: t,vx_1,vy_1,...,vx_" << field.n_turbines() << ",vy_"
        << field.n_turbines() << "\n";
    out << "t";
    for (int n = 0; n < field.n_turbines(); ++n)
        out << ",vx_" << (n + 1) << ",vy_" << (n + 1);
    out << "\n";
    for (int t = 0; t < field.n_steps(); ++t) {
        out << t;
        if (field.is_gap(t)) {
            for (int n = 0; n < field.n_turbines(); ++n) out << ",,";
        } else {
            for (int n = 0; n < field.n_turbines(); ++n) {
                const auto v = field.at(n, t);
                out << ',' << csv::format_double(v.real()) << ','
                    << csv::format_double(v.imag());
            }
        }
        out << "\n";
    }
    if (!out) throw IoError("write failure: " + path);
}

void write_power_csv(const std::string& path, const PowerSeries& power) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: t,power_kw\n";
    out << "t,power_kw\n";
    for (int t = 0; t < power.n_steps(); ++t) {
        out << t << ',';
        if (power.is_gap(t))
            out << "";
        else
            out << csv::format_double(power.at(t));
        out << "\n";
    }
    if (!out) throw IoError("write failure: " + path);
}

ReturnSeries compute_returns(const PowerSeries& power, int lag) {
    const int n = power.n_steps();
    if (lag < 1 || lag >= n)
        throw ArgumentError("return lag " + std::to_string(lag) +
                            " out of range [1, " + std::to_string(n - 1) + ")");
    ReturnSeries rs;
    rs.lag = lag;
    rs.values = Eigen::VectorXd::Zero(n - lag);
    rs.valid.assign(static_cast<size_t>(n - lag), 0);
    const double eps = power.floor_epsilon();
    for (int t = 0; t + lag < n; ++t) {
        if (power.is_gap(t) || power.is_gap(t + lag)) continue;
        const double p0 = power.at(t);
        if (p0 < eps || p0 <= 0.0) continue;
        rs.values(t) = (power.at(t + lag) - p0) / p0;
        rs.valid[static_cast<size_t>(t)] = 1;
    }
    return rs;
}

}  // namespace farmstate
