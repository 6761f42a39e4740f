#include "farmstate/state.hpp"

#include <cmath>
#include <fstream>

#include "farmstate/csv.hpp"
#include "farmstate/errors.hpp"

namespace farmstate {

int StateSeries::valid_count() const {
    if (valid.empty()) return size();
    int n = 0;
    for (auto v : valid) n += (v != 0);
    return n;
}

StateSeries compute_state(const VelocityField& field, const SpectralBasis& basis,
                          const LagSet& lagset, int q) {
    if (q < 1 || q > basis.dimension())
        throw ArgumentError("state order q=" + std::to_string(q) +
                            " out of range [1, " + std::to_string(basis.dimension()) + "]");
    if (q > basis.n_modes())
        throw ArgumentError("basis retains only " + std::to_string(basis.n_modes()) +
                            " eigenvectors, q=" + std::to_string(q) + " unavailable");
    if (basis.splits_cluster(q))
        throw ArgumentError(
            "state order q=" + std::to_string(q) +
            " splits a degenerate eigenvalue cluster; extend q to " +
            std::to_string(basis.extend_to_cluster(q)));
    if (lagset.n_lags() != basis.n_lags() ||
        lagset.lags() != basis.lags())
        throw ArgumentError("lag set does not match the basis construction");
    if (field.n_turbines() != basis.n_turbines())
        throw ArgumentError("turbine count does not match the basis");

    const int n_steps = field.n_steps();
    const int valid_from = lagset.max_lag();
    if (valid_from >= n_steps)
        throw ArgumentError("no time steps remain after lag trimming");

    const int n_out = n_steps - valid_from;
    const int n_turbines = field.n_turbines();
    const int n_lags = lagset.n_lags();

    double denom = 0.0;
    for (int i = 0; i < q; ++i) denom += std::abs(basis.eigenvalue(i));
    if (denom <= 0.0)
        throw ArgumentError("zero total weight: the leading q eigenvalues vanish");

    StateSeries out;
    out.q = q;
    out.valid_from = valid_from;
    out.values = Eigen::VectorXd::Zero(n_out);
    bool any_invalid = false;
    std::vector<std::uint8_t> valid(static_cast<size_t>(n_out), 1);

    for (int t = valid_from; t < n_steps; ++t) {
        if (field.has_gaps()) {
            bool gap = false;
            for (int k = 0; k < n_lags && !gap; ++k)
                gap = field.is_gap(t - lagset.at(k));
            if (gap) {
                valid[static_cast<size_t>(t - valid_from)] = 0;
                any_invalid = true;
                continue;
            }
        }
        // Fixed reduction order: modes ascending, flat index ascending inside
        // each projection, so results are reproducible bit for bit.
        double numer = 0.0;
        for (int i = 0; i < q; ++i) {
            std::complex<double> proj = 0.0;
            for (int k = 0; k < n_lags; ++k) {
                const int ts = t - lagset.at(k);
                for (int j = 0; j < n_turbines; ++j)
                    proj += basis.eigenvectors()(k * n_turbines + j, i) *
                            field.at(j, ts);
            }
            numer += std::abs(basis.eigenvalue(i) * proj);
        }
        out.values(t - valid_from) = numer / denom;
    }
    if (any_invalid) out.valid = std::move(valid);
    return out;
}

StateSummary state_summary(const StateSeries& series, int n_bins) {
    if (n_bins < 1) throw ArgumentError("histogram needs at least 1 bin");
    if (series.valid_count() == 0) throw ArgumentError("empty state series");

    StateSummary s;
    bool first = true;
    for (int idx = 0; idx < series.size(); ++idx) {
        if (!series.valid.empty() && series.valid[static_cast<size_t>(idx)] == 0)
            continue;
        const double v = series.values(idx);
        if (first) { s.min = s.max = v; first = false; }
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }

    s.counts.assign(static_cast<size_t>(n_bins), 0);
    s.bin_centers.resize(static_cast<size_t>(n_bins));
    const double width = s.max - s.min;
    for (int b = 0; b < n_bins; ++b)
        s.bin_centers[static_cast<size_t>(b)] =
            width > 0.0 ? s.min + (b + 0.5) * width / n_bins : s.min + b;

    long long total = 0;
    for (int idx = 0; idx < series.size(); ++idx) {
        if (!series.valid.empty() && series.valid[static_cast<size_t>(idx)] == 0)
            continue;
        int b = 0;
        if (width > 0.0) {
            b = static_cast<int>((series.values(idx) - s.min) / width * n_bins);
            b = std::min(std::max(b, 0), n_bins - 1);
        }
        ++s.counts[static_cast<size_t>(b)];
        ++total;
    }
    s.probability.resize(static_cast<size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b)
        s.probability[static_cast<size_t>(b)] =
            static_cast<double>(s.counts[static_cast<size_t>(b)]) /
            static_cast<double>(total);
    return s;
}

void write_state_csv(const std::string& path,
                     const std::vector<StateSeries>& series_per_q) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: t,q,S\n";
    out << "t,q,S\n";
    for (const auto& series : series_per_q) {
        for (int idx = 0; idx < series.size(); ++idx) {
            if (!series.valid.empty() && series.valid[static_cast<size_t>(idx)] == 0)
                continue;
            out << (series.valid_from + idx) << ',' << series.q << ','
                << csv::format_double(series.values(idx)) << "\n";
        }
    }
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace farmstate
