#include "farmstate/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "farmstate/errors.hpp"
#include "farmstate/parallel.hpp"

namespace farmstate {

namespace {

// Per-turbine series centered on the whole-series mean, with gap steps zeroed
// so that any product touching a gap drops out of the sums.
struct CenteredField {
    std::vector<Eigen::VectorXcd> rows;
    std::vector<std::uint8_t> gaps;  // empty when the field has none
    int n_steps = 0;

    bool is_gap(int t) const {
        return !gaps.empty() && gaps[static_cast<size_t>(t)] != 0;
    }
    // Number of (t, t+d) pairs with both steps present, d >= 0.
    int pair_count(int d) const {
        if (gaps.empty()) return n_steps - d;
        int c = 0;
        for (int t = 0; t + d < n_steps; ++t)
            if (!is_gap(t) && !is_gap(t + d)) ++c;
        return c;
    }
};

CenteredField center_field(const VelocityField& field) {
    CenteredField cf;
    cf.n_steps = field.n_steps();
    cf.gaps = field.gap_mask();
    cf.rows.reserve(static_cast<size_t>(field.n_turbines()));
    for (int n = 0; n < field.n_turbines(); ++n) {
        std::complex<double> sum = 0.0;
        int count = 0;
        for (int t = 0; t < cf.n_steps; ++t) {
            if (cf.is_gap(t)) continue;
            sum += field.at(n, t);
            ++count;
        }
        if (count == 0) throw ValidationError("turbine series is all gaps");
        const std::complex<double> mean = sum / static_cast<double>(count);
        Eigen::VectorXcd row(cf.n_steps);
        for (int t = 0; t < cf.n_steps; ++t)
            row(t) = cf.is_gap(t) ? std::complex<double>(0.0, 0.0)
                                  : field.at(n, t) - mean;
        cf.rows.push_back(std::move(row));
    }
    return cf;
}

// Block for d >= 0: entry (i, j) = (1/W) * sum_t c_i(t) * conj(c_j(t+d)).
Eigen::MatrixXcd block_nonneg(const CenteredField& cf, int d) {
    const int n_turbines = static_cast<int>(cf.rows.size());
    const int window = cf.n_steps - d;
    const int pairs = cf.pair_count(d);
    if (pairs < 2)
        throw ArgumentError("degenerate averaging window for lag difference " +
                            std::to_string(d) + " (" + std::to_string(pairs) +
                            " overlapping samples)");
    Eigen::MatrixXcd block(n_turbines, n_turbines);
    const double inv = 1.0 / static_cast<double>(pairs);
    for (int i = 0; i < n_turbines; ++i) {
        const auto lead = cf.rows[static_cast<size_t>(i)].head(window);
        for (int j = 0; j < n_turbines; ++j) {
            const auto lagged = cf.rows[static_cast<size_t>(j)].segment(d, window);
            // Eigen's dot conjugates its first argument, so this is
            // sum_t c_i(t) * conj(c_j(t+d)).
            block(i, j) = lagged.dot(lead) * inv;
        }
    }
    return block;
}

double max_abs(const Eigen::MatrixXcd& m) {
    double v = 0.0;
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) v = std::max(v, std::abs(m(r, c)));
    return v;
}

// Literal per-lag-pair block: window t in [0, N-1-max(tk,tl)], means taken
// over the shifted windows [tk, N-1] and [tl, N-1]. This is the quantity the
// stationarity approximation replaces; the gap to the assembled block is the
// reported Toeplitz deviation.
Eigen::MatrixXcd literal_pair_block(const VelocityField& field, int tk, int tl) {
    const int n_turbines = field.n_turbines();
    const int n = field.n_steps();
    const int t_end = n - std::max(tk, tl);  // exclusive

    Eigen::VectorXcd mean_k(n_turbines), mean_l(n_turbines);
    for (int i = 0; i < n_turbines; ++i) {
        std::complex<double> sk = 0.0, sl = 0.0;
        int ck = 0, cl = 0;
        for (int t = tk; t < n; ++t)
            if (!field.is_gap(t)) { sk += field.at(i, t); ++ck; }
        for (int t = tl; t < n; ++t)
            if (!field.is_gap(t)) { sl += field.at(i, t); ++cl; }
        if (ck == 0 || cl == 0) throw ValidationError("turbine series is all gaps");
        mean_k(i) = sk / static_cast<double>(ck);
        mean_l(i) = sl / static_cast<double>(cl);
    }

    Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(n_turbines, n_turbines);
    int pairs = 0;
    for (int t = 0; t < t_end; ++t) {
        if (field.is_gap(t + tk) || field.is_gap(t + tl)) continue;
        ++pairs;
        for (int i = 0; i < n_turbines; ++i) {
            const std::complex<double> a = field.at(i, t + tk) - mean_k(i);
            for (int j = 0; j < n_turbines; ++j) {
                const std::complex<double> b = field.at(j, t + tl) - mean_l(j);
                block(i, j) += a * std::conj(b);
            }
        }
    }
    if (pairs < 2)
        throw ArgumentError("degenerate window for lag pair (" +
                            std::to_string(tk) + ", " + std::to_string(tl) + ")");
    return block / static_cast<double>(pairs);
}

}  // namespace

LagSet::LagSet(std::vector<int> lags) : lags_(std::move(lags)) {
    if (lags_.empty()) throw ArgumentError("lag set must be non-empty");
    if (lags_.front() != 0) throw ArgumentError("lag set must start at 0");
    for (size_t k = 0; k < lags_.size(); ++k) {
        if (lags_[k] < 0) throw ArgumentError("lags must be non-negative");
        if (k > 0 && lags_[k] <= lags_[k - 1])
            throw ArgumentError("lags must be strictly increasing");
    }
}

LagSet LagSet::contiguous(int max_lag) {
    if (max_lag < 0) throw ArgumentError("max_lag must be >= 0");
    std::vector<int> lags(static_cast<size_t>(max_lag) + 1);
    for (int k = 0; k <= max_lag; ++k) lags[static_cast<size_t>(k)] = k;
    return LagSet(std::move(lags));
}

double MasterMatrix::max_abs_entry() const { return max_abs(entries); }

MasterMatrix MasterMatrix::from_dense(Eigen::MatrixXcd m, int n_turbines,
                                      std::vector<int> lags) {
    if (m.rows() != m.cols()) throw ArgumentError("master matrix must be square");
    if (n_turbines < 1) throw ArgumentError("n_turbines must be >= 1");
    if (lags.empty()) throw ArgumentError("lag list must be non-empty");
    if (m.rows() != static_cast<Eigen::Index>(n_turbines) *
                        static_cast<Eigen::Index>(lags.size()))
        throw ArgumentError("dimension does not equal n_turbines * n_lags");
    MasterMatrix mm;
    mm.entries = std::move(m);
    mm.n_turbines = n_turbines;
    mm.lags = std::move(lags);
    return mm;
}

CovarianceBlock compute_block(const VelocityField& field, int lag_diff) {
    const int n = field.n_steps();
    if (std::abs(lag_diff) >= n - 1)
        throw ArgumentError("lag difference " + std::to_string(lag_diff) +
                            " out of range for " + std::to_string(n) + " steps");
    const CenteredField cf = center_field(field);
    CovarianceBlock out;
    out.lag_diff = lag_diff;
    if (lag_diff >= 0) {
        out.entries = block_nonneg(cf, lag_diff);
    } else {
        // C(-d) = C(d)^H holds exactly under the shared window convention.
        out.entries = block_nonneg(cf, -lag_diff).adjoint();
    }
    return out;
}

MasterMatrix assemble_master(const VelocityField& field, const LagSet& lagset,
                             const AssembleOptions& opt) {
    const int n_steps = field.n_steps();
    const int n_turbines = field.n_turbines();
    if (lagset.max_lag() >= (n_steps + 1) / 2)
        throw ArgumentError("largest lag " + std::to_string(lagset.max_lag()) +
                            " must be < n_steps / 2 = " + std::to_string(n_steps / 2));

    const CenteredField cf = center_field(field);
    const int n_lags = lagset.n_lags();

    // Distinct non-negative lag differences over all (k, l) pairs. For
    // contiguous lag sets these are just the lags themselves.
    std::set<int> diff_set;
    for (int k = 0; k < n_lags; ++k)
        for (int l = k; l < n_lags; ++l) diff_set.insert(lagset.at(l) - lagset.at(k));
    const std::vector<int> diffs(diff_set.begin(), diff_set.end());

    std::vector<CovarianceBlock> cache(diffs.size());
    parallel_for(diffs.size(), opt.threads, [&](size_t idx) {
        cache[idx].lag_diff = diffs[idx];
        cache[idx].entries = block_nonneg(cf, diffs[idx]);
    });

    auto cached = [&](int d) -> const Eigen::MatrixXcd& {
        const auto it = std::lower_bound(diffs.begin(), diffs.end(), d);
        return cache[static_cast<size_t>(it - diffs.begin())].entries;
    };

    const int dim = n_turbines * n_lags;
    MasterMatrix mm;
    mm.n_turbines = n_turbines;
    mm.lags = lagset.lags();
    mm.entries.resize(dim, dim);
    for (int k = 0; k < n_lags; ++k) {
        for (int l = 0; l < n_lags; ++l) {
            const int d = lagset.at(l) - lagset.at(k);
            auto dst = mm.entries.block(k * n_turbines, l * n_turbines,
                                        n_turbines, n_turbines);
            if (d >= 0)
                dst = cached(d);
            else
                dst = cached(-d).adjoint();
        }
    }

    // Only diagonal blocks can deviate from exact Hermitian symmetry here;
    // measure, then enforce (M + M^H)/2 so eigensolvers see real spectra.
    double dev = 0.0;
    for (int c = 0; c < dim; ++c)
        for (int r = 0; r <= c; ++r)
            dev = std::max(dev, std::abs(mm.entries(r, c) -
                                         std::conj(mm.entries(c, r))));
    mm.presym_hermitian_dev = dev;
    mm.presym_available = true;
    mm.entries = (0.5 * (mm.entries + mm.entries.adjoint())).eval();
    mm.block_cache = std::move(cache);

    if (opt.measure_toeplitz) {
        std::vector<std::pair<int, int>> pairs;
        for (int k = 0; k < n_lags; ++k)
            for (int l = k; l < n_lags; ++l) pairs.emplace_back(k, l);
        std::vector<double> devs(pairs.size(), 0.0);
        parallel_for(pairs.size(), opt.threads, [&](size_t idx) {
            const auto [k, l] = pairs[idx];
            const Eigen::MatrixXcd literal =
                literal_pair_block(field, lagset.at(k), lagset.at(l));
            const auto assembled = mm.entries.block(
                k * n_turbines, l * n_turbines, n_turbines, n_turbines);
            devs[idx] = max_abs(literal - assembled);
        });
        mm.toeplitz_stationarity_dev = *std::max_element(devs.begin(), devs.end());
        mm.stationarity_available = true;
    }
    return mm;
}

StructureReport verify_structure(const MasterMatrix& m, double warn_threshold_rel) {
    StructureReport rep;
    rep.dimension = m.dimension();
    rep.n_turbines = m.n_turbines;
    rep.n_lags = m.n_lags();
    rep.max_abs_entry = m.max_abs_entry();
    rep.warn_threshold_rel = warn_threshold_rel;
    const double scale = rep.max_abs_entry > 0.0 ? rep.max_abs_entry : 1.0;

    double hdev = 0.0;
    for (int c = 0; c < rep.dimension; ++c)
        for (int r = 0; r <= c; ++r)
            hdev = std::max(hdev, std::abs(m.entries(r, c) -
                                           std::conj(m.entries(c, r))));
    rep.hermitian_dev_abs = hdev;
    rep.hermitian_dev_rel = hdev / scale;

    rep.presym_available = m.presym_available;
    rep.presym_hermitian_dev_abs = m.presym_hermitian_dev;
    rep.presym_hermitian_dev_rel = m.presym_hermitian_dev / scale;

    // Compare every pair of block positions sharing a lag difference.
    const int nw = m.n_turbines;
    double tdev = 0.0;
    for (int k = 0; k < rep.n_lags; ++k) {
        for (int l = 0; l < rep.n_lags; ++l) {
            const int d = m.lags[static_cast<size_t>(l)] - m.lags[static_cast<size_t>(k)];
            for (int k2 = k; k2 < rep.n_lags; ++k2) {
                for (int l2 = 0; l2 < rep.n_lags; ++l2) {
                    if (k2 == k && l2 <= l) continue;
                    const int d2 = m.lags[static_cast<size_t>(l2)] -
                                   m.lags[static_cast<size_t>(k2)];
                    if (d2 != d) continue;
                    const auto a = m.entries.block(k * nw, l * nw, nw, nw);
                    const auto b = m.entries.block(k2 * nw, l2 * nw, nw, nw);
                    tdev = std::max(tdev, max_abs(a - b));
                }
            }
        }
    }
    rep.toeplitz_consistency_abs = tdev;
    rep.toeplitz_consistency_rel = tdev / scale;
    rep.toeplitz_warning = rep.toeplitz_consistency_rel > warn_threshold_rel;

    rep.stationarity_available = m.stationarity_available;
    rep.toeplitz_stationarity_abs = m.toeplitz_stationarity_dev;
    rep.toeplitz_stationarity_rel = m.toeplitz_stationarity_dev / scale;
    return rep;
}

namespace {
constexpr char kMagic[4] = {'W', 'F', 'M', 'M'};
}

void save_master(const std::string& path, const MasterMatrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::uint32_t dim = static_cast<std::uint32_t>(m.dimension());
    const std::uint32_t reserved = 0;
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 4);
    for (int r = 0; r < m.dimension(); ++r) {
        for (int c = 0; c < m.dimension(); ++c) {
            const double re = m.entries(r, c).real();
            const double im = m.entries(r, c).imag();
            out.write(reinterpret_cast<const char*>(&re), 8);
            out.write(reinterpret_cast<const char*>(&im), 8);
        }
    }
    if (!out) throw IoError("write failure: " + path);
}

MasterMatrix load_master(const std::string& path, int n_turbines,
                         const LagSet& lagset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    char magic[4];
    std::uint32_t dim = 0, reserved = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path + ": not a WFMM master matrix dump");
    const Eigen::Index expected = static_cast<Eigen::Index>(n_turbines) *
                                  static_cast<Eigen::Index>(lagset.n_lags());
    if (static_cast<Eigen::Index>(dim) != expected)
        throw SchemaError(path + ": dump dimension " + std::to_string(dim) +
                          " does not match n_turbines * n_lags = " +
                          std::to_string(expected));
    Eigen::MatrixXcd entries(dim, dim);
    for (std::uint32_t r = 0; r < dim; ++r) {
        for (std::uint32_t c = 0; c < dim; ++c) {
            double re = 0.0, im = 0.0;
            in.read(reinterpret_cast<char*>(&re), 8);
            in.read(reinterpret_cast<char*>(&im), 8);
            entries(r, c) = std::complex<double>(re, im);
        }
    }
    if (!in) throw IoError(path + ": truncated WFMM dump");
    return MasterMatrix::from_dense(std::move(entries), n_turbines, lagset.lags());
}

}  // namespace farmstate
