#include "farmstate/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "farmstate/csv.hpp"
#include "farmstate/errors.hpp"

namespace farmstate {

namespace {

constexpr double kResidualGate = 1e-8;
constexpr double kOrthoGate = 1e-8;
constexpr double kHermitianTol = 1e-10;

double max_abs_entry(const Eigen::MatrixXcd& m) {
    double v = 0.0;
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) v = std::max(v, std::abs(m(r, c)));
    return v;
}

// Max row sum of |entries|, the infinity-norm proxy used by the residual gate.
double max_row_sum(const Eigen::MatrixXcd& m) {
    double best = 0.0;
    for (int r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (int c = 0; c < m.cols(); ++c) s += std::abs(m(r, c));
        best = std::max(best, s);
    }
    return best;
}

}  // namespace

SpectralBasis::SpectralBasis(Eigen::VectorXd eigenvalues,
                             Eigen::MatrixXcd eigenvectors, int n_turbines,
                             std::vector<int> lags)
    : eigenvalues_(std::move(eigenvalues)),
      eigenvectors_(std::move(eigenvectors)),
      n_turbines_(n_turbines),
      lags_(std::move(lags)) {
    total_abs_ = eigenvalues_.cwiseAbs().sum();
    cumulative_.resize(eigenvalues_.size());
    double acc = 0.0;
    for (int i = 0; i < eigenvalues_.size(); ++i) {
        acc += std::abs(eigenvalues_(i));
        cumulative_(i) = total_abs_ > 0.0 ? acc / total_abs_ : 0.0;
    }
}

bool SpectralBasis::splits_cluster(int q, double rel_tol) const {
    if (q < 1 || q > dimension()) return false;
    if (q == dimension()) return false;
    const double gap = std::abs(eigenvalue(q - 1)) - std::abs(eigenvalue(q));
    return gap < rel_tol * std::abs(eigenvalue(0));
}

int SpectralBasis::extend_to_cluster(int q, double rel_tol) const {
    int out = q;
    while (out < dimension() && splits_cluster(out, rel_tol)) ++out;
    return out;
}

SpectralBasis decompose(const MasterMatrix& m, int n_modes) {
    const int dim = m.dimension();
    if (dim < 1) throw ArgumentError("empty master matrix");
    if (n_modes < 0 || n_modes > dim)
        throw ArgumentError("n_modes out of range");
    if (n_modes == 0) n_modes = dim;

    const double scale = m.max_abs_entry();
    double hdev = 0.0;
    for (int c = 0; c < dim; ++c)
        for (int r = 0; r <= c; ++r)
            hdev = std::max(hdev,
                            std::abs(m.entries(r, c) - std::conj(m.entries(c, r))));
    if (hdev > kHermitianTol * std::max(scale, 1e-300))
        throw ArgumentError("master matrix is not Hermitian within tolerance");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m.entries);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigendecomposition did not converge");

    // Magnitude-descending order, ties broken by value then original index so
    // the ordering is deterministic.
    std::vector<int> order(static_cast<size_t>(dim));
    std::iota(order.begin(), order.end(), 0);
    const Eigen::VectorXd& raw = solver.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double ma = std::abs(raw(a)), mb = std::abs(raw(b));
        if (ma != mb) return ma > mb;
        return raw(a) > raw(b);
    });

    Eigen::VectorXd eigenvalues(dim);
    Eigen::MatrixXcd eigenvectors(dim, n_modes);
    for (int i = 0; i < dim; ++i) eigenvalues(i) = raw(order[static_cast<size_t>(i)]);
    for (int i = 0; i < n_modes; ++i) {
        Eigen::VectorXcd v = solver.eigenvectors().col(order[static_cast<size_t>(i)]);
        // Phase fix: rotate so the largest-magnitude component is real >= 0.
        int arg = 0;
        double best = -1.0;
        for (int r = 0; r < dim; ++r) {
            const double a = std::abs(v(r));
            if (a > best) { best = a; arg = r; }
        }
        if (best > 0.0) {
            const std::complex<double> pivot = v(arg);
            v *= std::conj(pivot) / std::abs(pivot);
        }
        eigenvectors.col(i) = v;
    }

    if (eigenvalues.cwiseAbs().sum() <= 0.0)
        throw ArgumentError("zero total variance");

    // Mandatory gates: residual against the infinity-norm proxy, unit norms,
    // and pairwise orthogonality of the retained vectors.
    const double norm_proxy = max_row_sum(m.entries);
    double worst_residual = 0.0;
    for (int i = 0; i < n_modes; ++i) {
        const Eigen::VectorXcd v = eigenvectors.col(i);
        const double res = (m.entries * v - eigenvalues(i) * v).norm();
        worst_residual = std::max(worst_residual, res);
        if (std::abs(v.norm() - 1.0) > 1e-10)
            throw NumericalError("eigenvector " + std::to_string(i + 1) +
                                 " is not unit norm");
    }
    if (worst_residual > kResidualGate * std::max(norm_proxy, 1e-300))
        throw NumericalError("eigen residual gate failed: worst residual " +
                             csv::format_double(worst_residual));
    double worst_ortho = 0.0;
    for (int i = 0; i < n_modes; ++i) {
        for (int j = i; j < n_modes; ++j) {
            const std::complex<double> g =
                eigenvectors.col(i).dot(eigenvectors.col(j));
            const double target = (i == j) ? 1.0 : 0.0;
            worst_ortho = std::max(worst_ortho, std::abs(g - target));
        }
    }
    if (worst_ortho > kOrthoGate)
        throw NumericalError("orthonormality gate failed: worst deviation " +
                             csv::format_double(worst_ortho));

    return SpectralBasis(std::move(eigenvalues), std::move(eigenvectors),
                         m.n_turbines, m.lags);
}

double explained_variance(const SpectralBasis& basis, int m) {
    if (m < 1 || m > basis.dimension())
        throw ArgumentError("order " + std::to_string(m) + " out of range [1, " +
                            std::to_string(basis.dimension()) + "]");
    return basis.cumulative_fraction()(m - 1);
}

ModeProfile mode_profile(const SpectralBasis& basis, int mode) {
    if (mode < 0 || mode >= basis.n_modes())
        throw ArgumentError("mode index out of range");
    ModeProfile p;
    p.mode = mode;
    p.lags = basis.lags();
    p.abs_components.resize(basis.n_turbines(), basis.n_lags());
    const Eigen::VectorXcd v = basis.eigenvector(mode);
    for (int k = 0; k < basis.n_lags(); ++k)
        for (int j = 0; j < basis.n_turbines(); ++j)
            p.abs_components(j, k) = std::abs(v(k * basis.n_turbines() + j));
    return p;
}

void write_spectrum_csv(const std::string& path, const SpectralBasis& basis) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: mode,eigenvalue,abs_eigenvalue,cum_fraction\n";
    out << "mode,eigenvalue,abs_eigenvalue,cum_fraction\n";
    for (int i = 0; i < basis.dimension(); ++i) {
        out << (i + 1) << ',' << csv::format_double(basis.eigenvalue(i)) << ','
            << csv::format_double(std::abs(basis.eigenvalue(i))) << ','
            << csv::format_double(basis.cumulative_fraction()(i)) << "\n";
    }
    if (!out) throw IoError("write failure: " + path);
}

void write_mode_profiles_csv(const std::string& path, const SpectralBasis& basis,
                             int n_modes) {
    n_modes = std::min(n_modes, basis.n_modes());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# schema: mode,turbine,lag,abs_component\n";
    out << "mode,turbine,lag,abs_component\n";
    for (int m = 0; m < n_modes; ++m) {
        const ModeProfile p = mode_profile(basis, m);
        for (int k = 0; k < basis.n_lags(); ++k)
            for (int j = 0; j < basis.n_turbines(); ++j)
                out << (m + 1) << ',' << (j + 1) << ',' << p.lags[static_cast<size_t>(k)]
                    << ',' << csv::format_double(p.abs_components(j, k)) << "\n";
    }
    if (!out) throw IoError("write failure: " + path);
}

namespace {
constexpr char kBasisMagic[4] = {'W', 'F', 'S', 'B'};
}

void save_basis(const std::string& path, const SpectralBasis& basis) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kBasisMagic, 4);
    const std::uint32_t dim = static_cast<std::uint32_t>(basis.dimension());
    const std::uint32_t n_modes = static_cast<std::uint32_t>(basis.n_modes());
    const std::uint32_t n_turbines = static_cast<std::uint32_t>(basis.n_turbines());
    const std::uint32_t n_lags = static_cast<std::uint32_t>(basis.n_lags());
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&n_modes), 4);
    out.write(reinterpret_cast<const char*>(&n_turbines), 4);
    out.write(reinterpret_cast<const char*>(&n_lags), 4);
    for (int k = 0; k < basis.n_lags(); ++k) {
        const std::int32_t lag = basis.lags()[static_cast<size_t>(k)];
        out.write(reinterpret_cast<const char*>(&lag), 4);
    }
    for (int i = 0; i < basis.dimension(); ++i) {
        const double v = basis.eigenvalue(i);
        out.write(reinterpret_cast<const char*>(&v), 8);
    }
    for (int m = 0; m < basis.n_modes(); ++m) {
        for (int r = 0; r < basis.dimension(); ++r) {
            const std::complex<double> z = basis.eigenvectors()(r, m);
            const double re = z.real(), im = z.imag();
            out.write(reinterpret_cast<const char*>(&re), 8);
            out.write(reinterpret_cast<const char*>(&im), 8);
        }
    }
    if (!out) throw IoError("write failure: " + path);
}

SpectralBasis load_basis(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    char magic[4];
    std::uint32_t dim = 0, n_modes = 0, n_turbines = 0, n_lags = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&n_modes), 4);
    in.read(reinterpret_cast<char*>(&n_turbines), 4);
    in.read(reinterpret_cast<char*>(&n_lags), 4);
    if (!in || std::memcmp(magic, kBasisMagic, 4) != 0)
        throw IoError(path + ": not a spectral basis dump");
    std::vector<int> lags(n_lags);
    for (auto& lag : lags) {
        std::int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        lag = v;
    }
    Eigen::VectorXd eigenvalues(dim);
    for (std::uint32_t i = 0; i < dim; ++i)
        in.read(reinterpret_cast<char*>(&eigenvalues(i)), 8);
    Eigen::MatrixXcd eigenvectors(dim, n_modes);
    for (std::uint32_t m = 0; m < n_modes; ++m) {
        for (std::uint32_t r = 0; r < dim; ++r) {
            double re = 0.0, im = 0.0;
            in.read(reinterpret_cast<char*>(&re), 8);
            in.read(reinterpret_cast<char*>(&im), 8);
            eigenvectors(r, m) = std::complex<double>(re, im);
        }
    }
    if (!in) throw IoError(path + ": truncated spectral basis dump");
    return SpectralBasis(std::move(eigenvalues), std::move(eigenvectors),
                         static_cast<int>(n_turbines), std::move(lags));
}

}  // namespace farmstate
