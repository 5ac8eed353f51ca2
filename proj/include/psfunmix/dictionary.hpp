#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "psfunmix/kernels.hpp"

namespace psfunmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// N uniformly spaced instants on [-T/2, T/2], endpoints included.
class SampleGrid {
public:
    SampleGrid(std::size_t n_samples, double half_width);

    std::size_t size() const noexcept { return n_; }
    double half_width() const noexcept { return half_width_; }
    double length() const noexcept { return 2.0 * half_width_; }
    double spacing() const noexcept { return length() / static_cast<double>(n_ - 1); }
    double instant(std::size_t s) const noexcept {
        return (static_cast<double>(s) - 0.5 * static_cast<double>(n_ - 1)) * spacing();
    }
    bool contains(double t) const noexcept { return t >= -half_width_ && t <= half_width_; }
    Vector instants() const;

private:
    std::size_t n_;
    double half_width_;
};

/// Spike locations grouped by PSF: group i holds M_i locations.
class SupportSpec {
public:
    explicit SupportSpec(std::vector<std::vector<double>> groups);

    const std::vector<std::vector<double>>& groups() const noexcept { return groups_; }
    std::size_t n_groups() const noexcept { return groups_.size(); }
    std::size_t group_size(std::size_t i) const { return groups_.at(i).size(); }
    /// First dictionary column of group i.
    std::size_t group_offset(std::size_t i) const { return offsets_.at(i); }
    std::size_t total_order() const noexcept { return total_; }
    /// Minimal pairwise distance over all spikes; +infinity for a single spike.
    double min_separation() const noexcept { return min_separation_; }

private:
    std::vector<std::vector<double>> groups_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
    double min_separation_ = 0.0;
};

/// Everything needed to build G(theta). With `constant_offset` the dictionary
/// gets one trailing all-ones column (a flat baseline) that belongs to no group.
class ProblemSpec {
public:
    ProblemSpec(KernelFamily kernel, SampleGrid grid, SupportSpec support, bool constant_offset = false);

    const KernelFamily& kernel() const noexcept { return kernel_; }
    const SampleGrid& grid() const noexcept { return grid_; }
    const SupportSpec& support() const noexcept { return support_; }
    bool constant_offset() const noexcept { return constant_offset_; }

    std::size_t n_samples() const noexcept { return grid_.size(); }
    std::size_t n_groups() const noexcept { return support_.n_groups(); }
    /// M, the number of spikes.
    std::size_t model_order() const noexcept { return support_.total_order(); }
    /// Columns of G: M plus the optional offset column.
    std::size_t n_columns() const noexcept { return model_order() + (constant_offset_ ? 1 : 0); }
    double min_separation() const noexcept { return support_.min_separation(); }

    /// Throws DomainError unless every component lies in the kernel domain.
    void check_theta(const Vector& theta) const;

private:
    KernelFamily kernel_;
    SampleGrid grid_;
    SupportSpec support_;
    bool constant_offset_;
};

struct GroundTruth {
    Vector theta_star;
    Vector eta_star;
    Vector noise;
    Vector x_star;
};

struct Observation {
    Vector x;
    std::optional<GroundTruth> truth;
};

/// Additive noise model for synthesize(): none, or white Gaussian noise
/// rescaled so that 10 log10(|x*|^2 / |w|^2) equals snr_db exactly.
struct NoiseSpec {
    std::optional<double> snr_db;
    std::uint64_t seed = 0;

    static NoiseSpec none() { return {}; }
    static NoiseSpec gaussian(double snr_db, std::uint64_t seed) { return {snr_db, seed}; }
};

Vector build_atom(const ProblemSpec& spec, double theta, double center, int order);

/// N x n_columns matrix [g_11 ... g_1M1 ... g_pMp (1)], group-major.
Matrix build_dictionary(const ProblemSpec& spec, const Vector& theta);

/// G_a with the same column layout as build_dictionary; the offset column (if
/// any) is the derivative of a constant, i.e. zero for a >= 1.
class DerivativeBlocks {
public:
    DerivativeBlocks(const ProblemSpec& spec, const Vector& theta, int order);

    int order() const noexcept { return order_; }
    const Matrix& full() const noexcept { return full_; }
    /// G_{a,i}: the N x M_i columns of group i.
    Eigen::Block<const Matrix, Eigen::Dynamic, Eigen::Dynamic, true> group(std::size_t i) const;

private:
    int order_;
    Matrix full_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> sizes_;
};

inline DerivativeBlocks build_derivative_blocks(const ProblemSpec& spec, const Vector& theta, int order) {
    return DerivativeBlocks(spec, theta, order);
}

/// Least-squares machinery for a fixed full-column-rank G, factored once by
/// Householder QR. Construction throws ConditioningError when the reciprocal
/// condition number of G^T G is below `min_rcond`.
class LeastSquares {
public:
    static constexpr double kMinReciprocalCondition = 1e-12;

    explicit LeastSquares(const Matrix& g, double min_rcond = kMinReciprocalCondition);

    /// G^+ x.
    Vector coefficients(const Vector& x) const;
    /// x - G G^+ x.
    Vector complement(const Vector& x) const;
    /// (G^T G)^{-1} G^T as an explicit matrix.
    Matrix pseudo_inverse() const;
    /// Reciprocal condition number of G^T G.
    double reciprocal_condition() const noexcept { return rcond_; }

private:
    Eigen::HouseholderQR<Matrix> qr_;
    Matrix g_;
    double rcond_ = 0.0;
};

Matrix pseudo_inverse(const Matrix& g);
Vector project_complement(const Matrix& g, const Vector& x);

/// Observation x = G(theta*) eta* + w. Deterministic for a given seed.
Observation synthesize(const ProblemSpec& spec, const Vector& theta_star, const Vector& eta_star,
                       const NoiseSpec& noise);

/// eta*_{i,l} = 1 / |sum of all atoms at theta*|, the equal-amplitude
/// normalization that gives |x*| = 1.
Vector unit_energy_amplitudes(const ProblemSpec& spec, const Vector& theta_star);

}  // namespace psfunmix
