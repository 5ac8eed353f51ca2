#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "psfunmix/dictionary.hpp"

namespace psfunmix {

/// Correlation between order-a derivative atoms as a function of their
/// offset, on the lattice of grid shifts delta = k h, k = 0 .. K with
/// K h <= 2 * (interval length). Atom i sits on the grid sample nearest 0 and
/// atom j k samples further; both are sampled on the grid of the problem, so
/// boundary truncation is included.
///
/// For theta_i != theta_j the profile is the larger of the two orderings,
/// which makes mu(theta_i, theta_j, .) symmetric in its arguments.
class CoherenceProfile {
public:
    CoherenceProfile(const SampleGrid& grid, const KernelFamily& kernel, double theta_i, double theta_j, int order);

    int order() const noexcept { return order_; }
    double spacing() const noexcept { return spacing_; }
    /// |<d_a g(theta_i, 0), d_a g(theta_j, k h)>| for k = 0..K.
    const std::vector<double>& correlations() const noexcept { return corr_; }

    /// mu_a(theta_i, theta_j, delta): sup of the profile over |delta'| >= delta.
    /// Zero beyond the last lattice shift.
    double mu(double delta) const;

    struct Total {
        double value = 0.0;
        std::size_t terms = 0;
        double truncation_bound = 0.0;
    };
    /// Sum over m != 0 of mu(|m| delta); see total_coherence().
    Total total(double delta) const;

private:
    int order_;
    double spacing_;
    std::vector<double> corr_;
    std::vector<double> suffix_sup_;
};

struct CoherenceReport {
    double mu = 0.0;
    double total = 0.0;
    int order = 0;
    std::size_t truncation_terms = 0;
    double truncation_bound = 0.0;
};

/// mu_a(theta_i, theta_j, delta), sup over the lattice of grid shifts.
double coherence(const ProblemSpec& spec, double theta_i, double theta_j, double delta, int order);

/// C_a(theta_i, theta_j, delta) = 2 sum_{m >= 1} mu_a(m delta). The sum stops
/// at the first term below 1e-12 times the first term, or once m delta passes
/// twice the interval length; the first neglected term is reported.
CoherenceReport total_coherence(const ProblemSpec& spec, double theta_i, double theta_j, double delta, int order);

/// S_a(theta) = max_i sum_j C_a(theta_i, theta_j, delta).
double coherence_row_sum(const ProblemSpec& spec, const Vector& theta, double delta, int order);

/// Lower/upper Gramian spectrum bounds from coherence and total coherence,
/// evaluated at the support's minimal separation.
struct GramianBounds {
    std::vector<double> block_min;  // 1/2 mu_a(t_i, t_i, 0) - C_a(t_i, t_i, D)
    std::vector<double> block_max;  // mu_a(t_i, t_i, 0) + C_a(t_i, t_i, D)
    double full_min = 0.0;          // 1/2 min_i mu_a(t_i, t_i, 0) - S_a
    double full_max = 0.0;          // max_i mu_a(t_i, t_i, 0) + S_a
};

GramianBounds gramian_bounds(const ProblemSpec& spec, const Vector& theta, int order);

/// Numerically estimated Lipschitz constants (observed-slope maxima, i.e.
/// lower estimates of the true constants).
struct LipschitzEstimates {
    std::array<double, 3> c_mu_order{};     // theta -> mu_a(theta, theta', 0)
    std::array<double, 3> c_delta_order{};  // theta -> C_a(theta, theta', delta)
    double c_mu = 0.0;
    double c_delta = 0.0;
    double c_g = 0.0;       // theta -> G(theta), spectral norm
    double c_g_plus = 0.0;  // theta -> G(theta)^+, spectral norm
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    double theta_ref = 0.0;
    double delta = 0.0;
    std::size_t n_probes = 0;

    LipschitzEstimates scaled(double factor) const;
};

/// Probes theta on lo + (hi - lo) k / n_probes, k = 0..n_probes, with theta'
/// fixed at the midpoint, and keeps the largest slope between neighbouring
/// probes. Doubling n_probes refines the same lattice, so no estimate can
/// decrease. C_g and C_g+ move all groups together and each group alone.
LipschitzEstimates estimate_lipschitz(const ProblemSpec& spec, double theta_lo, double theta_hi, double delta,
                                      std::size_t n_probes);

}  // namespace psfunmix
