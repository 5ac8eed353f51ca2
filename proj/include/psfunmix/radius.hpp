#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "psfunmix/coherence.hpp"

namespace psfunmix {

/// Constants of the strong-basin radius bound at a ground truth theta*.
///
/// Per order a, with D the minimal separation and mu_a(t, t, 0) the diagonal
/// energy of an atom:
///   lambda_min[a] = 1/2 min_i { mu_a(t_i, t_i, 0) - C_a(t_i, t_i, D) }
///   lambda_max[a] =     max_i { mu_a(t_i, t_i, 0) + C_a(t_i, t_i, D) }
///   Lambda_min[a] = 1/2 min_i mu_a(t_i, t_i, 0) - S_a(t)
///   Lambda_max[a] =     max_i mu_a(t_i, t_i, 0) + S_a(t)
struct TheoremConstants {
    std::array<double, 3> lambda_min{};
    std::array<double, 3> lambda_max{};
    std::array<double, 3> Lambda_min{};
    std::array<double, 3> Lambda_max{};
    std::array<double, 3> s_a{};
    double alpha_star = 0.0;
    double beta_star = 0.0;
    double gamma_star = 0.0;
    /// lambda_max,0, lambda_min,0, lambda_min,2 and Lambda_min,0 all positive.
    bool denominators_positive = false;

    bool feasible = false;
    double epsilon0 = 0.0;

    double norm_x = 0.0;
    double norm_w = 0.0;
    double norm_x_star = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_groups = 0;
    double delta = 0.0;
    /// Lipschitz constants actually used (after the safety factor).
    LipschitzEstimates lipschitz;
    std::string note;
};

/// Fills the lambda / Lambda / alpha* / beta* / gamma* fields. Non-positive
/// denominators mark the instance infeasible; they never throw.
TheoremConstants theorem_constants(const ProblemSpec& spec, const Vector& theta_star,
                                   const LipschitzEstimates& lipschitz, double lipschitz_safety = 1.5);

/// |w| < (Lambda_min,1 / lambda_max,0) sqrt(lambda_min,0 / lambda_max,2) |x|,
/// together with positive denominators.
bool feasibility(const TheoremConstants& c, double norm_x, double norm_w);

/// The radius epsilon_0 (0 when infeasible, +infinity when every Lipschitz
/// constant vanishes).
double radius_bound(const TheoremConstants& c, double norm_x, double norm_w, double norm_x_star);

/// theorem_constants + feasibility + radius_bound, with norms recorded.
TheoremConstants evaluate_radius(const ProblemSpec& spec, const Vector& theta_star,
                                 const LipschitzEstimates& lipschitz, double norm_x, double norm_w,
                                 double norm_x_star, double lipschitz_safety = 1.5);

/// Lipschitz probe window used by the experiments: theta* components scaled
/// by [1 - rel_half_width, 1 + rel_half_width].
LipschitzEstimates local_lipschitz(const ProblemSpec& spec, const Vector& theta_star, double rel_half_width,
                                   std::size_t n_probes);

}  // namespace psfunmix
