#include "psfunmix/radius.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "psfunmix/errors.hpp"

namespace psfunmix {

TheoremConstants theorem_constants(const ProblemSpec& spec, const Vector& theta_star,
                                   const LipschitzEstimates& lipschitz, double lipschitz_safety) {
    spec.check_theta(theta_star);
    const auto p = theta_star.size();
    double delta = spec.min_separation();
    if (!std::isfinite(delta)) delta = std::numeric_limits<double>::max();

    TheoremConstants c;
    c.n_samples = spec.n_samples();
    c.n_groups = spec.n_groups();
    c.delta = delta;
    c.lipschitz = lipschitz.scaled(lipschitz_safety);
    c.note = "diagonal terms use mu_a(theta_i, theta_i, 0) (atom energy), not mu_a(theta_i, theta_i, Delta)";

    for (int a = 0; a <= 2; ++a) {
        const auto ai = static_cast<std::size_t>(a);
        std::vector<double> mu0(static_cast<std::size_t>(p));
        std::vector<double> own(static_cast<std::size_t>(p));
        double s = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            double row = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const CoherenceProfile prof(spec.grid(), spec.kernel(), theta_star[i], theta_star[j], a);
                const double total = prof.total(delta).value;
                row += total;
                if (i == j) {
                    mu0[static_cast<std::size_t>(i)] = prof.mu(0.0);
                    own[static_cast<std::size_t>(i)] = total;
                }
            }
            s = std::max(s, row);
        }
        double lmin = std::numeric_limits<double>::infinity();
        double lmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mu0.size(); ++i) {
            lmin = std::min(lmin, mu0[i] - own[i]);
            lmax = std::max(lmax, mu0[i] + own[i]);
        }
        const double mu_min = *std::min_element(mu0.begin(), mu0.end());
        const double mu_max = *std::max_element(mu0.begin(), mu0.end());
        c.s_a[ai] = s;
        c.lambda_min[ai] = 0.5 * lmin;
        c.lambda_max[ai] = lmax;
        c.Lambda_min[ai] = 0.5 * mu_min - s;
        c.Lambda_max[ai] = mu_max + s;
    }

    c.denominators_positive =
        c.lambda_max[0] > 0.0 && c.lambda_min[0] > 0.0 && c.lambda_min[2] > 0.0 && c.Lambda_min[0] > 0.0;
    if (!c.denominators_positive) return c;

    const double cmu = c.lipschitz.c_mu;
    const double cd = c.lipschitz.c_delta;
    const double pp = static_cast<double>(p);
    const double lmax0 = c.lambda_max[0];
    const double lmin0 = c.lambda_min[0];
    const double lmin2 = c.lambda_min[2];
    const double lmax2 = c.lambda_max[2];
    const double Lmin0 = c.Lambda_min[0];
    const double Lmin1 = c.Lambda_min[1];

    c.alpha_star = (lmax0 * (cmu + 2.0 * pp * cd) + 2.0 * Lmin1 * (cmu + cd)) / (lmax0 * lmax0);
    c.beta_star = (lmin0 * (cmu + cd) + lmax2 * (cmu + 2.0 * cd)) / (2.0 * std::sqrt(lmin0 * lmin0 * lmin0 * lmin2));
    c.gamma_star = c.lipschitz.c_g * c.lipschitz.c_g_plus * (1.0 + Lmin0) * std::sqrt(lmax2) /
                   std::sqrt(static_cast<double>(c.n_samples) * lmin0 * Lmin0);
    return c;
}

bool feasibility(const TheoremConstants& c, double norm_x, double norm_w) {
    if (!(norm_x >= 0.0) || !(norm_w >= 0.0)) throw DomainError("norms must be non-negative");
    if (!c.denominators_positive || !(c.lambda_max[2] > 0.0)) return false;
    const double threshold =
        c.Lambda_min[1] / c.lambda_max[0] * std::sqrt(c.lambda_min[0] / c.lambda_max[2]) * norm_x;
    return norm_w < threshold;
}

double radius_bound(const TheoremConstants& c, double norm_x, double norm_w, double norm_x_star) {
    if (!feasibility(c, norm_x, norm_w)) return 0.0;
    const double num = c.Lambda_min[1] / c.lambda_max[0] * norm_x * norm_x -
                       std::sqrt(c.lambda_max[2] / c.lambda_min[0]) * norm_x * norm_w;
    const double den =
        c.alpha_star * norm_x * norm_x + c.beta_star * norm_x * norm_w + c.gamma_star * norm_x_star;
    if (!(num > 0.0)) return 0.0;
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return num / den;
}

TheoremConstants evaluate_radius(const ProblemSpec& spec, const Vector& theta_star,
                                 const LipschitzEstimates& lipschitz, double norm_x, double norm_w,
                                 double norm_x_star, double lipschitz_safety) {
    TheoremConstants c = theorem_constants(spec, theta_star, lipschitz, lipschitz_safety);
    c.norm_x = norm_x;
    c.norm_w = norm_w;
    c.norm_x_star = norm_x_star;
    c.feasible = feasibility(c, norm_x, norm_w);
    c.epsilon0 = radius_bound(c, norm_x, norm_w, norm_x_star);
    if (std::isinf(c.epsilon0)) c.note += "; all Lipschitz constants vanish, radius is unbounded";
    return c;
}

LipschitzEstimates local_lipschitz(const ProblemSpec& spec, const Vector& theta_star, double rel_half_width,
                                   std::size_t n_probes) {
    if (!(rel_half_width > 0.0 && rel_half_width < 1.0)) {
        throw ValidationError("relative Lipschitz window must lie in (0, 1)");
    }
    const double lo = theta_star.minCoeff() * (1.0 - rel_half_width);
    const double hi = theta_star.maxCoeff() * (1.0 + rel_half_width);
    double delta = spec.min_separation();
    if (!std::isfinite(delta)) delta = std::numeric_limits<double>::max();
    return estimate_lipschitz(spec, lo, hi, delta, n_probes);
}

}  // namespace psfunmix
