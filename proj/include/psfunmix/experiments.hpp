#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "psfunmix/radius.hpp"
#include "psfunmix/random.hpp"
#include "psfunmix/varpro.hpp"

namespace psfunmix {

/// Settings for the numerically estimated Lipschitz constants that feed the
/// radius bound: probe window theta* x [1 - rel, 1 + rel], probe count, and
/// the safety factor applied before use.
struct LipschitzSettings {
    double rel_half_width = 0.1;
    std::size_t probes = 8;
    double safety = 1.5;
};

/// n points, log-spaced on [lo, hi] (n = 1 gives {lo}).
std::vector<double> log_space(double lo, double hi, std::size_t n);

// ---------------------------------------------------------------------------
// Radius maps

struct RadiusMapConfig {
    std::vector<KernelFamily> kernels;
    std::vector<double> theta_grid;
    std::vector<double> delta_grid;
    std::size_t n_samples = 2000;
    double half_width = 1.0;
    /// Absent: noiseless observation.
    std::optional<double> snr_db;
    LipschitzSettings lipschitz;
    std::size_t threads = 0;
};

struct RadiusMapCell {
    double theta_star = 0.0;
    double delta = 0.0;
    double epsilon0 = 0.0;
    bool feasible = false;
    std::string status = "ok";
    double normalized_panel = 0.0;
    double normalized_global = 0.0;
};

struct RadiusMapPanel {
    KernelFamily kernel;
    std::vector<RadiusMapCell> cells;  // theta-major
    double epsilon_max = 0.0;
    std::size_t well_posed = 0;
};

/// Two groups with one spike each at -delta/2 and +delta/2, common theta*.
ProblemSpec two_spike_spec(const KernelFamily& kernel, std::size_t n_samples, double half_width, double delta);

/// Expected norms (|x|, |w|, |x*|) for a unit-energy signal at the given SNR.
struct SignalNorms {
    double x = 1.0;
    double w = 0.0;
    double x_star = 1.0;
};
SignalNorms unit_signal_norms(std::optional<double> snr_db);

RadiusMapCell radius_map_cell(const KernelFamily& kernel, double theta_star, double delta,
                              const RadiusMapConfig& config);
std::vector<RadiusMapPanel> radius_map(const RadiusMapConfig& config);
void write_radius_map_csv(const RadiusMapPanel& panel, std::ostream& out);

// ---------------------------------------------------------------------------
// Monte-Carlo basin probing

struct MonteCarloConfig {
    KernelFamily kernel = KernelFamily::u_laplace(2.0);
    std::size_t n_samples = 2000;
    double half_width = 1.0;
    std::vector<std::vector<double>> support;
    Vector theta_star;
    std::optional<double> snr_db = 10.0;
    std::size_t n_trials = 100;
    /// Non-negative, strictly increasing initialization distances.
    std::vector<double> epsilon_grid;
    std::uint64_t seed = 0;
    /// Interior points probed for the strong-convexity test.
    std::size_t sc_probes = 32;
    double success_threshold = 0.5;
    /// Convergence success iff |theta_hat - theta*|_inf <= factor * Delta.
    double convergence_tol_factor = 1e-3;
    SolveOptions solver;
    LipschitzSettings lipschitz;
    std::size_t threads = 0;
};

/// Two groups of three spikes over [-1, 1] at separation 0.4, interleaved
/// (group 1 at -1.0, -0.2, 0.6; group 2 at -0.6, 0.2, 1.0), theta* = (1e-2, 1e-2),
/// SNR 10 dB.
MonteCarloConfig two_group_monte_carlo(const KernelFamily& kernel, std::size_t n_samples);

struct MonteCarloResult {
    std::vector<double> epsilon_grid;
    std::vector<double> convergence_rate;
    std::vector<double> strong_convexity_rate;
    std::vector<std::size_t> solver_failures;
    /// Largest grid epsilon reached by an unbroken run of rates >= threshold
    /// starting at the smallest epsilon; 0 when the first point already fails.
    double epsilon_c = 0.0;
    double epsilon_sc = 0.0;
    /// Radius bound at the configured SNR and in the noiseless limit.
    double epsilon0 = 0.0;
    double epsilon0_noiseless = 0.0;
    TheoremConstants constants;
};

/// Largest grid value of an unbroken run of rates >= threshold from the start.
double empirical_radius(const std::vector<double>& grid, const std::vector<double>& rates, double threshold);

/// A uniformly distributed point on the l_inf sphere |theta - center|_inf = eps.
Vector sample_linf_sphere(const Vector& center, double eps, Rng& rng);

MonteCarloResult monte_carlo(const MonteCarloConfig& config);
void write_monte_carlo_csv(const MonteCarloResult& result, std::ostream& out);

// ---------------------------------------------------------------------------
// Estimation accuracy against the Cramer-Rao bound

/// theta-block of the inverse Fisher information for white Gaussian noise of
/// standard deviation sigma, joint over (theta, eta): J = D^T D / sigma^2 with
/// D = [jacobian_columns(theta*, eta*) | G(theta*)].
Matrix crb(const ProblemSpec& spec, const Vector& theta_star, const Vector& eta_star, double sigma);

struct MseConfig {
    std::vector<KernelFamily> kernels;
    std::vector<double> snr_grid;
    std::size_t n_samples = 2000;
    double half_width = 1.0;
    std::vector<std::vector<double>> support;
    Vector theta_star;
    std::size_t n_trials = 100;
    std::uint64_t seed = 0;
    /// Trials with |theta_hat - theta*|_inf > factor * min(theta*) count as outliers.
    double outlier_factor = 1.0;
    SolveOptions solver;
    std::size_t threads = 0;
};

MseConfig two_group_mse(const std::vector<KernelFamily>& kernels, std::size_t n_samples);

struct MseRow {
    std::string kernel;
    double snr_db = 0.0;
    double mse = 0.0;
    /// Standard error of the MSE estimate.
    double mse_std_error = 0.0;
    double crb_trace = 0.0;
    std::size_t trials = 0;
    std::size_t outliers = 0;
};

std::vector<MseRow> mse_vs_snr(const MseConfig& config);
void write_mse_csv(const std::vector<MseRow>& rows, std::ostream& out);

}  // namespace psfunmix
