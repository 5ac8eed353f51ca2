#include "psfunmix/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "psfunmix/csv.hpp"
#include "psfunmix/errors.hpp"
#include "psfunmix/parallel.hpp"

namespace psfunmix {

namespace {

// Stream tags keep the noise and initialization draws independent of each other.
constexpr std::uint64_t kNoiseStream = 0xffffffff00000001ULL;

Vector clamp_to_domain(const KernelFamily& kernel, Vector theta) {
    const double lo = kernel.theta_lo() * (1.0 + 1e-9);
    const double hi = kernel.theta_hi() * (1.0 - 1e-9);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = std::clamp(theta[i], lo, hi);
    return theta;
}

std::uint64_t noise_seed(std::uint64_t seed, std::uint64_t item) {
    return Rng::for_item(seed, kNoiseStream, item).bits();
}

void check_grid(const std::vector<double>& grid, const char* what, bool allow_zero) {
    if (grid.empty()) throw ValidationError(std::string(what) + " grid must not be empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double v = grid[k];
        if (!std::isfinite(v) || v < 0.0 || (!allow_zero && v == 0.0)) {
            throw ValidationError(std::string(what) + " grid values must be positive and finite");
        }
        if (k > 0 && !(v > grid[k - 1])) throw ValidationError(std::string(what) + " grid must be increasing");
    }
}

}  // namespace

std::vector<double> log_space(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    if (!(lo > 0.0) || !(hi >= lo)) throw ValidationError("log_space needs 0 < lo <= hi");
    std::vector<double> out(n);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = n == 1 ? lo : std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
    }
    if (n > 1) {
        out.front() = lo;
        out.back() = hi;
    }
    return out;
}

ProblemSpec two_spike_spec(const KernelFamily& kernel, std::size_t n_samples, double half_width, double delta) {
    return ProblemSpec(kernel, SampleGrid(n_samples, half_width), SupportSpec({{-0.5 * delta}, {0.5 * delta}}));
}

SignalNorms unit_signal_norms(std::optional<double> snr_db) {
    SignalNorms n;
    if (snr_db) {
        n.w = std::pow(10.0, -*snr_db / 20.0);
        n.x = std::sqrt(1.0 + n.w * n.w);
    }
    return n;
}

RadiusMapCell radius_map_cell(const KernelFamily& kernel, double theta_star, double delta,
                              const RadiusMapConfig& config) {
    RadiusMapCell cell;
    cell.theta_star = theta_star;
    cell.delta = delta;
    try {
        const ProblemSpec spec = two_spike_spec(kernel, config.n_samples, config.half_width, delta);
        const Vector theta = Vector::Constant(2, theta_star);
        const LipschitzEstimates lip =
            local_lipschitz(spec, theta, config.lipschitz.rel_half_width, config.lipschitz.probes);
        const SignalNorms norms = unit_signal_norms(config.snr_db);
        const TheoremConstants c =
            evaluate_radius(spec, theta, lip, norms.x, norms.w, norms.x_star, config.lipschitz.safety);
        cell.feasible = c.feasible;
        cell.epsilon0 = std::isfinite(c.epsilon0) ? c.epsilon0 : 0.0;
        if (!c.denominators_positive) cell.status = "nonpositive-denominator";
        else if (!c.feasible) cell.status = "noise-infeasible";
        else if (!std::isfinite(c.epsilon0)) cell.status = "unbounded";
    } catch (const ConditioningError&) {
        cell.status = "ill-conditioned";
    } catch (const NumericError&) {
        cell.status = "numeric-error";
    } catch (const DomainError&) {
        cell.status = "out-of-domain";
    }
    return cell;
}

std::vector<RadiusMapPanel> radius_map(const RadiusMapConfig& config) {
    if (config.kernels.empty()) throw ValidationError("radius map needs at least one kernel");
    check_grid(config.theta_grid, "theta", false);
    check_grid(config.delta_grid, "delta", false);

    const std::size_t nt = config.theta_grid.size();
    const std::size_t nd = config.delta_grid.size();
    const std::size_t per_panel = nt * nd;
    std::vector<RadiusMapPanel> panels;
    for (const auto& k : config.kernels) panels.push_back({k, std::vector<RadiusMapCell>(per_panel), 0.0, 0});

    parallel_for(panels.size() * per_panel, config.threads, [&](std::size_t item) {
        const std::size_t p = item / per_panel;
        const std::size_t c = item % per_panel;
        panels[p].cells[c] =
            radius_map_cell(panels[p].kernel, config.theta_grid[c / nd], config.delta_grid[c % nd], config);
    });

    double global = 0.0;
    for (auto& panel : panels) {
        for (const auto& cell : panel.cells) {
            panel.epsilon_max = std::max(panel.epsilon_max, cell.epsilon0);
            if (cell.epsilon0 > 0.0) ++panel.well_posed;
        }
        global = std::max(global, panel.epsilon_max);
    }
    for (auto& panel : panels) {
        for (auto& cell : panel.cells) {
            cell.normalized_panel = panel.epsilon_max > 0.0 ? cell.epsilon0 / panel.epsilon_max : 0.0;
            cell.normalized_global = global > 0.0 ? cell.epsilon0 / global : 0.0;
        }
    }
    return panels;
}

void write_radius_map_csv(const RadiusMapPanel& panel, std::ostream& out) {
    out << "theta_star,delta,epsilon0,feasible,status,normalized_panel,normalized_global\n";
    for (const auto& c : panel.cells) {
        CsvRow(out) << c.theta_star << c.delta << c.epsilon0 << c.feasible << c.status << c.normalized_panel
                    << c.normalized_global;
    }
}

MonteCarloConfig two_group_monte_carlo(const KernelFamily& kernel, std::size_t n_samples) {
    MonteCarloConfig c;
    c.kernel = kernel;
    c.n_samples = n_samples;
    c.half_width = 1.0;
    c.support = {{-1.0, -0.2, 0.6}, {-0.6, 0.2, 1.0}};
    c.theta_star = Vector::Constant(2, 1e-2);
    c.snr_db = 10.0;
    c.n_trials = 100;
    c.epsilon_grid = log_space(1e-5, 1e-2, 20);
    return c;
}

double empirical_radius(const std::vector<double>& grid, const std::vector<double>& rates, double threshold) {
    if (grid.size() != rates.size()) throw ValidationError("grid and rates differ in length");
    double r = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(rates[k] >= threshold)) break;
        r = grid[k];
    }
    return r;
}

Vector sample_linf_sphere(const Vector& center, double eps, Rng& rng) {
    const auto p = center.size();
    Vector offset(p);
    for (Eigen::Index i = 0; i < p; ++i) offset[i] = rng.uniform(-eps, eps);
    // The sphere is the union of 2p faces of equal area; pick one and pin it.
    const auto face = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(2 * p)));
    offset[face / 2] = face % 2 == 0 ? -eps : eps;
    return center + offset;
}

MonteCarloResult monte_carlo(const MonteCarloConfig& config) {
    if (config.n_trials < 1) throw ValidationError("n_trials must be at least 1");
    check_grid(config.epsilon_grid, "epsilon", true);
    if (!(config.success_threshold > 0.0 && config.success_threshold <= 1.0)) {
        throw ValidationError("success threshold must lie in (0, 1]");
    }
    const ProblemSpec spec(config.kernel, SampleGrid(config.n_samples, config.half_width),
                           SupportSpec(config.support));
    spec.check_theta(config.theta_star);
    const double delta = spec.min_separation();
    if (!std::isfinite(delta)) throw ValidationError("Monte-Carlo support needs at least two spikes");
    const Vector eta_star = unit_energy_amplitudes(spec, config.theta_star);

    std::vector<Vector> observations(config.n_trials);
    for (std::size_t t = 0; t < config.n_trials; ++t) {
        observations[t] =
            synthesize(spec, config.theta_star, eta_star, NoiseSpec{config.snr_db, noise_seed(config.seed, t)}).x;
    }

    const std::size_t ne = config.epsilon_grid.size();
    std::vector<char> converged(ne * config.n_trials, 0);
    std::vector<char> convex(ne * config.n_trials, 0);
    std::vector<char> failed(ne * config.n_trials, 0);
    const double tol = config.convergence_tol_factor * delta;

    auto positive_definite = [&](const Vector& theta, const Vector& x) {
        try {
            return min_eigenvalue(hessian(spec, theta, x).hessian) > 0.0;
        } catch (const ConditioningError&) {
            return false;
        } catch (const NumericError&) {
            return false;
        }
    };

    parallel_for(ne * config.n_trials, config.threads, [&](std::size_t item) {
        const std::size_t e = item / config.n_trials;
        const std::size_t t = item % config.n_trials;
        const double eps = config.epsilon_grid[e];
        const Vector& x = observations[t];
        Rng rng = Rng::for_item(config.seed, e, t);
        const Vector theta0 = clamp_to_domain(config.kernel, sample_linf_sphere(config.theta_star, eps, rng));

        try {
            const SolveResult r = solve(spec, x, theta0, config.solver);
            if (r.termination == Termination::IllConditioned) failed[item] = 1;
            else if ((r.theta_hat - config.theta_star).cwiseAbs().maxCoeff() <= tol) converged[item] = 1;
        } catch (const ConditioningError&) {
            failed[item] = 1;
        } catch (const NumericError&) {
            failed[item] = 1;
        }

        bool ok = positive_definite(theta0, x);
        for (std::size_t k = 0; ok && k < config.sc_probes; ++k) {
            Vector probe = config.theta_star;
            for (Eigen::Index i = 0; i < probe.size(); ++i) probe[i] += rng.uniform(-eps, eps);
            ok = positive_definite(clamp_to_domain(config.kernel, probe), x);
        }
        convex[item] = ok ? 1 : 0;
    });

    MonteCarloResult res;
    res.epsilon_grid = config.epsilon_grid;
    const auto n = static_cast<double>(config.n_trials);
    for (std::size_t e = 0; e < ne; ++e) {
        std::size_t c = 0, s = 0, f = 0;
        for (std::size_t t = 0; t < config.n_trials; ++t) {
            c += static_cast<std::size_t>(converged[e * config.n_trials + t]);
            s += static_cast<std::size_t>(convex[e * config.n_trials + t]);
            f += static_cast<std::size_t>(failed[e * config.n_trials + t]);
        }
        res.convergence_rate.push_back(static_cast<double>(c) / n);
        res.strong_convexity_rate.push_back(static_cast<double>(s) / n);
        res.solver_failures.push_back(f);
    }
    res.epsilon_c = empirical_radius(res.epsilon_grid, res.convergence_rate, config.success_threshold);
    res.epsilon_sc = empirical_radius(res.epsilon_grid, res.strong_convexity_rate, config.success_threshold);

    try {
        const LipschitzEstimates lip =
            local_lipschitz(spec, config.theta_star, config.lipschitz.rel_half_width, config.lipschitz.probes);
        const SignalNorms norms = unit_signal_norms(config.snr_db);
        res.constants =
            evaluate_radius(spec, config.theta_star, lip, norms.x, norms.w, norms.x_star, config.lipschitz.safety);
        res.epsilon0 = res.constants.epsilon0;
        res.epsilon0_noiseless = radius_bound(res.constants, 1.0, 0.0, 1.0);
    } catch (const ConditioningError& e) {
        res.constants.note = e.what();
    }
    return res;
}

void write_monte_carlo_csv(const MonteCarloResult& result, std::ostream& out) {
    out << "epsilon,convergence_rate,strong_convexity_rate,solver_failures\n";
    for (std::size_t k = 0; k < result.epsilon_grid.size(); ++k) {
        CsvRow(out) << result.epsilon_grid[k] << result.convergence_rate[k] << result.strong_convexity_rate[k]
                    << result.solver_failures[k];
    }
}

Matrix crb(const ProblemSpec& spec, const Vector& theta_star, const Vector& eta_star, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive and finite");
    const Matrix g = build_dictionary(spec, theta_star);
    const Matrix j = jacobian_columns(spec, theta_star, eta_star);
    const auto p = j.cols();
    Matrix d(g.rows(), p + g.cols());
    d << j, g;
    [[maybe_unused]] const LeastSquares check(d);  // throws ConditioningError when unidentifiable
    const Matrix fisher = d.transpose() * d;
    const Eigen::LLT<Matrix> llt(fisher);
    if (llt.info() != Eigen::Success) throw ConditioningError("Fisher information is singular", 0.0);
    const Matrix cov = sigma * sigma * llt.solve(Matrix::Identity(d.cols(), d.cols()));
    Matrix block = cov.topLeftCorner(p, p);
    return 0.5 * (block + block.transpose());
}

MseConfig two_group_mse(const std::vector<KernelFamily>& kernels, std::size_t n_samples) {
    MseConfig c;
    c.kernels = kernels;
    c.snr_grid = {0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0};
    c.n_samples = n_samples;
    c.half_width = 1.0;
    c.support = {{-1.0, -0.2, 0.6}, {-0.6, 0.2, 1.0}};
    c.theta_star = Vector::Constant(2, 1e-2);
    c.n_trials = 100;
    return c;
}

std::vector<MseRow> mse_vs_snr(const MseConfig& config) {
    if (config.kernels.empty()) throw ValidationError("mse-snr needs at least one kernel");
    if (config.snr_grid.empty()) throw ValidationError("SNR grid must not be empty");
    if (config.n_trials < 1) throw ValidationError("n_trials must be at least 1");
    for (double s : config.snr_grid) {
        if (!std::isfinite(s)) throw ValidationError("SNR values must be finite");
    }

    const std::size_t ns = config.snr_grid.size();
    const std::size_t nt = config.n_trials;
    std::vector<MseRow> rows;
    for (const auto& kernel : config.kernels) {
        const ProblemSpec spec(kernel, SampleGrid(config.n_samples, config.half_width), SupportSpec(config.support));
        spec.check_theta(config.theta_star);
        const Vector eta_star = unit_energy_amplitudes(spec, config.theta_star);
        const double energy = (build_dictionary(spec, config.theta_star) * eta_star).squaredNorm();
        const double limit = config.outlier_factor * config.theta_star.minCoeff();

        std::vector<double> sq_error(ns * nt, 0.0);
        std::vector<char> outlier(ns * nt, 0);
        parallel_for(ns * nt, config.threads, [&](std::size_t item) {
            const std::size_t s = item / nt;
            // Same noise seed for every kernel: the comparison across u is paired.
            const Observation obs = synthesize(spec, config.theta_star, eta_star,
                                               NoiseSpec{config.snr_grid[s], noise_seed(config.seed, item)});
            try {
                const SolveResult r = solve(spec, obs.x, config.theta_star, config.solver);
                const Vector err = r.theta_hat - config.theta_star;
                if (r.termination == Termination::IllConditioned || !(err.cwiseAbs().maxCoeff() <= limit)) {
                    outlier[item] = 1;
                } else {
                    sq_error[item] = err.squaredNorm();
                }
            } catch (const ConditioningError&) {
                outlier[item] = 1;
            } catch (const NumericError&) {
                outlier[item] = 1;
            }
        });

        for (std::size_t s = 0; s < ns; ++s) {
            MseRow row;
            row.kernel = kernel.label();
            row.snr_db = config.snr_grid[s];
            row.trials = nt;
            double sum = 0.0;
            std::size_t kept = 0;
            for (std::size_t t = 0; t < nt; ++t) {
                if (outlier[s * nt + t]) {
                    ++row.outliers;
                    continue;
                }
                sum += sq_error[s * nt + t];
                ++kept;
            }
            if (kept > 0) {
                row.mse = sum / static_cast<double>(kept);
                double var = 0.0;
                for (std::size_t t = 0; t < nt; ++t) {
                    if (!outlier[s * nt + t]) var += (sq_error[s * nt + t] - row.mse) * (sq_error[s * nt + t] - row.mse);
                }
                if (kept > 1) row.mse_std_error = std::sqrt(var / static_cast<double>(kept - 1) / static_cast<double>(kept));
            } else {
                row.mse = std::numeric_limits<double>::quiet_NaN();
            }
            const double sigma2 = energy / (static_cast<double>(config.n_samples) * std::pow(10.0, row.snr_db / 10.0));
            row.crb_trace = crb(spec, config.theta_star, eta_star, std::sqrt(sigma2)).trace();
            rows.push_back(row);
        }
    }
    return rows;
}

void write_mse_csv(const std::vector<MseRow>& rows, std::ostream& out) {
    out << "kernel,snr_db,mse,mse_std_error,crb_trace,trials,outliers\n";
    for (const auto& r : rows) {
        CsvRow(out) << r.kernel << r.snr_db << r.mse << r.mse_std_error << r.crb_trace << r.trials << r.outliers;
    }
}

}  // namespace psfunmix
