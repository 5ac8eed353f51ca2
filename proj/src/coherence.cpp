#include "psfunmix/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "psfunmix/errors.hpp"

namespace psfunmix {

namespace {

// Kernel samples on the lattice (r - c) h for r = -K .. N-1, stored at index
// r + K, plus the range of indices that can be non-zero. The atom sits on the
// grid sample c nearest the middle, so its energy is that of an on-grid spike.
struct LatticeAtom {
    std::vector<double> values;
    std::ptrdiff_t first = 0;  // inclusive, in r + K indexing
    std::ptrdiff_t last = -1;
};

LatticeAtom sample_lattice(const SampleGrid& grid, const KernelFamily& kernel, double theta, int order,
                           std::ptrdiff_t shifts) {
    const auto n = static_cast<std::ptrdiff_t>(grid.size());
    const double h = grid.spacing();
    const double mid = std::floor(0.5 * static_cast<double>(n - 1));
    LatticeAtom atom;
    atom.values.assign(static_cast<std::size_t>(n + shifts), 0.0);
    std::ptrdiff_t lo = -shifts;
    std::ptrdiff_t hi = n - 1;
    const double radius = kernel.support_radius(theta);
    if (std::isfinite(radius)) {
        lo = std::max(lo, static_cast<std::ptrdiff_t>(std::floor(mid - radius / h)));
        hi = std::min(hi, static_cast<std::ptrdiff_t>(std::ceil(mid + radius / h)));
    }
    kernel.eval(theta, 0.0, order);  // domain and order check
    for (std::ptrdiff_t r = lo; r <= hi; ++r) {
        atom.values[static_cast<std::size_t>(r + shifts)] =
            kernel.eval(theta, (static_cast<double>(r) - mid) * h, order);
    }
    atom.first = lo + shifts;
    atom.last = hi + shifts;
    return atom;
}

// c(k) = sum_s fixed[K + s] * moving[K + s - k], s over the grid.
std::vector<double> correlate(const LatticeAtom& fixed, const LatticeAtom& moving, std::ptrdiff_t n,
                              std::ptrdiff_t shifts) {
    std::vector<double> out(static_cast<std::size_t>(shifts + 1), 0.0);
    // Grid part of `fixed`, in lattice indexing.
    const std::ptrdiff_t f0 = std::max(fixed.first, shifts);
    const std::ptrdiff_t f1 = std::min(fixed.last, shifts + n - 1);
    if (f0 > f1) return out;
    for (std::ptrdiff_t k = 0; k <= shifts; ++k) {
        const std::ptrdiff_t lo = std::max(f0, moving.first + k);
        const std::ptrdiff_t hi = std::min(f1, moving.last + k);
        if (moving.first + k > f1) break;
        if (lo > hi) continue;
        const Eigen::Map<const Vector> a(fixed.values.data() + lo, hi - lo + 1);
        const Eigen::Map<const Vector> b(moving.values.data() + lo - k, hi - lo + 1);
        out[static_cast<std::size_t>(k)] = std::abs(a.dot(b));
    }
    return out;
}

constexpr double kTotalRelativeCutoff = 1e-12;

}  // namespace

CoherenceProfile::CoherenceProfile(const SampleGrid& grid, const KernelFamily& kernel, double theta_i,
                                   double theta_j, int order)
    : order_(order), spacing_(grid.spacing()) {
    const auto n = static_cast<std::ptrdiff_t>(grid.size());
    const std::ptrdiff_t shifts = 2 * (n - 1);
    const LatticeAtom ai = sample_lattice(grid, kernel, theta_i, order, shifts);
    if (theta_i == theta_j) {
        corr_ = correlate(ai, ai, n, shifts);
    } else {
        const LatticeAtom aj = sample_lattice(grid, kernel, theta_j, order, shifts);
        corr_ = correlate(ai, aj, n, shifts);
        const std::vector<double> swapped = correlate(aj, ai, n, shifts);
        for (std::size_t k = 0; k < corr_.size(); ++k) corr_[k] = std::max(corr_[k], swapped[k]);
    }
    suffix_sup_.resize(corr_.size());
    double running = 0.0;
    for (std::size_t k = corr_.size(); k-- > 0;) {
        running = std::max(running, corr_[k]);
        suffix_sup_[k] = running;
    }
}

double CoherenceProfile::mu(double delta) const {
    if (!(delta >= 0.0)) throw DomainError("coherence separation must be non-negative");
    const double k = std::ceil(delta / spacing_ - 1e-9);
    if (k >= static_cast<double>(suffix_sup_.size())) return 0.0;
    return suffix_sup_[static_cast<std::size_t>(std::max(k, 0.0))];
}

CoherenceProfile::Total CoherenceProfile::total(double delta) const {
    if (!(delta > 0.0)) throw DomainError("total coherence needs a positive separation");
    Total t;
    const double cap = spacing_ * static_cast<double>(suffix_sup_.size() - 1);
    const double first = mu(delta);
    double sum = 0.0;
    for (std::size_t m = 1;; ++m) {
        const double dm = static_cast<double>(m) * delta;
        if (dm > cap) {
            t.truncation_bound = 0.0;
            break;
        }
        const double term = mu(dm);
        if (term == 0.0 || term < kTotalRelativeCutoff * first) {
            t.truncation_bound = term;
            break;
        }
        sum += term;
        t.terms = m;
    }
    t.value = 2.0 * sum;
    return t;
}

double coherence(const ProblemSpec& spec, double theta_i, double theta_j, double delta, int order) {
    return CoherenceProfile(spec.grid(), spec.kernel(), theta_i, theta_j, order).mu(delta);
}

CoherenceReport total_coherence(const ProblemSpec& spec, double theta_i, double theta_j, double delta, int order) {
    if (!(delta > 0.0)) throw DomainError("total coherence needs a positive separation");
    const CoherenceProfile profile(spec.grid(), spec.kernel(), theta_i, theta_j, order);
    const auto t = profile.total(delta);
    return {profile.mu(delta), t.value, order, t.terms, t.truncation_bound};
}

double coherence_row_sum(const ProblemSpec& spec, const Vector& theta, double delta, int order) {
    const auto p = theta.size();
    double best = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            row += CoherenceProfile(spec.grid(), spec.kernel(), theta[i], theta[j], order).total(delta).value;
        }
        best = std::max(best, row);
    }
    return best;
}

GramianBounds gramian_bounds(const ProblemSpec& spec, const Vector& theta, int order) {
    spec.check_theta(theta);
    const auto p = theta.size();
    double delta = spec.min_separation();
    if (!std::isfinite(delta)) delta = std::numeric_limits<double>::max();

    GramianBounds b;
    double min_diag = std::numeric_limits<double>::infinity();
    double max_diag = 0.0;
    double row_sum = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        double row = 0.0;
        double mu0 = 0.0;
        double own_total = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const CoherenceProfile prof(spec.grid(), spec.kernel(), theta[i], theta[j], order);
            const double c = prof.total(delta).value;
            row += c;
            if (i == j) {
                mu0 = prof.mu(0.0);
                own_total = c;
            }
        }
        b.block_min.push_back(0.5 * mu0 - own_total);
        b.block_max.push_back(mu0 + own_total);
        min_diag = std::min(min_diag, mu0);
        max_diag = std::max(max_diag, mu0);
        row_sum = std::max(row_sum, row);
    }
    b.full_min = 0.5 * min_diag - row_sum;
    b.full_max = max_diag + row_sum;
    return b;
}

LipschitzEstimates LipschitzEstimates::scaled(double factor) const {
    LipschitzEstimates out = *this;
    for (auto& c : out.c_mu_order) c *= factor;
    for (auto& c : out.c_delta_order) c *= factor;
    out.c_mu *= factor;
    out.c_delta *= factor;
    out.c_g *= factor;
    out.c_g_plus *= factor;
    return out;
}

namespace {

double spectral_norm(const Matrix& m) {
    const Matrix gram = m.cols() <= m.rows() ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

}  // namespace

LipschitzEstimates estimate_lipschitz(const ProblemSpec& spec, double theta_lo, double theta_hi, double delta,
                                      std::size_t n_probes) {
    if (n_probes < 2) throw ValidationError("Lipschitz estimation needs at least two probes");
    if (!(theta_hi > theta_lo)) throw ValidationError("Lipschitz probe range must be non-empty");
    if (!(delta > 0.0)) throw DomainError("Lipschitz estimation needs a positive separation");

    LipschitzEstimates est;
    est.theta_lo = theta_lo;
    est.theta_hi = theta_hi;
    est.theta_ref = 0.5 * (theta_lo + theta_hi);
    est.delta = delta;
    est.n_probes = n_probes;

    std::vector<double> probes(n_probes + 1);
    for (std::size_t k = 0; k <= n_probes; ++k) {
        probes[k] = theta_lo + (theta_hi - theta_lo) * static_cast<double>(k) / static_cast<double>(n_probes);
    }

    for (int a = 0; a <= 2; ++a) {
        std::vector<double> mu0(probes.size());
        std::vector<double> tot(probes.size());
        for (std::size_t k = 0; k < probes.size(); ++k) {
            const CoherenceProfile prof(spec.grid(), spec.kernel(), probes[k], est.theta_ref, a);
            mu0[k] = prof.mu(0.0);
            tot[k] = prof.total(delta).value;
        }
        double c_mu = 0.0;
        double c_delta = 0.0;
        for (std::size_t k = 0; k + 1 < probes.size(); ++k) {
            const double step = probes[k + 1] - probes[k];
            c_mu = std::max(c_mu, std::abs(mu0[k + 1] - mu0[k]) / step);
            c_delta = std::max(c_delta, std::abs(tot[k + 1] - tot[k]) / step);
        }
        est.c_mu_order[static_cast<std::size_t>(a)] = c_mu;
        est.c_delta_order[static_cast<std::size_t>(a)] = c_delta;
        est.c_mu = std::max(est.c_mu, c_mu);
        est.c_delta = std::max(est.c_delta, c_delta);
    }

    // Directions: all groups together, then each group alone (p > 1).
    const auto p = static_cast<Eigen::Index>(spec.n_groups());
    std::vector<Vector> directions;
    directions.push_back(Vector::Ones(p));
    if (p > 1) {
        for (Eigen::Index i = 0; i < p; ++i) directions.push_back(Vector::Unit(p, i));
    }
    const Vector reference = Vector::Constant(p, est.theta_ref);
    for (const Vector& dir : directions) {
        Matrix prev_g;
        Matrix prev_pinv;
        Vector prev_theta;
        for (std::size_t k = 0; k < probes.size(); ++k) {
            const Vector theta = reference + (probes[k] - est.theta_ref) * dir;
            Matrix g = build_dictionary(spec, theta);
            Matrix pinv = LeastSquares(g).pseudo_inverse();
            if (k > 0) {
                const double dist = (theta - prev_theta).norm();
                est.c_g = std::max(est.c_g, spectral_norm(g - prev_g) / dist);
                est.c_g_plus = std::max(est.c_g_plus, spectral_norm(pinv - prev_pinv) / dist);
            }
            prev_g = std::move(g);
            prev_pinv = std::move(pinv);
            prev_theta = theta;
        }
    }
    return est;
}

}  // namespace psfunmix
