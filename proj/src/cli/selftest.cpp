#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "psfunmix/coherence.hpp"
#include "psfunmix/errors.hpp"
#include "psfunmix/experiments.hpp"
#include "psfunmix/random.hpp"
#include "psfunmix/varpro.hpp"

namespace psfunmix::cli {

namespace {

std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

std::vector<KernelFamily> all_families() {
    return {KernelFamily::u_laplace(1.0), KernelFamily::u_laplace(2.0), KernelFamily::u_laplace(20.0),
            KernelFamily::gaussian(), KernelFamily::lorentzian()};
}

// Two groups, spikes on grid points spaced by multiples of `gap` samples.
ProblemSpec random_spec(Rng& rng, const KernelFamily& k, std::size_t n, std::size_t gap) {
    const SampleGrid grid(n, 1.0);
    const std::size_t m = 2 + rng.below(4);
    std::vector<std::vector<double>> groups(2);
    std::size_t s = n / 5;
    for (std::size_t l = 0; l < m; ++l) {
        groups[l < 2 ? l : rng.below(2)].push_back(grid.instant(s));
        s += gap * (1 + rng.below(2));
    }
    return ProblemSpec(k, grid, SupportSpec(groups));
}

double fd_loss_gradient_error(const ProblemSpec& spec, const Vector& theta, const Vector& x) {
    const Vector g = gradient(spec, theta, x);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-6 * theta[i];
        Vector tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        const double fd = (loss(spec, tp, x) - loss(spec, tm, x)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(g.cwiseAbs().maxCoeff(), 1e-300));
    }
    return worst;
}

}  // namespace

std::vector<CheckItem> self_test(unsigned long long seed) {
    std::vector<CheckItem> out;

    {
        const std::vector<double> thetas = log_space(1e-3, 1.0, 10);
        std::vector<double> ts(10);
        for (std::size_t k = 0; k < ts.size(); ++k) ts[k] = -1.0 + 2.0 * static_cast<double>(k) / 9.0;
        double worst = 0.0;
        for (const auto& f : all_families()) worst = std::max(worst, check_derivatives(f, thetas, ts));
        out.push_back({"kernel derivatives vs finite differences", worst <= 1e-6, "max rel err " + sci(worst)});
    }

    Rng rng = Rng::for_item(seed, 1);
    {
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const ProblemSpec spec = random_spec(rng, KernelFamily::u_laplace(2.0), 200, 12);
            const Vector theta = Vector::Constant(2, rng.uniform(0.02, 0.06));
            const Matrix g = build_dictionary(spec, theta);
            const LeastSquares ls(g);
            const Matrix pinv = ls.pseudo_inverse();
            const Matrix id = Matrix::Identity(g.cols(), g.cols());
            Vector x(g.rows());
            for (Eigen::Index s = 0; s < x.size(); ++s) x[s] = rng.normal();
            const Vector px = ls.complement(x);
            worst = std::max({worst, (pinv * g - id).cwiseAbs().maxCoeff(), (g.transpose() * px).cwiseAbs().maxCoeff(),
                              (ls.complement(px) - px).cwiseAbs().maxCoeff()});
        }
        out.push_back({"projector and pseudo-inverse identities", worst <= 1e-9, "max defect " + sci(worst)});
    }

    double weyl_worst = -1.0;
    auto weyl = [&](const VarProEvaluation& e) {
        weyl_worst = std::max(weyl_worst, e.weyl_lower_bound() - min_eigenvalue(e.hessian));
    };
    {
        double grad = 0.0, hess = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const auto fams = all_families();
            const KernelFamily& k = fams[rng.below(fams.size())];
            const ProblemSpec spec = random_spec(rng, k, 300, 20);
            Vector theta_star(2);
            theta_star << rng.uniform(0.02, 0.05), rng.uniform(0.02, 0.05);
            const Vector eta = unit_energy_amplitudes(spec, theta_star);
            const Vector x = build_dictionary(spec, theta_star) * eta;
            Vector theta = theta_star;
            for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] *= rng.uniform(0.9, 1.1);
            grad = std::max(grad, fd_loss_gradient_error(spec, theta, x));

            const VarProEvaluation e = hessian(spec, theta_star, x);
            weyl(e);
            weyl(hessian(spec, theta, x));
            Matrix fd(2, 2);
            for (Eigen::Index i = 0; i < 2; ++i) {
                const double h = 1e-5 * theta_star[i];
                Vector tp = theta_star, tm = theta_star;
                tp[i] += h;
                tm[i] -= h;
                fd.col(i) = (gradient(spec, tp, x) - gradient(spec, tm, x)) / (2.0 * h);
            }
            hess = std::max(hess, (fd - e.hessian).cwiseAbs().maxCoeff() / e.hessian.cwiseAbs().maxCoeff());
        }
        out.push_back({"gradient vs finite differences", grad <= 1e-6, "max rel err " + sci(grad)});
        out.push_back({"Hessian vs finite differences at the truth", hess <= 1e-4, "max rel err " + sci(hess)});
    }

    {
        std::size_t instances = 0, violations = 0;
        for (int trial = 0; trial < 40; ++trial) {
            const auto fams = all_families();
            const KernelFamily& k = fams[rng.below(fams.size())];
            const ProblemSpec spec = random_spec(rng, k, 400, 10 + rng.below(30));
            Vector theta(2);
            theta << rng.uniform(0.005, 0.03), rng.uniform(0.005, 0.03);
            for (int a = 0; a <= 2; ++a) {
                const GramianBounds b = gramian_bounds(spec, theta, a);
                if (!(b.full_min > 0.0)) continue;
                ++instances;
                const DerivativeBlocks blocks(spec, theta, a);
                const Eigen::SelfAdjointEigenSolver<Matrix> full(blocks.full().transpose() * blocks.full());
                const auto& ev = full.eigenvalues();
                const double tol = 1e-10 * ev.maxCoeff();
                if (ev.minCoeff() < b.full_min - tol || ev.maxCoeff() > b.full_max + tol) ++violations;
                for (std::size_t i = 0; i < spec.n_groups(); ++i) {
                    const Matrix gi = blocks.group(i);
                    const Eigen::SelfAdjointEigenSolver<Matrix> blk(gi.transpose() * gi);
                    const auto& bv = blk.eigenvalues();
                    if (bv.minCoeff() < b.block_min[i] - tol || bv.maxCoeff() > b.block_max[i] + tol) ++violations;
                }
            }
        }
        out.push_back({"Gramian spectrum inside coherence bounds", violations == 0 && instances > 0,
                       std::to_string(instances) + " instances, " + std::to_string(violations) + " violations"});
    }

    out.push_back({"Weyl split lower bound", weyl_worst <= 1e-12, "max excess " + sci(std::max(weyl_worst, 0.0))});
    return out;
}

}  // namespace psfunmix::cli
