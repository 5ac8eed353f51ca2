#include "psfunmix/varpro.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "psfunmix/errors.hpp"

namespace psfunmix {

namespace {

void check_observation(const ProblemSpec& spec, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != spec.n_samples()) {
        throw ValidationError("observation length does not match the sample grid");
    }
}

Vector group_amplitudes(const ProblemSpec& spec, const Vector& eta, std::size_t i) {
    return eta.segment(static_cast<Eigen::Index>(spec.support().group_offset(i)),
                       static_cast<Eigen::Index>(spec.support().group_size(i)));
}

// Column i = G_{a,i} eta_i.
Matrix weighted_blocks(const ProblemSpec& spec, const DerivativeBlocks& blocks, const Vector& eta) {
    Matrix out(static_cast<Eigen::Index>(spec.n_samples()), static_cast<Eigen::Index>(spec.n_groups()));
    for (std::size_t i = 0; i < spec.n_groups(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = blocks.group(i) * group_amplitudes(spec, eta, i);
    }
    return out;
}

}  // namespace

double VarProEvaluation::weyl_lower_bound() const {
    const double r_norm = residual_R.diagonal().cwiseAbs().maxCoeff();
    return (min_eigenvalue(curvature_E) - r_norm) / static_cast<double>(n_samples);
}

double loss(const ProblemSpec& spec, const Vector& theta, const Vector& x) {
    check_observation(spec, x);
    const LeastSquares ls(build_dictionary(spec, theta));
    return ls.complement(x).squaredNorm() / (2.0 * static_cast<double>(spec.n_samples()));
}

Vector amplitudes(const ProblemSpec& spec, const Vector& theta, const Vector& x) {
    check_observation(spec, x);
    return LeastSquares(build_dictionary(spec, theta)).coefficients(x);
}

Matrix jacobian_columns(const ProblemSpec& spec, const Vector& theta, const Vector& eta_hat) {
    if (static_cast<std::size_t>(eta_hat.size()) != spec.n_columns()) {
        throw ValidationError("amplitude vector does not match dictionary columns");
    }
    return weighted_blocks(spec, DerivativeBlocks(spec, theta, 1), eta_hat);
}

Vector gradient(const ProblemSpec& spec, const Vector& theta, const Vector& x) {
    check_observation(spec, x);
    const LeastSquares ls(build_dictionary(spec, theta));
    const Vector eta = ls.coefficients(x);
    const Vector r = ls.complement(x);
    const Matrix j = weighted_blocks(spec, DerivativeBlocks(spec, theta, 1), eta);
    return -(j.transpose() * r) / static_cast<double>(spec.n_samples());
}

namespace {

std::atomic<HessianObserver> g_observer{nullptr};

}  // namespace

VarProEvaluation hessian(const ProblemSpec& spec, const Vector& theta, const Vector& x) {
    check_observation(spec, x);
    const LeastSquares ls(build_dictionary(spec, theta));
    const auto n = static_cast<double>(spec.n_samples());
    const auto p = static_cast<Eigen::Index>(spec.n_groups());

    VarProEvaluation ev;
    ev.n_samples = spec.n_samples();
    ev.eta_hat = ls.coefficients(x);
    ev.projected_residual = ls.complement(x);
    ev.loss = ev.projected_residual.squaredNorm() / (2.0 * n);

    const Matrix j = weighted_blocks(spec, DerivativeBlocks(spec, theta, 1), ev.eta_hat);
    ev.gradient = -(j.transpose() * ev.projected_residual) / n;

    Matrix pj(j.rows(), j.cols());
    for (Eigen::Index i = 0; i < p; ++i) pj.col(i) = ls.complement(j.col(i));
    ev.curvature_E = pj.transpose() * pj;

    const Matrix k = weighted_blocks(spec, DerivativeBlocks(spec, theta, 2), ev.eta_hat);
    ev.residual_R = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) ev.residual_R(i, i) = k.col(i).dot(ev.projected_residual);

    ev.hessian = (ev.curvature_E + ev.residual_R) / n;
    if (const HessianObserver obs = g_observer.load(std::memory_order_acquire)) obs(ev);
    return ev;
}

HessianObserver set_hessian_observer(HessianObserver observer) {
    return g_observer.exchange(observer, std::memory_order_acq_rel);
}

double min_eigenvalue(const Matrix& h) {
    if (h.rows() != h.cols() || h.rows() == 0) throw ValidationError("min_eigenvalue needs a square matrix");
    const Matrix sym = 0.5 * (h + h.transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()[0];
}

std::string to_string(StepKind kind) {
    switch (kind) {
        case StepKind::Initial: return "initial";
        case StepKind::Newton: return "newton";
        case StepKind::Gradient: return "gradient";
    }
    return "unknown";
}

std::string to_string(Termination reason) {
    switch (reason) {
        case Termination::GradientTolerance: return "gradient-tolerance";
        case Termination::StepTolerance: return "step-tolerance";
        case Termination::MaxIterations: return "max-iterations";
        case Termination::IllConditioned: return "ill-conditioned";
        case Termination::BoundaryStalled: return "boundary-stalled";
        case Termination::LineSearchFailed: return "line-search-failed";
    }
    return "unknown";
}

namespace {

struct Box {
    Vector lo;
    Vector hi;

    Vector project(const Vector& theta) const { return theta.cwiseMax(lo).cwiseMin(hi); }
};

Box make_box(const ProblemSpec& spec, const SolveOptions& options) {
    const auto p = static_cast<Eigen::Index>(spec.n_groups());
    const KernelFamily& k = spec.kernel();
    // The kernel domain is open; stay a relative hair inside it.
    Box box{Vector::Constant(p, k.theta_lo() * (1.0 + 1e-9)), Vector::Constant(p, k.theta_hi() * (1.0 - 1e-9))};
    if (options.lower) {
        if (options.lower->size() != p) throw ValidationError("solver lower bound must have p entries");
        box.lo = box.lo.cwiseMax(*options.lower);
    }
    if (options.upper) {
        if (options.upper->size() != p) throw ValidationError("solver upper bound must have p entries");
        box.hi = box.hi.cwiseMin(*options.upper);
    }
    if ((box.lo.array() > box.hi.array()).any()) throw ValidationError("solver box is empty");
    return box;
}

double try_loss(const ProblemSpec& spec, const Vector& theta, const Vector& x) {
    try {
        return loss(spec, theta, x);
    } catch (const ConditioningError&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

SolveResult solve(const ProblemSpec& spec, const Vector& x, const Vector& theta0, const SolveOptions& options) {
    spec.check_theta(theta0);
    check_observation(spec, x);
    const Box box = make_box(spec, options);

    SolveResult result;
    Vector theta = box.project(theta0);
    result.theta_hat = theta;

    VarProEvaluation ev;
    try {
        ev = hessian(spec, theta, x);
    } catch (const ConditioningError& e) {
        result.iterations.push_back({theta, std::numeric_limits<double>::quiet_NaN(),
                                     std::numeric_limits<double>::quiet_NaN(), StepKind::Initial});
        result.termination = Termination::IllConditioned;
        result.message = e.what();
        return result;
    }
    result.eta_hat = ev.eta_hat;
    result.iterations.push_back({theta, ev.loss, ev.gradient.cwiseAbs().maxCoeff(), StepKind::Initial});

    int stalled = 0;
    for (int iter = 0;; ++iter) {
        const double g_inf = ev.gradient.cwiseAbs().maxCoeff();
        if (g_inf < options.tol_g) {
            result.converged = true;
            result.termination = Termination::GradientTolerance;
            break;
        }
        if (iter >= options.max_iter) {
            result.termination = Termination::MaxIterations;
            break;
        }

        // Newton direction when the model Hessian is positive definite.
        StepKind kind = StepKind::Gradient;
        Vector direction = -ev.gradient;
        const Eigen::LLT<Matrix> llt(0.5 * (ev.hessian + ev.hessian.transpose()));
        if (llt.info() == Eigen::Success && min_eigenvalue(ev.hessian) > 0.0) {
            Vector newton = llt.solve(-ev.gradient);
            if (newton.allFinite() && newton.dot(ev.gradient) < 0.0) {
                direction = std::move(newton);
                kind = StepKind::Newton;
            }
        }

        bool accepted = false;
        bool tiny_step = false;
        Vector trial;
        double trial_loss = 0.0;
        bool clipped = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1) {
                if (kind != StepKind::Newton) break;
                kind = StepKind::Gradient;
                direction = -ev.gradient;
            }
            // Cap the trial step relative to the current theta.
            const double cap = ((direction.cwiseAbs().array()) /
                                (options.max_relative_step * theta.cwiseAbs().array()))
                                   .maxCoeff();
            Vector d = cap > 1.0 ? Vector(direction / cap) : direction;
            double alpha = 1.0;
            for (int bt = 0; bt < options.max_backtracks; ++bt, alpha *= options.backtrack) {
                const Vector raw = theta + alpha * d;
                trial = box.project(raw);
                const Vector step = trial - theta;
                if (step.norm() < options.step_tol) {
                    tiny_step = true;
                    break;
                }
                trial_loss = try_loss(spec, trial, x);
                if (trial_loss <= ev.loss + options.armijo_c * ev.gradient.dot(step) && trial_loss <= ev.loss) {
                    accepted = true;
                    clipped = (trial - raw).cwiseAbs().maxCoeff() > 0.0;
                    break;
                }
            }
            if (tiny_step) break;
        }

        if (!accepted) {
            result.termination = tiny_step ? Termination::StepTolerance : Termination::LineSearchFailed;
            break;
        }

        const double previous_loss = ev.loss;
        const double step_norm = (trial - theta).norm();
        try {
            ev = hessian(spec, trial, x);
        } catch (const ConditioningError& e) {
            result.termination = Termination::IllConditioned;
            result.message = e.what();
            break;
        }
        theta = trial;
        result.theta_hat = theta;
        result.eta_hat = ev.eta_hat;
        result.iterations.push_back({theta, ev.loss, ev.gradient.cwiseAbs().maxCoeff(), kind});

        if (clipped && previous_loss - ev.loss <= 1e-15 * std::max(std::abs(previous_loss), 1e-300)) {
            if (++stalled >= options.stall_limit) {
                result.termination = Termination::BoundaryStalled;
                break;
            }
        } else {
            stalled = 0;
        }
        if (step_norm < options.step_tol) {
            result.termination = Termination::StepTolerance;
            break;
        }
    }
    if (result.converged) result.termination = Termination::GradientTolerance;
    return result;
}

}  // namespace psfunmix
