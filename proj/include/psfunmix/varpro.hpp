#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psfunmix/dictionary.hpp"

namespace psfunmix {

/// Everything the projected least-squares functional yields at one theta.
///
/// The Hessian model is split as hessian = (E + R) / N with
///   E = J^T P J          J = [G_{1,1} eta_1, ..., G_{1,p} eta_p], P = I - G G^+
///   R = diag_i <G_{2,i} eta_i, P x>
/// where eta = G^+ x. E is positive semidefinite and R is diagonal.
struct VarProEvaluation {
    double loss = 0.0;
    Vector gradient;
    Matrix hessian;
    Matrix curvature_E;
    Matrix residual_R;
    Vector eta_hat;
    Vector projected_residual;
    std::size_t n_samples = 0;

    /// (lambda_min(E) - max_i |R_ii|) / N, the Weyl lower bound on lambda_min(hessian).
    double weyl_lower_bound() const;
};

double loss(const ProblemSpec& spec, const Vector& theta, const Vector& x);
Vector amplitudes(const ProblemSpec& spec, const Vector& theta, const Vector& x);

/// N x p matrix whose column i is G_{1,i} eta_i (eta_i: amplitudes of group i).
Matrix jacobian_columns(const ProblemSpec& spec, const Vector& theta, const Vector& eta_hat);

Vector gradient(const ProblemSpec& spec, const Vector& theta, const Vector& x);
VarProEvaluation hessian(const ProblemSpec& spec, const Vector& theta, const Vector& x);

/// Callback run after every hessian() evaluation, from the evaluating
/// thread. Used to audit invariants across whole experiment runs.
using HessianObserver = void (*)(const VarProEvaluation&);
/// Installs `observer` (nullptr removes it) and returns the previous one.
HessianObserver set_hessian_observer(HessianObserver observer);

/// Smallest eigenvalue of the symmetric part of `h`.
double min_eigenvalue(const Matrix& h);

enum class StepKind { Initial, Newton, Gradient };
enum class Termination {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    IllConditioned,
    BoundaryStalled,
    LineSearchFailed,
};

std::string to_string(StepKind kind);
std::string to_string(Termination reason);

struct SolveOptions {
    double tol_g = 1e-10;
    int max_iter = 500;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 60;
    double step_tol = 1e-14;
    int stall_limit = 5;
    /// Largest relative change of any theta_i in one trial step.
    double max_relative_step = 0.5;
    /// Optional box tighter than the kernel domain.
    std::optional<Vector> lower;
    std::optional<Vector> upper;
};

struct IterationRecord {
    Vector theta;
    double loss = 0.0;
    double gradient_inf = 0.0;
    StepKind kind = StepKind::Initial;
};

struct SolveResult {
    Vector theta_hat;
    Vector eta_hat;
    std::vector<IterationRecord> iterations;
    bool converged = false;
    Termination termination = Termination::MaxIterations;
    std::string message;
};

/// Damped Newton on the projected loss with Armijo backtracking and box
/// projection. Falls back to gradient descent whenever the Hessian model is
/// not positive definite. Never throws for conditioning failures; those end
/// the run with Termination::IllConditioned.
SolveResult solve(const ProblemSpec& spec, const Vector& x, const Vector& theta0, const SolveOptions& options = {});

}  // namespace psfunmix
