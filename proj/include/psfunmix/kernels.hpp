#pragma once

#include <span>
#include <string>
#include <string_view>

namespace psfunmix {

enum class KernelKind { ULaplace, Gaussian, Lorentzian };

/// Parametric, even point spread function g(theta, t) with shape parameter
/// theta living in the open interval (theta_lo, theta_hi).
///
///   u-laplace   g = exp(-(|t|/theta)^u)
///   gaussian    g = exp(-t^2 / (2 theta^2))
///   lorentzian  g = theta^2 / (theta^2 + t^2)
///
/// Derivatives are taken with respect to theta, never t.
class KernelFamily {
public:
    static KernelFamily u_laplace(double u, double theta_lo = 1e-8, double theta_hi = 1e8);
    static KernelFamily gaussian(double theta_lo = 1e-8, double theta_hi = 1e8);
    static KernelFamily lorentzian(double theta_lo = 1e-8, double theta_hi = 1e8);

    /// Parses the config-file id ("u-laplace", "gaussian", "lorentzian").
    /// `u` is only read for u-laplace.
    static KernelFamily from_id(std::string_view id, double u = 2.0, double theta_lo = 1e-8,
                                double theta_hi = 1e8);

    KernelKind kind() const noexcept { return kind_; }
    double u() const noexcept { return u_; }
    double theta_lo() const noexcept { return theta_lo_; }
    double theta_hi() const noexcept { return theta_hi_; }
    bool in_domain(double theta) const noexcept { return theta > theta_lo_ && theta < theta_hi_; }

    std::string id() const;
    /// Human-readable label, e.g. "u-laplace(u=2)".
    std::string label() const;

    /// d^order g / d theta^order at (theta, t). Throws DomainError for theta
    /// outside the domain or order > 2, NumericError on a non-finite result.
    double eval(double theta, double t, int order) const;

    /// Integral of g(theta, .) over the real line.
    double area(double theta) const;

    /// |t| beyond which g and its theta-derivatives are exactly zero in
    /// double precision; +infinity for heavy-tailed families.
    double support_radius(double theta) const;

private:
    KernelFamily(KernelKind kind, double u, double lo, double hi);

    KernelKind kind_;
    double u_;
    double theta_lo_;
    double theta_hi_;
};

inline double eval_kernel(const KernelFamily& family, double theta, double t, int order) {
    return family.eval(theta, t, order);
}

/// Largest relative discrepancy between the analytic order-1 / order-2 theta
/// derivatives and central finite differences of the next-lower order, over
/// the tensor grid theta_samples x t_samples. Step h = 1e-6 * max(theta, 1e-3).
///
/// Errors are measured against max(|analytic|, |fd|, 1e-3 * s) where s is the
/// largest |analytic| of that order over the t samples at the same theta, so
/// isolated zero crossings of a derivative do not dominate.
double check_derivatives(const KernelFamily& family, std::span<const double> theta_samples,
                         std::span<const double> t_samples);

}  // namespace psfunmix
