#include "psfunmix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "psfunmix/errors.hpp"

namespace psfunmix {

namespace {

// exp(-x) underflows to a subnormal / zero beyond this point.
constexpr double kUnderflowExponent = 745.0;

double u_laplace_eval(double u, double theta, double t, int order) {
    const double at = std::abs(t);
    if (at == 0.0) return order == 0 ? 1.0 : 0.0;
    const double ratio = at / theta;
    double r;
    if (u == 1.0) {
        r = ratio;
    } else if (u == 2.0) {
        r = ratio * ratio;
    } else {
        const double log_r = u * std::log(ratio);
        if (log_r > std::log(kUnderflowExponent)) return 0.0;
        r = std::exp(log_r);
    }
    if (r > kUnderflowExponent) return 0.0;
    const double g = std::exp(-r);
    switch (order) {
        case 0: return g;
        case 1: return u * r / theta * g;
        default: return u * r / (theta * theta) * (u * r - u - 1.0) * g;
    }
}

double gaussian_eval(double theta, double t, int order) {
    const double q = t * t / (2.0 * theta * theta);
    if (q > kUnderflowExponent) return 0.0;
    const double g = std::exp(-q);
    switch (order) {
        case 0: return g;
        case 1: return 2.0 * q / theta * g;
        default: return (4.0 * q * q - 6.0 * q) / (theta * theta) * g;
    }
}

double lorentzian_eval(double theta, double t, int order) {
    const double th2 = theta * theta;
    const double t2 = t * t;
    const double d = th2 + t2;
    switch (order) {
        case 0: return th2 / d;
        case 1: return 2.0 * theta * t2 / (d * d);
        default: return 2.0 * t2 * (t2 - 3.0 * th2) / (d * d * d);
    }
}

}  // namespace

KernelFamily::KernelFamily(KernelKind kind, double u, double lo, double hi)
    : kind_(kind), u_(u), theta_lo_(lo), theta_hi_(hi) {
    if (!(lo > 0.0) || !(hi > lo)) {
        throw DomainError("kernel theta domain must satisfy 0 < theta_lo < theta_hi");
    }
}

KernelFamily KernelFamily::u_laplace(double u, double theta_lo, double theta_hi) {
    if (!(u > 0.0) || !std::isfinite(u)) throw DomainError("u-laplace exponent u must be positive");
    return KernelFamily(KernelKind::ULaplace, u, theta_lo, theta_hi);
}

KernelFamily KernelFamily::gaussian(double theta_lo, double theta_hi) {
    return KernelFamily(KernelKind::Gaussian, 0.0, theta_lo, theta_hi);
}

KernelFamily KernelFamily::lorentzian(double theta_lo, double theta_hi) {
    return KernelFamily(KernelKind::Lorentzian, 0.0, theta_lo, theta_hi);
}

KernelFamily KernelFamily::from_id(std::string_view id, double u, double theta_lo, double theta_hi) {
    if (id == "u-laplace" || id == "u_laplace") return u_laplace(u, theta_lo, theta_hi);
    if (id == "gaussian") return gaussian(theta_lo, theta_hi);
    if (id == "lorentzian") return lorentzian(theta_lo, theta_hi);
    throw ValidationError("unknown kernel family '" + std::string(id) + "'");
}

std::string KernelFamily::id() const {
    switch (kind_) {
        case KernelKind::ULaplace: return "u-laplace";
        case KernelKind::Gaussian: return "gaussian";
        case KernelKind::Lorentzian: return "lorentzian";
    }
    return "unknown";
}

std::string KernelFamily::label() const {
    if (kind_ != KernelKind::ULaplace) return id();
    std::ostringstream os;
    os << "u-laplace(u=" << u_ << ")";
    return os.str();
}

double KernelFamily::eval(double theta, double t, int order) const {
    if (order < 0 || order > 2) throw DomainError("kernel derivative order must be 0, 1 or 2");
    if (!in_domain(theta)) {
        std::ostringstream os;
        os << "theta=" << theta << " outside kernel domain (" << theta_lo_ << ", " << theta_hi_ << ")";
        throw DomainError(os.str());
    }
    double v = 0.0;
    switch (kind_) {
        case KernelKind::ULaplace: v = u_laplace_eval(u_, theta, t, order); break;
        case KernelKind::Gaussian: v = gaussian_eval(theta, t, order); break;
        case KernelKind::Lorentzian: v = lorentzian_eval(theta, t, order); break;
    }
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite kernel value at theta=" << theta << ", t=" << t << ", order=" << order;
        throw NumericError(os.str());
    }
    return v;
}

double KernelFamily::area(double theta) const {
    switch (kind_) {
        case KernelKind::ULaplace: return 2.0 * theta * std::tgamma(1.0 + 1.0 / u_);
        case KernelKind::Gaussian: return theta * std::sqrt(2.0 * std::numbers::pi);
        case KernelKind::Lorentzian: return std::numbers::pi * theta;
    }
    return 0.0;
}

double KernelFamily::support_radius(double theta) const {
    switch (kind_) {
        case KernelKind::ULaplace: return theta * std::pow(kUnderflowExponent, 1.0 / u_) * (1.0 + 1e-12);
        case KernelKind::Gaussian: return theta * std::sqrt(2.0 * kUnderflowExponent) * (1.0 + 1e-12);
        case KernelKind::Lorentzian: return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

double check_derivatives(const KernelFamily& family, std::span<const double> theta_samples,
                         std::span<const double> t_samples) {
    double worst = 0.0;
    std::vector<double> analytic(t_samples.size());
    std::vector<double> fd(t_samples.size());
    for (double theta : theta_samples) {
        const double h = 1e-6 * std::max(theta, 1e-3);
        for (int order = 1; order <= 2; ++order) {
            double scale = 0.0;
            for (std::size_t k = 0; k < t_samples.size(); ++k) {
                const double t = t_samples[k];
                analytic[k] = family.eval(theta, t, order);
                fd[k] = (family.eval(theta + h, t, order - 1) - family.eval(theta - h, t, order - 1)) /
                        (2.0 * h);
                scale = std::max(scale, std::abs(analytic[k]));
            }
            for (std::size_t k = 0; k < t_samples.size(); ++k) {
                const double denom = std::max({std::abs(analytic[k]), std::abs(fd[k]), 1e-3 * scale});
                if (denom == 0.0) continue;
                worst = std::max(worst, std::abs(analytic[k] - fd[k]) / denom);
            }
        }
    }
    return worst;
}

}  // namespace psfunmix
