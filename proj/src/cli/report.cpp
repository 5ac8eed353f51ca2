#include "report.hpp"

#include <cmath>
#include <cstdio>

#include "psfunmix/errors.hpp"

namespace psfunmix::cli {

namespace {

// JSON has no infinities; keep them readable instead of collapsing to null.
Json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "inf" : "-inf";
}

Json array3(const std::array<double, 3>& a) { return Json::array({number(a[0]), number(a[1]), number(a[2])}); }

}  // namespace

Json to_json(const Vector& v) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(number(v[i]));
    return j;
}

Json to_json(const LipschitzEstimates& l) {
    return Json{{"c_mu", number(l.c_mu)},
                {"c_delta", number(l.c_delta)},
                {"c_g", number(l.c_g)},
                {"c_g_plus", number(l.c_g_plus)},
                {"c_mu_order", array3(l.c_mu_order)},
                {"c_delta_order", array3(l.c_delta_order)},
                {"theta_lo", l.theta_lo},
                {"theta_hi", l.theta_hi},
                {"theta_ref", l.theta_ref},
                {"delta", number(l.delta)},
                {"n_probes", l.n_probes}};
}

Json to_json(const TheoremConstants& c) {
    return Json{{"epsilon0", number(c.epsilon0)},
                {"feasible", c.feasible},
                {"denominators_positive", c.denominators_positive},
                {"lambda_min", array3(c.lambda_min)},
                {"lambda_max", array3(c.lambda_max)},
                {"Lambda_min", array3(c.Lambda_min)},
                {"Lambda_max", array3(c.Lambda_max)},
                {"S", array3(c.s_a)},
                {"alpha_star", number(c.alpha_star)},
                {"beta_star", number(c.beta_star)},
                {"gamma_star", number(c.gamma_star)},
                {"norm_x", c.norm_x},
                {"norm_w", c.norm_w},
                {"norm_x_star", c.norm_x_star},
                {"n_samples", c.n_samples},
                {"n_groups", c.n_groups},
                {"delta", number(c.delta)},
                {"lipschitz", to_json(c.lipschitz)},
                {"note", c.note}};
}

Json to_json(const SolveResult& r, bool with_trace) {
    Json j{{"theta_hat", to_json(r.theta_hat)},
           {"eta_hat", to_json(r.eta_hat)},
           {"converged", r.converged},
           {"termination", to_string(r.termination)},
           {"message", r.message},
           {"iterations", r.iterations.empty() ? 0 : r.iterations.size() - 1}};
    if (with_trace) {
        Json trace = Json::array();
        for (const auto& it : r.iterations) {
            trace.push_back({{"theta", to_json(it.theta)},
                             {"loss", number(it.loss)},
                             {"gradient_inf", number(it.gradient_inf)},
                             {"step", to_string(it.kind)}});
        }
        j["trace"] = trace;
    }
    return j;
}

Json to_json(const BoltzmannResult& b) {
    Json species = Json::array();
    for (const auto& s : b.species) {
        species.push_back({{"species", s.species},
                           {"intercept", s.intercept},
                           {"lines_used", s.lines_used},
                           {"in_slope", s.in_slope}});
    }
    return Json{{"temperature_k", b.temperature},
                {"slope_per_ev", b.slope},
                {"residual", b.residual},
                {"species", species},
                {"warnings", b.warnings}};
}

KernelFamily parse_kernel(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    if (name == "u-laplace") {
        if (colon == std::string::npos) throw ValidationError("u-laplace kernel needs an exponent, e.g. 'u-laplace:2'");
        const std::string arg = text.substr(colon + 1);
        std::size_t used = 0;
        double u = 0.0;
        try {
            u = std::stod(arg, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != arg.size() || arg.empty()) throw ValidationError("bad u-laplace exponent '" + arg + "'");
        return KernelFamily::u_laplace(u);
    }
    if (colon != std::string::npos) throw ValidationError("kernel '" + name + "' takes no parameter");
    if (name == "gaussian") return KernelFamily::gaussian();
    if (name == "lorentzian") return KernelFamily::lorentzian();
    throw ValidationError("unknown kernel '" + text + "' (expected u-laplace:<u>, gaussian or lorentzian)");
}

std::string kernel_slug(const KernelFamily& k) {
    if (k.kind() != KernelKind::ULaplace) return k.id();
    char buf[48];
    std::snprintf(buf, sizeof buf, "u-laplace-u%g", k.u());
    return buf;
}

}  // namespace psfunmix::cli
