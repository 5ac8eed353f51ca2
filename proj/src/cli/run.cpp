#include "psfunmix/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "config.hpp"
#include "psfunmix/csv.hpp"
#include "psfunmix/errors.hpp"
#include "psfunmix/parallel.hpp"
#include "psfunmix/version.hpp"
#include "report.hpp"
#include "selftest.hpp"

namespace psfunmix::cli {

namespace fs = std::filesystem;

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
    const char* env = std::getenv("PSF_UNMIX_LOG");
    const std::string v = env ? env : "";
    if (v == "error" || v == "quiet") return Level::Error;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
}

void log(Level level, const std::string& msg) {
    static const Level threshold = log_level();
    if (level > threshold) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "psf-unmix: " << names[static_cast<int>(level)] << ": " << msg << '\n';
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    // fit / synth-spectrum
    std::string spectrum, lines, partition, window, profile;
};

struct Context {
    Config config;
    fs::path out;
    fs::path base;  // directory that relative paths in the config resolve against
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    Json outputs = Json::array();
    Json timings = Json::object();
    Json extra = Json::object();

    void write(const std::string& name, const std::string& content) {
        fs::create_directories(out);
        const fs::path path = out / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << content;
        f.close();
        if (!f) throw std::runtime_error("failed writing " + path.string());
        outputs.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
        log(Level::Info, "wrote " + path.string());
    }

    template <typename Fn>
    auto phase(const std::string& name, Fn&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        struct Record {
            Json& timings;
            std::string name;
            std::chrono::steady_clock::time_point t0;
            ~Record() {
                timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
        } record{timings, name, t0};
        log(Level::Info, "phase " + name);
        return fn();
    }

    std::string path(const std::string& p) const {
        const fs::path fp(p);
        return fp.is_absolute() ? p : (base / fp).string();
    }
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Either `kernel = "u-laplace"` with `u = [..]` (or a scalar u), or a list
// `kernels = ["u-laplace:1", "gaussian"]`.
std::vector<KernelFamily> read_kernels(Config& c, const std::vector<double>& default_u) {
    std::vector<KernelFamily> out;
    if (c.has("kernel") || !c.has("kernels")) {
        const std::string id = c.string("kernel", "u-laplace");
        if (id == "u-laplace") {
            const std::vector<double> us =
                c.has_number("u") ? std::vector<double>{c.number("u", 2.0)} : c.numbers("u", default_u);
            for (double u : us) out.push_back(KernelFamily::u_laplace(u));
        } else {
            out.push_back(parse_kernel(id));
        }
    } else {
        for (const auto& k : c.strings("kernels", {})) out.push_back(parse_kernel(k));
    }
    if (out.empty()) throw ValidationError("no kernel configured");
    return out;
}

KernelFamily read_kernel(Config& c) {
    const auto ks = read_kernels(c, {2.0});
    if (ks.size() != 1) throw ValidationError("this subcommand takes a single kernel");
    return ks.front();
}

LipschitzSettings read_lipschitz(Config& c) {
    LipschitzSettings l;
    l.rel_half_width = c.number("lipschitz.window", l.rel_half_width);
    l.probes = c.count("lipschitz.probes", l.probes, 2);
    l.safety = c.number("lipschitz.safety", l.safety);
    if (!(l.safety >= 1.0)) throw ValidationError("lipschitz.safety must be >= 1");
    return l;
}

SolveOptions read_solver(Config& c) {
    SolveOptions s;
    s.tol_g = c.number("solver.tol_g", s.tol_g);
    s.max_iter = static_cast<int>(c.count("solver.max_iter", static_cast<std::size_t>(s.max_iter), 1));
    s.step_tol = c.number("solver.step_tol", s.step_tol);
    s.armijo_c = c.number("solver.armijo_c", s.armijo_c);
    s.max_relative_step = c.number("solver.max_relative_step", s.max_relative_step);
    return s;
}

std::vector<double> read_grid(Config& c, const std::string& prefix, double lo, double hi, std::size_t n) {
    if (c.has(prefix + "_grid")) {
        return c.numbers(prefix + "_grid", {});
    }
    const double a = c.number(prefix + "_min", lo);
    const double b = c.number(prefix + "_max", hi);
    const std::size_t k = c.count(prefix + "_points", n, 1);
    return log_space(a, b, k);
}

const std::vector<std::vector<double>> kTwoGroupSupport = {{-1.0, -0.2, 0.6}, {-0.6, 0.2, 1.0}};

// --------------------------------------------------------------------------

void cmd_radius_map(Context& ctx) {
    Config& c = ctx.config;
    RadiusMapConfig rc;
    rc.kernels = read_kernels(c, {1.0, 2.0, 20.0});
    rc.n_samples = c.count("n_samples", 1000, 2);
    rc.half_width = c.number("half_width", 1.0);
    rc.theta_grid = read_grid(c, "theta", 1e-3, 1.0, 40);
    rc.delta_grid = read_grid(c, "delta", 1e-2, 1.0, 40);
    rc.snr_db = c.optional_number("snr_db");
    rc.lipschitz = read_lipschitz(c);
    rc.threads = ctx.threads;
    c.finish();

    const auto panels = ctx.phase("radius_map", [&] { return radius_map(rc); });
    Json summary = Json::array();
    for (const auto& p : panels) {
        std::ostringstream os;
        write_radius_map_csv(p, os);
        const std::string name = "radius_map_" + kernel_slug(p.kernel) + ".csv";
        ctx.write(name, os.str());
        summary.push_back({{"kernel", p.kernel.label()},
                           {"csv", name},
                           {"epsilon_max", p.epsilon_max},
                           {"well_posed_cells", p.well_posed},
                           {"cells", p.cells.size()}});
        std::cout << p.kernel.label() << ": epsilon_max=" << format_double(p.epsilon_max)
                  << " well_posed=" << p.well_posed << "/" << p.cells.size() << '\n';
    }
    ctx.write("radius_map_summary.json", dump(Json{{"panels", summary}}));
}

void cmd_monte_carlo(Context& ctx) {
    Config& c = ctx.config;
    const auto kernels = read_kernels(c, {1.0, 2.0, 20.0});
    MonteCarloConfig mc = two_group_monte_carlo(kernels.front(), 2000);
    mc.n_samples = c.count("n_samples", mc.n_samples, 2);
    mc.half_width = c.number("half_width", mc.half_width);
    mc.support = c.nested_numbers("support", kTwoGroupSupport);
    mc.theta_star = to_vector(c.numbers("theta_star", {1e-2, 1e-2}));
    mc.snr_db = c.boolean("noiseless", false) ? std::nullopt : std::optional<double>(c.number("snr_db", 10.0));
    mc.n_trials = c.count("n_trials", 100, 1);
    mc.epsilon_grid = read_grid(c, "epsilon", 1e-5, 1e-2, 20);
    mc.sc_probes = c.count("sc_probes", mc.sc_probes);
    mc.success_threshold = c.number("success_threshold", mc.success_threshold);
    mc.convergence_tol_factor = c.number("convergence_tol_factor", mc.convergence_tol_factor);
    mc.solver = read_solver(c);
    mc.lipschitz = read_lipschitz(c);
    mc.seed = ctx.seed;
    mc.threads = ctx.threads;
    c.finish();

    Json summary = Json::array();
    for (const auto& k : kernels) {
        mc.kernel = k;
        const auto res = ctx.phase("monte_carlo_" + kernel_slug(k), [&] { return monte_carlo(mc); });
        std::ostringstream os;
        write_monte_carlo_csv(res, os);
        const std::string name = "monte_carlo_" + kernel_slug(k) + ".csv";
        ctx.write(name, os.str());
        summary.push_back({{"kernel", k.label()},
                           {"csv", name},
                           {"epsilon_c", res.epsilon_c},
                           {"epsilon_sc", res.epsilon_sc},
                           {"epsilon0", res.epsilon0},
                           {"epsilon0_noiseless", res.epsilon0_noiseless},
                           {"constants", to_json(res.constants)}});
        std::cout << k.label() << ": epsilon_c=" << format_double(res.epsilon_c)
                  << " epsilon_sc=" << format_double(res.epsilon_sc) << " epsilon0=" << format_double(res.epsilon0)
                  << " epsilon0_noiseless=" << format_double(res.epsilon0_noiseless) << '\n';
    }
    ctx.write("monte_carlo_summary.json", dump(Json{{"kernels", summary}}));
}

void cmd_mse_snr(Context& ctx) {
    Config& c = ctx.config;
    MseConfig mc = two_group_mse(read_kernels(c, {1.0, 2.0, 20.0}), 2000);
    mc.n_samples = c.count("n_samples", mc.n_samples, 2);
    mc.half_width = c.number("half_width", mc.half_width);
    mc.support = c.nested_numbers("support", kTwoGroupSupport);
    mc.theta_star = to_vector(c.numbers("theta_star", {1e-2, 1e-2}));
    mc.snr_grid = c.numbers("snr_grid", mc.snr_grid);
    mc.n_trials = c.count("n_trials", 100, 1);
    mc.outlier_factor = c.number("outlier_factor", mc.outlier_factor);
    mc.solver = read_solver(c);
    mc.seed = ctx.seed;
    mc.threads = ctx.threads;
    c.finish();

    const auto rows = ctx.phase("mse_snr", [&] { return mse_vs_snr(mc); });
    std::ostringstream os;
    write_mse_csv(rows, os);
    ctx.write("mse_snr.csv", os.str());
    ctx.extra["initialization"] = "theta0 = theta* (oracle start; isolates estimator variance from basin effects)";
    for (const auto& r : rows) {
        std::cout << r.kernel << " snr=" << format_double(r.snr_db) << " mse=" << format_double(r.mse)
                  << " crb=" << format_double(r.crb_trace) << " outliers=" << r.outliers << '\n';
    }
}

void cmd_coherence(Context& ctx) {
    Config& c = ctx.config;
    const KernelFamily k = read_kernel(c);
    const std::size_t n = c.count("n_samples", 2000, 2);
    const double hw = c.number("half_width", 1.0);
    const double ti = c.number("theta_i", 1e-2);
    const double tj = c.number("theta_j", ti);
    const double delta = c.number("delta", 0.4);
    const auto lip_window = c.number("lipschitz.window", 0.1);
    const auto lip_probes = c.count("lipschitz.probes", 8, 2);
    c.finish();
    if (!(delta > 0.0)) throw ValidationError("delta must be positive");

    const SampleGrid grid(n, hw);
    const ProblemSpec spec(k, grid, SupportSpec(std::vector<std::vector<double>>{{0.0}}));
    Json orders = Json::array();
    std::vector<CoherenceProfile> profiles;
    ctx.phase("coherence", [&] {
        for (int a = 0; a <= 2; ++a) {
            profiles.emplace_back(grid, k, ti, tj, a);
            const auto total = profiles.back().total(delta);
            orders.push_back({{"order", a},
                              {"mu", profiles.back().mu(delta)},
                              {"mu_zero", profiles.back().mu(0.0)},
                              {"total", total.value},
                              {"terms", total.terms},
                              {"truncation_bound", total.truncation_bound}});
        }
        return 0;
    });
    const double lo = std::min(ti, tj) * (1.0 - lip_window);
    const double hi = std::max(ti, tj) * (1.0 + lip_window);
    const auto lip = ctx.phase("lipschitz", [&] { return estimate_lipschitz(spec, lo, hi, delta, lip_probes); });

    std::ostringstream os;
    os << "shift,mu0,mu1,mu2\n";
    for (std::size_t s = 0; s < profiles[0].correlations().size(); ++s) {
        CsvRow(os) << static_cast<double>(s) * grid.spacing() << profiles[0].correlations()[s]
                   << profiles[1].correlations()[s] << profiles[2].correlations()[s];
    }
    ctx.write("coherence_profile.csv", os.str());
    ctx.write("coherence.json", dump(Json{{"kernel", k.label()},
                                          {"theta_i", ti},
                                          {"theta_j", tj},
                                          {"delta", delta},
                                          {"orders", orders},
                                          {"lipschitz", to_json(lip)}}));
    for (const auto& o : orders) {
        std::cout << "order " << o["order"].get<int>() << ": mu=" << format_double(o["mu"].get<double>())
                  << " total=" << format_double(o["total"].get<double>()) << '\n';
    }
}

void cmd_radius(Context& ctx) {
    Config& c = ctx.config;
    const KernelFamily k = read_kernel(c);
    const std::size_t n = c.count("n_samples", 2000, 2);
    const double hw = c.number("half_width", 1.0);
    const auto support = c.nested_numbers("support", kTwoGroupSupport);
    const Vector theta = to_vector(c.numbers("theta_star", {1e-2, 1e-2}));
    const auto snr = c.optional_number("snr_db");
    const LipschitzSettings ls = read_lipschitz(c);
    c.finish();

    const ProblemSpec spec(k, SampleGrid(n, hw), SupportSpec(support));
    const auto lip = ctx.phase("lipschitz", [&] { return local_lipschitz(spec, theta, ls.rel_half_width, ls.probes); });
    const SignalNorms norms = unit_signal_norms(snr);
    const auto constants =
        ctx.phase("constants", [&] { return evaluate_radius(spec, theta, lip, norms.x, norms.w, norms.x_star, ls.safety); });
    ctx.write("radius.json", dump(Json{{"kernel", k.label()},
                                       {"constants", to_json(constants)},
                                       {"epsilon0_noiseless", radius_bound(constants, 1.0, 0.0, 1.0)}}));
    std::cout << k.label() << ": epsilon0=" << format_double(constants.epsilon0)
              << " feasible=" << (constants.feasible ? "yes" : "no") << '\n';
}

// --- LIBS -------------------------------------------------------------------

struct Spectrum {
    std::vector<double> wavelength;
    std::vector<double> intensity;
};

Spectrum read_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open spectrum '" + path + "'");
    Spectrum s;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "wavelength_nm,intensity") throw ParseError("expected header 'wavelength_nm,intensity'", line_no);
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError("expected two fields", line_no);
        try {
            std::size_t a = 0, b = 0;
            const double w = std::stod(line.substr(0, comma), &a);
            const double v = std::stod(line.substr(comma + 1), &b);
            if (a != comma || b != line.size() - comma - 1) throw std::invalid_argument("trailing text");
            s.wavelength.push_back(w);
            s.intensity.push_back(v);
        } catch (const std::exception&) {
            throw ParseError("malformed number", line_no);
        }
    }
    if (s.wavelength.size() < 2) throw ValidationError("spectrum '" + path + "' needs at least two samples");
    return s;
}

std::pair<double, double> parse_window(const std::string& text) {
    const auto colon = text.find(':');
    try {
        if (colon == std::string::npos) throw std::invalid_argument("no colon");
        return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ValidationError("window must look like 256.1:266.5, got '" + text + "'");
    }
}

void cmd_fit(Context& ctx, const Options& opt) {
    Config& c = ctx.config;
    auto pick = [&](const std::string& flag, const std::string& key, const std::string& fallback, bool is_path) {
        if (!flag.empty()) {
            c.record(key, flag);
            return flag;
        }
        const std::string v = c.string(key, fallback);
        return is_path && !v.empty() ? ctx.path(v) : v;
    };
    const std::string spectrum_path = pick(opt.spectrum, "spectrum", "", true);
    const std::string lines_path = pick(opt.lines, "lines", "", true);
    const std::string partition_path = pick(opt.partition, "partition", "", true);
    const std::string window_text = pick(opt.window, "window", "", false);
    const std::string profile = pick(opt.profile, "profile", "lorentzian", false);
    const std::vector<double> theta0_list = c.numbers("theta0", {0.05});
    const bool offset = c.boolean("constant_offset", false);
    const SolveOptions solver = read_solver(c);
    c.finish();
    if (spectrum_path.empty() || lines_path.empty() || partition_path.empty()) {
        throw ValidationError("fit needs a spectrum, a line list and partition functions");
    }

    const Spectrum s = read_spectrum(spectrum_path);
    const LineDatabase db = load_line_database(lines_path, partition_path);
    double lo = s.wavelength.front(), hi = s.wavelength.back();
    if (!window_text.empty()) std::tie(lo, hi) = parse_window(window_text);
    std::vector<double> wl, x;
    for (std::size_t k = 0; k < s.wavelength.size(); ++k) {
        if (s.wavelength[k] >= lo && s.wavelength[k] <= hi) {
            wl.push_back(s.wavelength[k]);
            x.push_back(s.intensity[k]);
        }
    }
    if (wl.size() < 2) throw ValidationError("fewer than two spectrum samples inside the window");
    const double step = (wl.back() - wl.front()) / static_cast<double>(wl.size() - 1);
    for (std::size_t k = 1; k < wl.size(); ++k) {
        if (std::abs(wl[k] - wl[k - 1] - step) > 1e-3 * step) {
            throw ValidationError("spectrum wavelengths must be uniformly spaced inside the window");
        }
    }
    const KernelFamily kernel = profile.rfind("u-laplace", 0) == 0 ? parse_kernel(profile)
                                                                     : KernelFamily::from_id(profile);
    const SpectrumSpec spectrum = build_spectrum_spec(db, wl.front(), wl.back(), wl.size(), kernel, offset);
    Vector theta0(static_cast<Eigen::Index>(spectrum.species.size()));
    if (theta0_list.size() == 1) theta0.setConstant(theta0_list[0]);
    else if (theta0_list.size() == spectrum.species.size()) theta0 = to_vector(theta0_list);
    else throw ValidationError("theta0 needs one value or one per species in the window");

    const Vector xv = to_vector(x);
    const SpectrumFit fit = ctx.phase("fit", [&] { return fit_spectrum(xv, spectrum, theta0, solver); });
    Json report{{"profile", kernel.label()},
                {"window_nm", {wl.front(), wl.back()}},
                {"n_samples", wl.size()},
                {"species", spectrum.species},
                {"solve", to_json(fit.solve, true)}};
    if (fit.solve.termination == Termination::IllConditioned) {
        report["status"] = "solver-failed";
        ctx.write("fit_report.json", dump(report));
        throw ConditioningError("spectrum fit failed: " + fit.solve.message, 0.0);
    }

    Json per_species = Json::array();
    for (std::size_t i = 0; i < fit.species.size(); ++i) {
        Json lines = Json::array();
        for (std::size_t l = 0; l < spectrum.lines[i].size(); ++l) {
            lines.push_back({{"wavelength_nm", spectrum.lines[i][l].wavelength_nm},
                             {"eta", fit.species[i].eta[l]},
                             {"intensity", fit.species[i].intensity[l]}});
        }
        per_species.push_back({{"species", fit.species[i].species}, {"theta_nm", fit.species[i].theta}, {"lines", lines}});
    }
    report["relative_fit_error"] = fit.relative_fit_error;
    report["offset"] = fit.offset;
    report["per_species"] = per_species;

    std::vector<std::vector<double>> intensities;
    for (const auto& sp : fit.species) intensities.push_back(sp.intensity);
    const BoltzmannResult boltz = ctx.phase("boltzmann", [&] { return boltzmann_fit(spectrum.lines, intensities); });
    for (const auto& w : boltz.warnings) log(Level::Warn, w);
    const auto conc = concentrations(boltz.species, db, boltz.temperature);
    report["boltzmann"] = to_json(boltz);
    Json cj = Json::object();
    for (const auto& sp : spectrum.species) cj[sp] = conc.at(sp);
    report["concentrations"] = cj;
    report["status"] = "ok";

    // Fitted curve and per-species components.
    std::ostringstream os;
    os << "wavelength_nm,observed,fitted";
    for (const auto& sp : spectrum.species) os << ',' << sp;
    os << '\n';
    const Matrix g = build_dictionary(spectrum.spec, fit.solve.theta_hat);
    Matrix parts(g.rows(), static_cast<Eigen::Index>(spectrum.species.size()));
    for (std::size_t i = 0; i < spectrum.species.size(); ++i) {
        const auto off = static_cast<Eigen::Index>(spectrum.spec.support().group_offset(i));
        const auto m = static_cast<Eigen::Index>(spectrum.spec.support().group_size(i));
        parts.col(static_cast<Eigen::Index>(i)) = g.middleCols(off, m) * fit.solve.eta_hat.segment(off, m);
    }
    for (std::size_t k = 0; k < wl.size(); ++k) {
        CsvRow row(os);
        row << wl[k] << x[k] << fit.fitted[static_cast<Eigen::Index>(k)];
        for (Eigen::Index i = 0; i < parts.cols(); ++i) row << parts(static_cast<Eigen::Index>(k), i);
    }
    ctx.write("fitted_curve.csv", os.str());
    ctx.write("fit_report.json", dump(report));

    std::cout << "T=" << format_double(boltz.temperature) << " K, fit error " << format_double(fit.relative_fit_error)
              << '\n';
    for (const auto& sp : spectrum.species) std::cout << "  " << sp << ": " << format_double(conc.at(sp)) << '\n';
}

void cmd_synth_spectrum(Context& ctx, const Options& opt) {
    Config& c = ctx.config;
    const std::string lines_path = opt.lines.empty() ? ctx.path(c.string("lines", "data/synthetic_lines.csv")) : opt.lines;
    const std::string partition_path =
        opt.partition.empty() ? ctx.path(c.string("partition", "data/synthetic_partitions.json")) : opt.partition;
    if (!opt.lines.empty()) c.record("lines", opt.lines);
    if (!opt.partition.empty()) c.record("partition", opt.partition);
    const auto window = c.numbers("window", {256.1, 266.5});
    const std::size_t n = c.count("n_samples", 2000, 2);
    const std::string profile = opt.profile.empty() ? c.string("profile", "lorentzian") : opt.profile;
    const double temperature = c.number("temperature", 1e4);
    const auto composition = c.number_table(
        "composition", {{"Al I", 0.915}, {"Cu I", 0.045}, {"Fe I", 0.015}, {"Mg I", 0.025}});
    const auto widths = c.number_table("widths", {{"Al I", 0.03}, {"Cu I", 0.025}, {"Fe I", 0.02}, {"Mg I", 0.035}});
    const bool noiseless = c.boolean("noiseless", false);
    const double snr = c.number("snr_db", 30.0);
    const double scale = c.number("scale", 1.0);
    c.finish();
    if (window.size() != 2) throw ValidationError("window must hold two wavelengths");

    const LineDatabase db = load_line_database(lines_path, partition_path);
    const KernelFamily kernel = profile.rfind("u-laplace", 0) == 0 ? parse_kernel(profile)
                                                                     : KernelFamily::from_id(profile);
    const SpectrumSpec spectrum = build_spectrum_spec(db, window[0], window[1], n, kernel);
    Vector theta(static_cast<Eigen::Index>(spectrum.species.size()));
    for (std::size_t i = 0; i < spectrum.species.size(); ++i) {
        const auto it = widths.find(spectrum.species[i]);
        if (it == widths.end()) throw ValidationError("widths lacks species '" + spectrum.species[i] + "'");
        theta[static_cast<Eigen::Index>(i)] = it->second;
    }
    const Vector eta = forward_amplitudes(spectrum, db, composition, temperature, theta, scale);
    const Observation obs = synthesize(spectrum.spec, theta, eta,
                                       NoiseSpec{noiseless ? std::nullopt : std::optional<double>(snr), ctx.seed});
    std::ostringstream os;
    os << "wavelength_nm,intensity\n";
    for (std::size_t s = 0; s < n; ++s) {
        CsvRow(os) << spectrum.center_nm + spectrum.spec.grid().instant(s) << obs.x[static_cast<Eigen::Index>(s)];
    }
    ctx.write("spectrum.csv", os.str());
    Json truth{{"temperature_k", temperature}, {"profile", kernel.label()}};
    Json cj = Json::object(), wj = Json::object();
    for (std::size_t i = 0; i < spectrum.species.size(); ++i) {
        cj[spectrum.species[i]] = composition.at(spectrum.species[i]);
        wj[spectrum.species[i]] = theta[static_cast<Eigen::Index>(i)];
    }
    truth["composition"] = cj;
    truth["widths_nm"] = wj;
    truth["eta"] = to_json(eta);
    ctx.write("truth.json", dump(truth));
}

void cmd_check(Context& ctx) {
    ctx.config.finish();
    const auto items = ctx.phase("self_test", [&] { return self_test(ctx.seed); });
    bool all = true;
    Json j = Json::array();
    for (const auto& it : items) {
        std::cout << (it.passed ? "PASS  " : "FAIL  ") << it.name << "  (" << it.detail << ")\n";
        all = all && it.passed;
        j.push_back({{"name", it.name}, {"passed", it.passed}, {"detail", it.detail}});
    }
    ctx.write("check.json", dump(Json{{"checks", j}, {"all_passed", all}}));
    if (!all) throw NumericError("self-test failed");
}

int exit_code_for(const std::exception_ptr& e, Json& error) {
    try {
        std::rethrow_exception(e);
    } catch (const ParseError& x) {
        error = {{"kind", "parse"}, {"message", x.what()}};
        return kValidation;
    } catch (const ValidationError& x) {
        error = {{"kind", "validation"}, {"message", x.what()}};
        return kValidation;
    } catch (const DomainError& x) {
        error = {{"kind", "domain"}, {"message", x.what()}};
        return kValidation;
    } catch (const ConditioningError& x) {
        error = {{"kind", "conditioning"}, {"message", x.what()}};
        return kRuntime;
    } catch (const NumericError& x) {
        error = {{"kind", "numeric"}, {"message", x.what()}};
        return kRuntime;
    } catch (const std::exception& x) {
        error = {{"kind", "runtime"}, {"message", x.what()}};
        return kRuntime;
    }
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Shape-parameter estimation for PSF unmixing with known spike support", "psf-unmix"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1, 1);
    Options opt;

    struct Sub {
        std::string name;
        std::string help;
    };
    const std::vector<Sub> subs = {
        {"radius-map", "Radius bound over a (theta*, delta) grid for several kernels"},
        {"monte-carlo", "Empirical convergence and strong-convexity radii"},
        {"mse-snr", "Estimator MSE against the Cramer-Rao bound over SNR"},
        {"coherence", "Coherence, total coherence and Lipschitz estimates for one kernel pair"},
        {"radius", "Radius bound and all constants for one instance"},
        {"fit", "Fit a LIBS spectrum and recover temperature and composition"},
        {"synth-spectrum", "Forward-model a synthetic LIBS spectrum"},
        {"check", "Run the numerical self-test suite"},
    };
    for (const auto& s : subs) {
        CLI::App* sc = app.add_subcommand(s.name, s.help);
        sc->add_option("--config", opt.config, "TOML configuration file");
        sc->add_option("--out", opt.out, "Output directory")->capture_default_str();
        sc->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { opt.seed = v; },
                                               "Random seed (overrides the config)");
        sc->add_option("--threads", opt.threads, "Worker threads (0: available parallelism)");
        if (s.name == "fit" || s.name == "synth-spectrum") {
            sc->add_option("--lines", opt.lines, "Line list CSV");
            sc->add_option("--partition", opt.partition, "Partition-function JSON");
            sc->add_option("--profile", opt.profile, "Line profile (lorentzian, gaussian, u-laplace:<u>)");
        }
        if (s.name == "fit") {
            sc->add_option("--spectrum", opt.spectrum, "Spectrum CSV (wavelength_nm,intensity)");
            sc->add_option("--window", opt.window, "Wavelength window lo:hi in nm");
        }
    }

    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kUsage;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    Context ctx;
    ctx.out = opt.out;
    const auto started = std::chrono::system_clock::now();
    Json manifest{{"tool", "psf-unmix"}, {"version", std::string(kVersion)}, {"subcommand", sub}};
    int code = kOk;
    try {
        if (!opt.config.empty()) {
            ctx.config = Config::load(opt.config);
            ctx.base = fs::path(opt.config).parent_path();
        }
        const std::int64_t cfg_seed = ctx.config.integer("seed", 0);
        if (cfg_seed < 0) throw ValidationError("seed must be non-negative");
        ctx.seed = opt.seed.value_or(static_cast<std::uint64_t>(cfg_seed));
        ctx.config.record("seed", ctx.seed);
        ctx.threads = resolve_threads(opt.threads);
        manifest["config_file"] = opt.config;

        if (sub == "radius-map") cmd_radius_map(ctx);
        else if (sub == "monte-carlo") cmd_monte_carlo(ctx);
        else if (sub == "mse-snr") cmd_mse_snr(ctx);
        else if (sub == "coherence") cmd_coherence(ctx);
        else if (sub == "radius") cmd_radius(ctx);
        else if (sub == "fit") cmd_fit(ctx, opt);
        else if (sub == "synth-spectrum") cmd_synth_spectrum(ctx, opt);
        else if (sub == "check") cmd_check(ctx);
        manifest["status"] = "ok";
    } catch (...) {
        Json error;
        code = exit_code_for(std::current_exception(), error);
        manifest["status"] = "error";
        manifest["error"] = error;
        std::cerr << "psf-unmix: error: " << error["message"].get<std::string>() << '\n';
    }

    manifest["schema_version"] = Config::kSchemaVersion;
    manifest["config"] = ctx.config.resolved();
    manifest["seed"] = ctx.seed;
    manifest["threads"] = ctx.threads;
    manifest["started_at_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(started.time_since_epoch()).count();
    manifest["timings_s"] = ctx.timings;
    manifest["outputs"] = ctx.outputs;
    for (const auto& [k, v] : ctx.extra.items()) manifest[k] = v;
    try {
        fs::create_directories(ctx.out);
        std::ofstream f(ctx.out / "manifest.json", std::ios::binary);
        f << dump(manifest);
        if (!f) throw std::runtime_error("write failed");
    } catch (const std::exception& e) {
        std::cerr << "psf-unmix: error: cannot write manifest: " << e.what() << '\n';
        if (code == kOk) code = kRuntime;
    }
    return code;
}

int run(int argc, const char* const* argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace psfunmix::cli
