#include "psfunmix/libs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "psfunmix/csv.hpp"
#include "psfunmix/errors.hpp"

namespace psfunmix {

namespace {

const char* const kLineHeader = "species,wavelength_nm,a_ki,g_k,e_k_ev";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? comma : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(const std::string& field, const char* name, std::size_t line_no) {
    double v = 0.0;
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParseError("malformed " + std::string(name) + " '" + field + "'", line_no);
    }
    return v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    return out;
}

}  // namespace

double PartitionFunction::operator()(double temperature) const {
    if (!(temperature >= t_min && temperature <= t_max)) {
        std::ostringstream os;
        os << "temperature " << temperature << " K outside partition-function range [" << t_min << ", " << t_max
           << "]";
        throw DomainError(os.str());
    }
    double v = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * temperature + *it;
    return v;
}

LineDatabase::LineDatabase(std::vector<LineRecord> records, std::map<std::string, PartitionFunction> partitions)
    : records_(std::move(records)), partitions_(std::move(partitions)) {
    validate();
}

void LineDatabase::validate() const {
    if (records_.empty()) throw ValidationError("line database is empty");
    std::set<std::pair<std::string, double>> seen;
    for (const auto& r : records_) {
        if (!seen.emplace(r.species, r.wavelength_nm).second) {
            std::ostringstream os;
            os << "duplicate line " << r.species << " at " << r.wavelength_nm << " nm";
            throw ValidationError(os.str());
        }
    }
    for (const auto& s : species()) {
        if (lines_of(s).size() < 2) throw ValidationError("species '" + s + "' has fewer than two lines");
        const auto it = partitions_.find(s);
        if (it == partitions_.end()) throw ValidationError("no partition function for species '" + s + "'");
        const PartitionFunction& u = it->second;
        if (u.coefficients.empty() || !(u.t_min > 0.0) || !(u.t_max > u.t_min)) {
            throw ValidationError("partition function for '" + s + "' needs coefficients and 0 < t_min < t_max");
        }
        constexpr int kChecks = 64;
        for (int k = 0; k <= kChecks; ++k) {
            const double t = u.t_min + (u.t_max - u.t_min) * k / kChecks;
            if (!(u(t) > 0.0)) throw ValidationError("partition function for '" + s + "' is not positive on its range");
        }
    }
}

const PartitionFunction& LineDatabase::partition(const std::string& species) const {
    const auto it = partitions_.find(species);
    if (it == partitions_.end()) throw ValidationError("no partition function for species '" + species + "'");
    return it->second;
}

std::vector<std::string> LineDatabase::species() const {
    std::vector<std::string> out;
    for (const auto& r : records_) {
        if (std::find(out.begin(), out.end(), r.species) == out.end()) out.push_back(r.species);
    }
    return out;
}

std::vector<LineRecord> LineDatabase::lines_of(const std::string& species) const {
    std::vector<LineRecord> out;
    for (const auto& r : records_) {
        if (r.species == species) out.push_back(r);
    }
    return out;
}

std::vector<LineRecord> parse_line_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    std::vector<LineRecord> out;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header) {
            if (t != kLineHeader) throw ParseError(std::string("expected header '") + kLineHeader + "'", line_no);
            header = true;
            continue;
        }
        const auto f = split(t);
        if (f.size() != 5) throw ParseError("expected 5 fields, found " + std::to_string(f.size()), line_no);
        LineRecord r;
        r.species = f[0];
        if (r.species.empty()) throw ParseError("empty species", line_no);
        r.wavelength_nm = parse_number(f[1], "wavelength_nm", line_no);
        r.a_ki = parse_number(f[2], "a_ki", line_no);
        r.g_k = parse_number(f[3], "g_k", line_no);
        r.e_k_ev = parse_number(f[4], "e_k_ev", line_no);
        if (!(r.wavelength_nm > 0.0)) throw ParseError("wavelength must be positive", line_no);
        if (!(r.a_ki > 0.0)) throw ParseError("a_ki must be positive", line_no);
        if (!(r.g_k >= 1.0) || r.g_k != std::floor(r.g_k)) throw ParseError("g_k must be an integer >= 1", line_no);
        if (!(r.e_k_ev >= 0.0)) throw ParseError("e_k_ev must be non-negative", line_no);
        out.push_back(r);
    }
    if (!header) throw ValidationError("line file is empty");
    return out;
}

void write_line_csv(const std::vector<LineRecord>& records, std::ostream& out) {
    out << kLineHeader << '\n';
    for (const auto& r : records) CsvRow(out) << r.species << r.wavelength_nm << r.a_ki << r.g_k << r.e_k_ev;
}

std::map<std::string, PartitionFunction> parse_partition_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("partition JSON: ") + e.what(), 0);
    }
    if (!j.is_object()) throw ParseError("partition JSON must be an object keyed by species", 0);
    std::map<std::string, PartitionFunction> out;
    for (const auto& [species, v] : j.items()) {
        try {
            PartitionFunction u;
            u.coefficients = v.at("coefficients").get<std::vector<double>>();
            u.t_min = v.at("t_min").get<double>();
            u.t_max = v.at("t_max").get<double>();
            out.emplace(species, std::move(u));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("partition entry '" + species + "': " + e.what(), 0);
        }
    }
    return out;
}

void write_partition_json(const std::map<std::string, PartitionFunction>& partitions, std::ostream& out) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [species, u] : partitions) {
        j[species] = {{"coefficients", u.coefficients}, {"t_min", u.t_min}, {"t_max", u.t_max}};
    }
    out << j.dump(2) << '\n';
}

LineDatabase load_line_database(const std::string& lines_csv, const std::string& partitions_json) {
    auto lines = open_input(lines_csv);
    auto parts = open_input(partitions_json);
    return LineDatabase(parse_line_csv(lines), parse_partition_json(parts));
}

void save_line_database(const LineDatabase& db, const std::string& lines_csv, const std::string& partitions_json) {
    auto lines = open_output(lines_csv);
    write_line_csv(db.records(), lines);
    auto parts = open_output(partitions_json);
    write_partition_json(db.partitions(), parts);
}

SpectrumSpec build_spectrum_spec(const LineDatabase& db, double lo_nm, double hi_nm, std::size_t n_samples,
                                 const KernelFamily& profile, bool constant_offset) {
    if (!(hi_nm > lo_nm) || !std::isfinite(lo_nm) || !std::isfinite(hi_nm)) {
        throw ValidationError("spectral window needs lo < hi");
    }
    const double center = 0.5 * (lo_nm + hi_nm);
    const double half = 0.5 * (hi_nm - lo_nm);
    std::vector<std::string> species;
    std::vector<std::vector<LineRecord>> lines;
    std::vector<std::vector<double>> groups;
    for (const auto& s : db.species()) {
        std::vector<LineRecord> in_window;
        std::vector<double> locations;
        for (const auto& r : db.lines_of(s)) {
            if (r.wavelength_nm < lo_nm || r.wavelength_nm > hi_nm) continue;
            in_window.push_back(r);
            locations.push_back(std::clamp(r.wavelength_nm - center, -half, half));
        }
        if (in_window.empty()) continue;
        species.push_back(s);
        lines.push_back(std::move(in_window));
        groups.push_back(std::move(locations));
    }
    if (groups.empty()) throw ValidationError("no database line falls inside the spectral window");
    return SpectrumSpec{ProblemSpec(profile, SampleGrid(n_samples, half), SupportSpec(std::move(groups)), constant_offset),
                        center, std::move(species), std::move(lines)};
}

SpectrumFit fit_spectrum(const Vector& x, const SpectrumSpec& spectrum, const Vector& theta0,
                         const SolveOptions& options) {
    const ProblemSpec& spec = spectrum.spec;
    if (static_cast<std::size_t>(x.size()) != spec.n_samples()) {
        throw ValidationError("spectrum length does not match the sample grid");
    }
    SpectrumFit fit;
    fit.solve = solve(spec, x, theta0, options);
    if (fit.solve.termination == Termination::IllConditioned) return fit;

    const Vector& theta = fit.solve.theta_hat;
    const Vector& eta = fit.solve.eta_hat;
    for (std::size_t i = 0; i < spec.n_groups(); ++i) {
        SpeciesFit s;
        s.species = spectrum.species[i];
        s.theta = theta[static_cast<Eigen::Index>(i)];
        const double area = spec.kernel().area(s.theta);
        const std::size_t off = spec.support().group_offset(i);
        for (std::size_t l = 0; l < spec.support().group_size(i); ++l) {
            const double e = eta[static_cast<Eigen::Index>(off + l)];
            s.eta.push_back(e);
            s.intensity.push_back(e * area);
        }
        fit.species.push_back(std::move(s));
    }
    if (spec.constant_offset()) fit.offset = eta[eta.size() - 1];
    fit.fitted = build_dictionary(spec, theta) * eta;
    const double xn = x.norm();
    fit.relative_fit_error = xn > 0.0 ? (x - fit.fitted).norm() / xn : 0.0;
    return fit;
}

BoltzmannResult boltzmann_fit(const std::vector<std::vector<LineRecord>>& species_lines,
                              const std::vector<std::vector<double>>& intensities) {
    if (species_lines.size() != intensities.size()) throw ValidationError("one intensity list per species required");
    if (species_lines.empty()) throw ValidationError("Boltzmann fit needs at least one species");

    struct Point {
        double e, y, w;
    };
    BoltzmannResult res;
    std::vector<std::vector<Point>> points(species_lines.size());
    double wmax = 0.0;
    for (std::size_t s = 0; s < species_lines.size(); ++s) {
        const auto& lines = species_lines[s];
        if (lines.size() != intensities[s].size()) throw ValidationError("intensity count differs from line count");
        if (lines.empty()) throw ValidationError("Boltzmann fit needs lines for every species");
        for (std::size_t l = 0; l < lines.size(); ++l) {
            const double i = intensities[s][l];
            if (!(i > 0.0) || !std::isfinite(i)) {
                std::ostringstream os;
                os << lines[l].species << " line at " << lines[l].wavelength_nm << " nm has intensity " << i
                   << " and is excluded";
                res.warnings.push_back(os.str());
                continue;
            }
            const double y = std::log(i * lines[l].wavelength_nm / (lines[l].g_k * lines[l].a_ki));
            points[s].push_back({lines[l].e_k_ev, y, i * i});
            wmax = std::max(wmax, i * i);
        }
        if (points[s].empty()) throw ValidationError("every line of species '" + lines[0].species + "' was excluded");
    }

    // Weighted per-species centering, then a single pooled slope.
    std::vector<double> e_bar(points.size()), y_bar(points.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t s = 0; s < points.size(); ++s) {
        double sw = 0.0, se = 0.0, sy = 0.0;
        for (auto& p : points[s]) {
            p.w /= wmax;
            sw += p.w;
            se += p.w * p.e;
            sy += p.w * p.y;
        }
        e_bar[s] = se / sw;
        y_bar[s] = sy / sw;
        double vxx = 0.0, vxy = 0.0;
        for (const auto& p : points[s]) {
            vxx += p.w * (p.e - e_bar[s]) * (p.e - e_bar[s]);
            vxy += p.w * (p.e - e_bar[s]) * (p.y - y_bar[s]);
        }
        BoltzmannSpecies bs;
        bs.species = species_lines[s][0].species;
        bs.lines_used = points[s].size();
        double emin = points[s][0].e, emax = points[s][0].e;
        for (const auto& p : points[s]) {
            emin = std::min(emin, p.e);
            emax = std::max(emax, p.e);
        }
        bs.in_slope = emax > emin;
        if (bs.in_slope) {
            sxx += vxx;
            sxy += vxy;
        } else {
            res.warnings.push_back("species '" + bs.species +
                                   "' has no spread in upper-level energy; excluded from the slope");
        }
        res.species.push_back(bs);
    }
    if (!(sxx > 0.0)) throw ValidationError("Boltzmann slope is unidentifiable: no species spans several energies");
    res.slope = sxy / sxx;
    if (!(res.slope < 0.0)) {
        std::ostringstream os;
        os << "Boltzmann slope " << res.slope << " gives a non-physical temperature";
        throw NumericError(os.str());
    }
    res.temperature = -1.0 / (kBoltzmannEv * res.slope);

    double rss = 0.0, wsum = 0.0;
    for (std::size_t s = 0; s < points.size(); ++s) {
        res.species[s].intercept = y_bar[s] - res.slope * e_bar[s];
        for (const auto& p : points[s]) {
            const double r = p.y - res.species[s].intercept - res.slope * p.e;
            rss += p.w * r * r;
            wsum += p.w;
        }
    }
    res.residual = std::sqrt(rss / wsum);
    return res;
}

std::map<std::string, double> concentrations(const std::vector<BoltzmannSpecies>& intercepts,
                                             const LineDatabase& db, double temperature) {
    if (intercepts.empty()) throw ValidationError("no species to normalize");
    std::vector<double> logs;
    for (const auto& s : intercepts) logs.push_back(std::log(db.partition(s.species)(temperature)) + s.intercept);
    const double top = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (double& l : logs) {
        l = std::exp(l - top);
        sum += l;
    }
    std::map<std::string, double> out;
    for (std::size_t s = 0; s < intercepts.size(); ++s) out[intercepts[s].species] = logs[s] / sum;
    return out;
}

double line_intensity(const LineRecord& line, double concentration, double partition_value, double temperature) {
    return concentration * line.g_k * line.a_ki * std::exp(-line.e_k_ev / (kBoltzmannEv * temperature)) /
           (line.wavelength_nm * partition_value);
}

Vector forward_amplitudes(const SpectrumSpec& spectrum, const LineDatabase& db,
                          const std::map<std::string, double>& composition, double temperature, const Vector& theta,
                          double scale) {
    const ProblemSpec& spec = spectrum.spec;
    spec.check_theta(theta);
    Vector eta = Vector::Zero(static_cast<Eigen::Index>(spec.n_columns()));
    for (std::size_t i = 0; i < spectrum.species.size(); ++i) {
        const auto c = composition.find(spectrum.species[i]);
        if (c == composition.end()) throw ValidationError("composition lacks species '" + spectrum.species[i] + "'");
        const double u = db.partition(spectrum.species[i])(temperature);
        const double area = spec.kernel().area(theta[static_cast<Eigen::Index>(i)]);
        const std::size_t off = spec.support().group_offset(i);
        for (std::size_t l = 0; l < spectrum.lines[i].size(); ++l) {
            eta[static_cast<Eigen::Index>(off + l)] =
                scale * line_intensity(spectrum.lines[i][l], c->second, u, temperature) / area;
        }
    }
    return eta;
}

LibsAnalysis analyze_spectrum(const Vector& x, const SpectrumSpec& spectrum, const LineDatabase& db,
                              const Vector& theta0, const SolveOptions& options) {
    LibsAnalysis a;
    a.fit = fit_spectrum(x, spectrum, theta0, options);
    if (a.fit.solve.termination == Termination::IllConditioned) {
        throw ConditioningError("spectrum fit failed: " + a.fit.solve.message, 0.0);
    }
    std::vector<std::vector<double>> intensities;
    for (const auto& s : a.fit.species) intensities.push_back(s.intensity);
    a.boltzmann = boltzmann_fit(spectrum.lines, intensities);
    a.concentrations = concentrations(a.boltzmann.species, db, a.boltzmann.temperature);
    return a;
}

}  // namespace psfunmix
