#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "psfunmix/varpro.hpp"

namespace psfunmix {

/// Boltzmann constant in eV/K.
inline constexpr double kBoltzmannEv = 8.617333262e-5;

struct LineRecord {
    std::string species;
    double wavelength_nm = 0.0;
    double a_ki = 0.0;
    double g_k = 1.0;
    double e_k_ev = 0.0;
};

/// U_s(T) = sum_k coefficients[k] T^k, valid on [t_min, t_max] kelvin.
struct PartitionFunction {
    std::vector<double> coefficients;
    double t_min = 0.0;
    double t_max = 0.0;

    /// Throws DomainError outside [t_min, t_max].
    double operator()(double temperature) const;
};

class LineDatabase {
public:
    LineDatabase() = default;
    /// Validates records and partition functions (see validate()).
    LineDatabase(std::vector<LineRecord> records, std::map<std::string, PartitionFunction> partitions);

    const std::vector<LineRecord>& records() const noexcept { return records_; }
    const std::map<std::string, PartitionFunction>& partitions() const noexcept { return partitions_; }
    const PartitionFunction& partition(const std::string& species) const;
    /// Species in order of first appearance.
    std::vector<std::string> species() const;
    std::vector<LineRecord> lines_of(const std::string& species) const;

private:
    void validate() const;

    std::vector<LineRecord> records_;
    std::map<std::string, PartitionFunction> partitions_;
};

/// CSV with header `species,wavelength_nm,a_ki,g_k,e_k_ev`.
std::vector<LineRecord> parse_line_csv(std::istream& in);
void write_line_csv(const std::vector<LineRecord>& records, std::ostream& out);

/// JSON object keyed by species: {"coefficients": [...], "t_min": .., "t_max": ..}.
std::map<std::string, PartitionFunction> parse_partition_json(std::istream& in);
void write_partition_json(const std::map<std::string, PartitionFunction>& partitions, std::ostream& out);

LineDatabase load_line_database(const std::string& lines_csv, const std::string& partitions_json);
void save_line_database(const LineDatabase& db, const std::string& lines_csv, const std::string& partitions_json);

/// A ProblemSpec on a wavelength window. Dictionary coordinates are
/// t = wavelength - center, so spike locations are line wavelengths shifted
/// by the window center.
struct SpectrumSpec {
    ProblemSpec spec;
    double center_nm = 0.0;
    std::vector<std::string> species;            // one per group
    std::vector<std::vector<LineRecord>> lines;  // per group, dictionary column order
};

/// Groups are the species with at least one line in [lo, hi]; the grid has
/// n_samples points spanning the window inclusively.
SpectrumSpec build_spectrum_spec(const LineDatabase& db, double lo_nm, double hi_nm, std::size_t n_samples,
                                 const KernelFamily& profile, bool constant_offset = false);

struct SpeciesFit {
    std::string species;
    double theta = 0.0;
    std::vector<double> eta;
    /// eta times the profile area at theta: integrated line intensities.
    std::vector<double> intensity;
};

struct SpectrumFit {
    SolveResult solve;
    std::vector<SpeciesFit> species;
    double offset = 0.0;
    /// |x - G(theta_hat) eta_hat| / |x|.
    double relative_fit_error = 0.0;
    Vector fitted;
};

SpectrumFit fit_spectrum(const Vector& x, const SpectrumSpec& spectrum, const Vector& theta0,
                         const SolveOptions& options = {});

struct BoltzmannSpecies {
    std::string species;
    double intercept = 0.0;
    std::size_t lines_used = 0;
    /// False when the species' upper-level energies are all equal.
    bool in_slope = false;
};

struct BoltzmannResult {
    double temperature = 0.0;
    double slope = 0.0;
    std::vector<BoltzmannSpecies> species;
    /// Weighted RMS of y - (q_s + slope E_k).
    double residual = 0.0;
    std::vector<std::string> warnings;
};

/// Pooled weighted regression y = ln(I lambda / (g_k A_ki)) = q_s - E_k / (k_B T)
/// with weights I^2 (constant absolute intensity noise). Non-positive
/// intensities are dropped with a warning.
BoltzmannResult boltzmann_fit(const std::vector<std::vector<LineRecord>>& species_lines,
                              const std::vector<std::vector<double>>& intensities);

/// C_s proportional to U_s(T) exp(q_s), closed to sum 1.
std::map<std::string, double> concentrations(const std::vector<BoltzmannSpecies>& intercepts,
                                             const LineDatabase& db, double temperature);

/// Integrated intensity of a line under the optically thin Boltzmann model
/// I = C g A exp(-E / k_B T) / (lambda U(T)), up to a common factor.
double line_intensity(const LineRecord& line, double concentration, double partition_value, double temperature);

/// Dictionary amplitudes that make each line's integrated intensity follow
/// line_intensity(). `theta` has one width per group.
Vector forward_amplitudes(const SpectrumSpec& spectrum, const LineDatabase& db,
                          const std::map<std::string, double>& composition, double temperature, const Vector& theta,
                          double scale = 1.0);

struct LibsAnalysis {
    SpectrumFit fit;
    BoltzmannResult boltzmann;
    std::map<std::string, double> concentrations;
};

/// fit_spectrum -> boltzmann_fit -> concentrations.
LibsAnalysis analyze_spectrum(const Vector& x, const SpectrumSpec& spectrum, const LineDatabase& db,
                              const Vector& theta0, const SolveOptions& options = {});

}  // namespace psfunmix
