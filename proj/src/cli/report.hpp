#pragma once

#include <nlohmann/json.hpp>

#include "psfunmix/coherence.hpp"
#include "psfunmix/experiments.hpp"
#include "psfunmix/libs.hpp"
#include "psfunmix/radius.hpp"
#include "psfunmix/varpro.hpp"

namespace psfunmix::cli {

using Json = nlohmann::ordered_json;

Json to_json(const Vector& v);
Json to_json(const LipschitzEstimates& l);
Json to_json(const TheoremConstants& c);
Json to_json(const SolveResult& r, bool with_trace);
Json to_json(const BoltzmannResult& b);

/// Parses "u-laplace:<u>", "gaussian" or "lorentzian".
KernelFamily parse_kernel(const std::string& text);
/// File-name friendly kernel name, e.g. "u-laplace-u20".
std::string kernel_slug(const KernelFamily& k);

}  // namespace psfunmix::cli
