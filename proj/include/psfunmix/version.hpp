#pragma once

#include <string_view>

namespace psfunmix {

inline constexpr std::string_view kVersion = PSFUNMIX_VERSION;

}  // namespace psfunmix
