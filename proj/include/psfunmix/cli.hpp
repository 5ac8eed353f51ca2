#pragma once

#include <string>
#include <vector>

namespace psfunmix::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kValidation = 1,
    kRuntime = 2,
    kUsage = 64,
};

/// Entry point of `psf-unmix`. args[0] is the program name.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace psfunmix::cli
