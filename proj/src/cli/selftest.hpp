#pragma once

#include <string>
#include <vector>

namespace psfunmix::cli {

struct CheckItem {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Derivative, projector, VarPro-calculus, Gramian-sandwich and Weyl checks
/// on small seeded instances.
std::vector<CheckItem> self_test(unsigned long long seed);

}  // namespace psfunmix::cli
