#pragma once

#include <vector>

#include "psfunmix/dictionary.hpp"
#include "psfunmix/random.hpp"

namespace fixture {

inline std::vector<psfunmix::KernelFamily> families() {
    using psfunmix::KernelFamily;
    return {KernelFamily::u_laplace(1.0), KernelFamily::u_laplace(2.0), KernelFamily::u_laplace(20.0),
            KernelFamily::gaussian(), KernelFamily::lorentzian()};
}

// Two groups with 2..5 spikes in total, placed on grid samples spaced by
// `gap` or 2 `gap` samples.
inline psfunmix::ProblemSpec random_spec(psfunmix::Rng& rng, const psfunmix::KernelFamily& k, std::size_t n,
                                         std::size_t gap) {
    const psfunmix::SampleGrid grid(n, 1.0);
    const std::size_t m = 2 + rng.below(4);
    std::vector<std::vector<double>> groups(2);
    std::size_t s = n / 5;
    for (std::size_t l = 0; l < m; ++l) {
        groups[l < 2 ? l : rng.below(2)].push_back(grid.instant(s));
        s += gap * (1 + rng.below(2));
    }
    return psfunmix::ProblemSpec(k, grid, psfunmix::SupportSpec(groups));
}

inline psfunmix::Vector random_theta(psfunmix::Rng& rng, std::size_t p, double lo, double hi) {
    psfunmix::Vector t(static_cast<Eigen::Index>(p));
    for (auto& v : t) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace fixture
