#include "doctest.h"

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "psfunmix/coherence.hpp"
#include "psfunmix/errors.hpp"

using namespace psfunmix;
using Groups = std::vector<std::vector<double>>;

namespace {

ProblemSpec single(const KernelFamily& k, std::size_t n) { return {k, SampleGrid(n, 1.0), SupportSpec(Groups{{0.0}})}; }

}  // namespace

TEST_SUITE("coherence") {

TEST_CASE("mu at zero separation is the atom energy") {
    for (const auto& k : fixture::families()) {
        const ProblemSpec spec = single(k, 501);
        for (int a = 0; a <= 2; ++a) {
            const Vector atom = build_atom(spec, 0.05, 0.0, a);
            CHECK(coherence(spec, 0.05, 0.05, 0.0, a) == doctest::Approx(atom.squaredNorm()).epsilon(1e-12));
        }
    }
}

TEST_CASE("no overlap beyond the interval length") {
    const ProblemSpec spec = single(KernelFamily::gaussian(), 201);
    CHECK(coherence(spec, 0.05, 0.05, 2.5, 0) <= 1e-14);
    CHECK(coherence(spec, 0.05, 0.05, 5.0, 1) == 0.0);
    CHECK(total_coherence(spec, 0.05, 0.05, 2.5, 0).total <= 1e-14);
    CHECK_THROWS_AS(coherence(spec, 0.05, 0.05, -0.1, 0), DomainError);
    CHECK_THROWS_AS(total_coherence(spec, 0.05, 0.05, 0.0, 0), DomainError);
}

TEST_CASE("lattice profile equals brute-force grid correlations") {
    for (const auto& k : fixture::families()) {
        for (std::size_t n : {200u, 201u}) {
            const SampleGrid grid(n, 1.0);
            const auto t = oracle::instants(n, 1.0);
            auto f = [&](double th, double x, int a) { return k.eval(th, x, a); };
            for (int a = 0; a <= 2; ++a) {
                const CoherenceProfile prof(grid, k, 0.04, 0.07, a);
                const auto& c = prof.correlations();
                double scale = 0.0;
                for (double v : c) scale = std::max(scale, v);
                for (std::size_t kk : {0u, 1u, 3u, 17u, 60u, 150u, 350u}) {
                    const double d = static_cast<double>(kk) * grid.spacing();
                    const double ref = std::max(oracle::correlation(f, t, 0.04, 0.07, d, a),
                                                oracle::correlation(f, t, 0.07, 0.04, d, a));
                    CHECK(c[kk] == doctest::Approx(ref).epsilon(1e-10).scale(scale));
                }
            }
        }
    }
}

TEST_CASE("sup over a 10x finer offset grid") {
    // Lattice shifts are sample multiples; the fine oracle also uses
    // off-lattice offsets, so it can only exceed the lattice value.
    Rng rng(21);
    for (int trial = 0; trial < 6; ++trial) {
        const auto fams = fixture::families();
        const auto& k = fams[rng.below(fams.size())];
        const std::size_t n = 401;
        const ProblemSpec spec = single(k, n);
        const auto t = oracle::instants(n, 1.0);
        const double h = spec.grid().spacing();
        const double ti = rng.uniform(0.03, 0.08), tj = rng.uniform(0.03, 0.08);
        const double delta = h * static_cast<double>(10 + rng.below(40));
        auto f = [&](double th, double x, int a) { return k.eval(th, x, a); };
        for (int a = 0; a <= 2; ++a) {
            const double mu = coherence(spec, ti, tj, delta, a);
            const double fine = oracle::coherence_brute(f, t, ti, tj, delta, a, h / 10, 4.0);
            INFO(k.label(), " a=", a, " ti=", ti, " tj=", tj, " delta=", delta);
            CHECK(mu <= fine * (1 + 1e-12));
            if (a == 0 && k.kind() != KernelKind::ULaplace) {
                // Monotone correlation: sup sits at |delta| on both grids.
                CHECK(mu == doctest::Approx(fine).epsilon(1e-6));
            } else {
                CHECK(mu >= fine * (1 - 2e-2));
            }
        }
    }
}

TEST_CASE("symmetry and monotonicity") {
    Rng rng(22);
    for (const auto& k : fixture::families()) {
        const ProblemSpec spec = single(k, 300);
        const double ti = rng.uniform(0.01, 0.1), tj = rng.uniform(0.01, 0.1);
        for (int a = 0; a <= 2; ++a) {
            double prev_mu = INFINITY, prev_c = INFINITY;
            for (double d : {0.01, 0.02, 0.05, 0.1, 0.3, 0.7, 1.5}) {
                const double m1 = coherence(spec, ti, tj, d, a);
                CHECK(m1 == doctest::Approx(coherence(spec, tj, ti, d, a)).epsilon(1e-12));
                const double c = total_coherence(spec, ti, tj, d, a).total;
                CHECK(m1 <= prev_mu);
                CHECK(c <= prev_c * (1 + 1e-12));
                prev_mu = m1;
                prev_c = c;
            }
        }
    }
}

TEST_CASE("total coherence equals a term-by-term sum") {
    for (double u : {1.0, 2.0, 20.0}) {
        const auto k = KernelFamily::u_laplace(u);
        const ProblemSpec spec = single(k, 1001);
        for (int a = 0; a <= 2; ++a) {
            const double delta = 0.1;
            const auto rep = total_coherence(spec, 0.02, 0.03, delta, a);
            const double first = coherence(spec, 0.02, 0.03, delta, a);
            double sum = 0.0;
            for (int m = 1; m <= static_cast<int>(rep.truncation_terms); ++m)
                sum += coherence(spec, 0.02, 0.03, m * delta, a);
            CHECK(rep.total == doctest::Approx(2 * sum).epsilon(1e-14));
            CHECK(rep.mu == first);
            CHECK(rep.truncation_bound <= 1e-12 * first);
        }
    }
    // u = 20: the m = 1 term carries everything.
    const ProblemSpec spec = single(KernelFamily::u_laplace(20.0), 1001);
    const auto rep = total_coherence(spec, 0.02, 0.02, 0.03, 0);
    const double mu1 = coherence(spec, 0.02, 0.02, 0.03, 0);
    CHECK(std::abs(rep.total - 2 * mu1) <= 2 * coherence(spec, 0.02, 0.02, 0.06, 0) + 1e-300);
}

TEST_CASE("row sum") {
    const ProblemSpec spec(KernelFamily::lorentzian(), SampleGrid(400, 1.0), SupportSpec(Groups{{-0.5}, {0.0}, {0.5}}));
    Vector theta(3);
    theta << 0.02, 0.05, 0.03;
    for (int a = 0; a <= 2; ++a) {
        double best = 0.0;
        for (int i = 0; i < 3; ++i) {
            double row = 0.0;
            for (int j = 0; j < 3; ++j) row += total_coherence(spec, theta[i], theta[j], 0.2, a).total;
            best = std::max(best, row);
        }
        CHECK(coherence_row_sum(spec, theta, 0.2, a) == doctest::Approx(best).epsilon(1e-14));
    }
    Vector one(1);
    one << 0.04;
    CHECK(coherence_row_sum(single(KernelFamily::gaussian(), 300), one, 0.2, 0) ==
          doctest::Approx(total_coherence(single(KernelFamily::gaussian(), 300), 0.04, 0.04, 0.2, 0).total));
    CHECK(coherence_row_sum(spec, theta, 10.0, 0) == 0.0);
}

TEST_CASE("gramian bounds for a lone spike") {
    const ProblemSpec spec = single(KernelFamily::u_laplace(2.0), 301);
    Vector theta(1);
    theta << 0.05;
    const double e = build_atom(spec, 0.05, 0.0, 0).squaredNorm();
    const GramianBounds b = gramian_bounds(spec, theta, 0);
    CHECK(b.full_min == doctest::Approx(0.5 * e));
    CHECK(b.full_max == doctest::Approx(e));
    CHECK(b.block_min[0] <= e);
    CHECK(e <= b.block_max[0]);
}

TEST_CASE("lipschitz estimates: probe doubling and self-convergence") {
    const ProblemSpec spec(KernelFamily::u_laplace(2.0), SampleGrid(600, 1.0), SupportSpec(Groups{{-0.2}, {0.2}}));
    const auto e32 = estimate_lipschitz(spec, 5e-3, 2e-2, 0.4, 32);
    const auto e64 = estimate_lipschitz(spec, 5e-3, 2e-2, 0.4, 64);
    const auto e16 = estimate_lipschitz(spec, 5e-3, 2e-2, 0.4, 16);
    for (const auto* pair : {&e16, &e32}) {
        const auto& lo = *pair;
        const auto& hi = pair == &e16 ? e32 : e64;
        for (int a = 0; a < 3; ++a) {
            CHECK(hi.c_mu_order[a] >= lo.c_mu_order[a]);
            CHECK(hi.c_delta_order[a] >= lo.c_delta_order[a]);
        }
        CHECK(hi.c_g >= lo.c_g * (1 - 1e-12));
        CHECK(hi.c_g_plus >= lo.c_g_plus * (1 - 1e-12));
    }
    CHECK(e64.c_mu == doctest::Approx(e32.c_mu).epsilon(0.1));
    CHECK(e64.c_g == doctest::Approx(e32.c_g).epsilon(0.1));
    CHECK(e64.c_g_plus == doctest::Approx(e32.c_g_plus).epsilon(0.1));
    for (int a = 0; a < 3; ++a) CHECK(e64.c_mu_order[a] == doctest::Approx(e32.c_mu_order[a]).epsilon(0.1));
    const auto s = e32.scaled(1.5);
    CHECK(s.c_mu == doctest::Approx(1.5 * e32.c_mu));
    CHECK(s.theta_ref == e32.theta_ref);
    CHECK_THROWS_AS(estimate_lipschitz(spec, 0.02, 0.01, 0.4, 8), ValidationError);
    CHECK_THROWS_AS(estimate_lipschitz(spec, 0.01, 0.02, 0.4, 1), ValidationError);
}

TEST_CASE("lipschitz slope of mu_0 matches a hand finite difference") {
    const ProblemSpec spec(KernelFamily::gaussian(), SampleGrid(500, 1.0), SupportSpec(Groups{{0.0}}));
    const auto est = estimate_lipschitz(spec, 0.02, 0.04, 0.5, 4);
    // mu_0(theta, theta', 0) is |<g(theta), g(theta')>|, increasing in theta.
    const auto t = oracle::instants(500, 1.0);
    auto f = [](double th, double x, int a) { return oracle::gaussian(th, x, a); };
    double best = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double a = 0.02 + 0.005 * k, b = a + 0.005;
        best = std::max(best, std::abs(oracle::correlation(f, t, b, 0.03, 0, 0) - oracle::correlation(f, t, a, 0.03, 0, 0)) /
                                  0.005);
    }
    CHECK(est.c_mu_order[0] == doctest::Approx(best).epsilon(1e-6));
}

}
