#include "doctest.h"

#include <cmath>
#include <map>
#include <string>

#include "fixtures.hpp"
#include "psfunmix/coherence.hpp"
#include "psfunmix/libs.hpp"
#include "psfunmix/radius.hpp"
#include "psfunmix/varpro.hpp"

using namespace psfunmix;

namespace {

using Groups = std::vector<std::vector<double>>;

LineDatabase data_db() {
    const std::string dir = PSFUNMIX_DATA_DIR;
    return load_line_database(dir + "/synthetic_lines.csv", dir + "/synthetic_partitions.json");
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("kernels are even in t for every order") {
    Rng rng(11);
    for (const auto& k : fixture::families()) {
        for (int trial = 0; trial < 1000; ++trial) {
            const double th = std::exp(rng.uniform(std::log(1e-3), 0.0));
            const double t = rng.uniform(-1.0, 1.0);
            for (int a = 0; a <= 2; ++a) {
                const double plus = k.eval(th, t, a), minus = k.eval(th, -t, a);
                REQUIRE(std::abs(plus - minus) <= 1e-14 * std::max(1.0, std::abs(plus)));
            }
        }
    }
}

TEST_CASE("projection annihilates the dictionary and least squares is minimal") {
    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const auto fams = fixture::families();
        const ProblemSpec spec = fixture::random_spec(rng, fams[rng.below(fams.size())], 250, 15);
        const Vector theta = fixture::random_theta(rng, 2, 0.01, 0.04);
        const Matrix g = build_dictionary(spec, theta);
        const LeastSquares ls(g);
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            CHECK(ls.complement(g.col(c)).norm() <= 1e-10 * g.col(c).norm());

        Vector x(g.rows());
        for (auto& v : x) v = rng.normal();
        const Vector eta = ls.coefficients(x);
        const double best = (x - g * eta).norm();
        for (int k = 0; k < 10; ++k) {
            Vector d(eta.size());
            for (auto& v : d) v = 1e-3 * rng.normal();
            CHECK(best <= (x - g * (eta + d)).norm());
        }
    }
}

TEST_CASE("coherence is symmetric in the widths and non-increasing in delta") {
    Rng rng(13);
    const SampleGrid grid(301, 1.0);
    for (const auto& k : fixture::families()) {
        const ProblemSpec spec(k, grid, SupportSpec(Groups{{0.0}}));
        for (int trial = 0; trial < 5; ++trial) {
            const double ti = rng.uniform(0.005, 0.05), tj = rng.uniform(0.005, 0.05);
            for (int a = 0; a <= 2; ++a) {
                double prev = std::numeric_limits<double>::infinity();
                for (double d : {0.0, 0.01, 0.03, 0.1, 0.3, 1.0}) {
                    const double m = coherence(spec, ti, tj, d, a);
                    CHECK(m == doctest::Approx(coherence(spec, tj, ti, d, a)).epsilon(1e-12));
                    CHECK(m <= prev);
                    prev = m;
                }
            }
        }
    }
}

TEST_CASE("Gramian extreme eigenvalues stay inside the coherence bounds") {
    Rng rng(14);
    std::size_t instances = 0, violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto fams = fixture::families();
        const ProblemSpec spec = fixture::random_spec(rng, fams[rng.below(fams.size())], 400, 10 + rng.below(30));
        const Vector theta = fixture::random_theta(rng, 2, 0.004, 0.03);
        for (int a = 0; a <= 2; ++a) {
            const GramianBounds b = gramian_bounds(spec, theta, a);
            if (!(b.full_min > 0.0)) continue;
            ++instances;
            const DerivativeBlocks blocks(spec, theta, a);
            const Eigen::SelfAdjointEigenSolver<Matrix> full(blocks.full().transpose() * blocks.full());
            const double tol = 1e-10 * full.eigenvalues().maxCoeff();
            violations += full.eigenvalues().minCoeff() < b.full_min - tol;
            violations += full.eigenvalues().maxCoeff() > b.full_max + tol;
            for (std::size_t i = 0; i < spec.n_groups(); ++i) {
                const Matrix gi = blocks.group(i);
                const Eigen::SelfAdjointEigenSolver<Matrix> blk(gi.transpose() * gi);
                violations += blk.eigenvalues().minCoeff() < b.block_min[i] - tol;
                violations += blk.eigenvalues().maxCoeff() > b.block_max[i] + tol;
            }
        }
    }
    CHECK(instances >= 50);
    CHECK(violations == 0);
}

TEST_CASE("radius shrinks as the noise grows") {
    for (const double u : {1.0, 2.0, 20.0}) {
        const ProblemSpec spec(KernelFamily::u_laplace(u), SampleGrid(1000, 1.0), SupportSpec(Groups{{-0.3}, {0.3}}));
        const Vector theta = Vector::Constant(2, 0.05);
        const auto lip = local_lipschitz(spec, theta, 0.1, 8);
        const TheoremConstants c = theorem_constants(spec, theta, lip);
        double prev = radius_bound(c, 1.0, 0.0, 1.0);
        CHECK(prev > 0.0);
        for (double w = 1e-4; w < 10.0; w *= 2.0) {
            const double r = radius_bound(c, 1.0, w, 1.0);
            CHECK(r <= prev);
            CHECK(r >= 0.0);
            prev = r;
        }
        CHECK(prev == 0.0);
    }
}

TEST_CASE("gradient vanishes at the truth without noise") {
    Rng rng(15);
    for (int trial = 0; trial < 20; ++trial) {
        const auto fams = fixture::families();
        const ProblemSpec spec = fixture::random_spec(rng, fams[rng.below(fams.size())], 300, 20);
        const Vector theta = fixture::random_theta(rng, 2, 0.01, 0.04);
        const Vector x = build_dictionary(spec, theta) * unit_energy_amplitudes(spec, theta);
        CHECK(gradient(spec, theta, x).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("concentrations close to one for arbitrary intercepts") {
    const LineDatabase db = data_db();
    Rng rng(16);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<BoltzmannSpecies> sp;
        for (const auto& s : db.species()) sp.push_back({s, rng.uniform(-20.0, 20.0), 2, true});
        const auto c = concentrations(sp, db, rng.uniform(5e3, 2e4));
        double sum = 0.0;
        for (const auto& [s, v] : c) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("Boltzmann temperature and composition ignore the intensity scale") {
    const LineDatabase db = data_db();
    const std::map<std::string, double> alloy{{"Al I", 0.915}, {"Cu I", 0.045}, {"Fe I", 0.015}, {"Mg I", 0.025}};
    Rng rng(17);
    std::vector<std::vector<LineRecord>> lines;
    std::vector<std::vector<double>> inten;
    for (const auto& s : db.species()) {
        lines.push_back(db.lines_of(s));
        std::vector<double> v;
        for (const auto& r : lines.back())
            v.push_back(line_intensity(r, alloy.at(s), db.partition(s)(1.1e4), 1.1e4) * rng.uniform(0.95, 1.05));
        inten.push_back(v);
    }
    const BoltzmannResult base = boltzmann_fit(lines, inten);
    const auto cb = concentrations(base.species, db, base.temperature);
    for (double scale : {1e-6, 3.0, 1e8}) {
        auto scaled = inten;
        for (auto& v : scaled)
            for (auto& i : v) i *= scale;
        const BoltzmannResult r = boltzmann_fit(lines, scaled);
        CHECK(r.temperature == doctest::Approx(base.temperature).epsilon(1e-10));
        const auto c = concentrations(r.species, db, r.temperature);
        for (const auto& [s, v] : cb) CHECK(c.at(s) == doctest::Approx(v).epsilon(1e-9));
    }
}

TEST_CASE("synthesis is a pure function of the seed") {
    const ProblemSpec spec(KernelFamily::gaussian(), SampleGrid(200, 1.0), SupportSpec(Groups{{-0.2, 0.3}, {0.0}}));
    const Vector theta = Vector::Constant(2, 0.03);
    const Vector eta = unit_energy_amplitudes(spec, theta);
    const Vector a = synthesize(spec, theta, eta, NoiseSpec::gaussian(10.0, 99)).x;
    const Vector b = synthesize(spec, theta, eta, NoiseSpec::gaussian(10.0, 99)).x;
    const Vector c = synthesize(spec, theta, eta, NoiseSpec::gaussian(10.0, 100)).x;
    CHECK(a == b);
    CHECK(a != c);
}

}
