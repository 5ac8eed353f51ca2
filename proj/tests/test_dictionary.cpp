#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "psfunmix/dictionary.hpp"
#include "psfunmix/errors.hpp"
#include "psfunmix/random.hpp"

using namespace psfunmix;
using Groups = std::vector<std::vector<double>>;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out[k++] = x;
    return out;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_SUITE("dictionary") {

TEST_CASE("grid instants are symmetric and inclusive") {
    const SampleGrid g(5, 1.0);
    CHECK(g.instant(0) == -1.0);
    CHECK(g.instant(4) == 1.0);
    CHECK(g.instant(2) == 0.0);
    CHECK(g.spacing() == 0.5);
    const auto ref = oracle::instants(1001, 0.75);
    const SampleGrid h(1001, 0.75);
    for (std::size_t s = 0; s < ref.size(); ++s) CHECK(h.instant(s) == doctest::Approx(ref[s]).epsilon(1e-15));
    CHECK_THROWS_AS(SampleGrid(1, 1.0), ValidationError);
    CHECK_THROWS_AS(SampleGrid(10, 0.0), ValidationError);
}

TEST_CASE("support spec offsets and separation") {
    const SupportSpec s({{-0.5, 0.1}, {0.3}, {-0.2, 0.6, 0.9}});
    CHECK(s.total_order() == 6);
    CHECK(s.group_offset(0) == 0);
    CHECK(s.group_offset(1) == 2);
    CHECK(s.group_offset(2) == 3);
    CHECK(s.min_separation() == doctest::Approx(0.2));
    CHECK(std::isinf(SupportSpec(std::vector<std::vector<double>>{{0.0}}).min_separation()));
    CHECK_THROWS_AS(SupportSpec({}), ValidationError);
    CHECK_THROWS_AS(SupportSpec(Groups{{0.1}, {}}), ValidationError);
    CHECK_THROWS_AS(SupportSpec(Groups{{0.1}, {0.1}}), ValidationError);
}

TEST_CASE("problem spec validation") {
    const auto k = KernelFamily::gaussian();
    CHECK_THROWS_AS(ProblemSpec(k, SampleGrid(10, 1.0), SupportSpec(Groups{{1.5}})), ValidationError);
    CHECK_THROWS_AS(ProblemSpec(k, SampleGrid(3, 1.0), SupportSpec(Groups{{-0.5, 0.0, 0.5}})), ValidationError);
    const ProblemSpec spec(k, SampleGrid(10, 1.0), SupportSpec(Groups{{0.0}, {0.5}}));
    CHECK_THROWS_AS(spec.check_theta(vec({0.1})), ValidationError);
    CHECK_THROWS_AS(spec.check_theta(vec({0.1, -0.1})), DomainError);
}

TEST_CASE("atom centred on a middle sample peaks at one") {
    const ProblemSpec spec(KernelFamily::u_laplace(2.0), SampleGrid(101, 1.0), SupportSpec(Groups{{0.0}}));
    const Vector a = build_atom(spec, 0.1, 0.0, 0);
    CHECK(a[50] == 1.0);
    for (int s = 0; s < 50; ++s) CHECK(a[s] == a[100 - s]);
}

TEST_CASE("dictionary matches a triple loop") {
    const std::vector<std::vector<double>> groups{{-0.6, 0.1}, {-0.25, 0.4, 0.8}};
    for (const auto& k : {KernelFamily::u_laplace(1.0), KernelFamily::u_laplace(20.0), KernelFamily::gaussian(),
                          KernelFamily::lorentzian()}) {
        const ProblemSpec spec(k, SampleGrid(257, 1.0), SupportSpec(groups));
        const Vector theta = vec({0.05, 0.12});
        auto f = [&](double th, double t, int a) { return k.eval(th, t, a); };
        const auto t = oracle::instants(257, 1.0);
        for (int a = 0; a <= 2; ++a) {
            const Matrix ref = oracle::dictionary(f, t, groups, theta, a);
            const Matrix got = DerivativeBlocks(spec, theta, a).full();
            CHECK((ref - got).cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + ref.cwiseAbs().maxCoeff()));
        }
        const DerivativeBlocks b(spec, theta, 1);
        CHECK(b.group(1).cols() == 3);
        CHECK((b.group(1) - b.full().rightCols(3)).norm() == 0.0);
    }
}

TEST_CASE("constant offset column") {
    const ProblemSpec spec(KernelFamily::lorentzian(), SampleGrid(64, 1.0), SupportSpec(Groups{{0.0}, {0.5}}), true);
    CHECK(spec.n_columns() == 3);
    const Vector theta = vec({0.1, 0.2});
    CHECK(build_dictionary(spec, theta).col(2).isOnes());
    CHECK(DerivativeBlocks(spec, theta, 1).full().col(2).isZero());
}

TEST_CASE("pseudo-inverse: Moore-Penrose identities on a random 50x4") {
    Rng rng(7);
    const Matrix a = random_matrix(rng, 50, 4);
    const Matrix p = pseudo_inverse(a);
    CHECK((a * p * a - a).norm() <= 1e-12 * a.norm());
    CHECK((p * a * p - p).norm() <= 1e-12 * p.norm());
    CHECK((a * p - (a * p).transpose()).norm() <= 1e-12);
    CHECK((p * a - (p * a).transpose()).norm() <= 1e-12);
    CHECK((p - oracle::pinv(a)).norm() <= 1e-12 * p.norm());
}

TEST_CASE("projector is idempotent and annihilates the range") {
    Rng rng(11);
    const Matrix a = random_matrix(rng, 40, 6);
    Vector x(40);
    for (auto& v : x) v = rng.normal();
    const LeastSquares ls(a);
    const Vector px = ls.complement(x);
    CHECK((ls.complement(px) - px).norm() <= 1e-12 * x.norm());
    CHECK((a.transpose() * px).norm() <= 1e-12 * x.norm() * a.norm());
    CHECK((px - oracle::complement(a, x)).norm() <= 1e-12 * x.norm());
    CHECK((ls.coefficients(x) - oracle::pinv(a) * x).norm() <= 1e-12 * x.norm());
    CHECK(project_complement(a, a.col(2)).norm() <= 1e-12);
}

TEST_CASE("rank deficiency raises a conditioning error") {
    Matrix a = Matrix::Random(20, 3);
    a.col(2) = a.col(0) + a.col(1);
    CHECK_THROWS_AS(LeastSquares{a}, ConditioningError);
    try {
        LeastSquares ls(a);
    } catch (const ConditioningError& e) {
        CHECK(e.reciprocal_condition() < 1e-12);
    }
    // Colliding spikes at a huge width.
    const ProblemSpec spec(KernelFamily::gaussian(), SampleGrid(50, 1.0), SupportSpec(Groups{{0.0, 1e-9}}));
    CHECK_THROWS_AS(LeastSquares(build_dictionary(spec, vec({0.5}))), ConditioningError);
    CHECK_THROWS_AS(LeastSquares(Matrix::Random(3, 5)), ValidationError);
}

TEST_CASE("synthesize: noiseless, exact SNR, deterministic") {
    const ProblemSpec spec(KernelFamily::u_laplace(2.0), SampleGrid(300, 1.0), SupportSpec(Groups{{-0.3, 0.2}, {0.0}}));
    const Vector theta = vec({0.03, 0.05});
    const Vector eta = unit_energy_amplitudes(spec, theta);
    const auto clean = synthesize(spec, theta, eta, NoiseSpec::none());
    CHECK(clean.x.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(clean.truth->noise.isZero());
    for (double snr : {0.0, 10.0, 30.0}) {
        const auto a = synthesize(spec, theta, eta, NoiseSpec::gaussian(snr, 5));
        const auto b = synthesize(spec, theta, eta, NoiseSpec::gaussian(snr, 5));
        const auto c = synthesize(spec, theta, eta, NoiseSpec::gaussian(snr, 6));
        const double measured = 10 * std::log10(a.truth->x_star.squaredNorm() / a.truth->noise.squaredNorm());
        CHECK(measured == doctest::Approx(snr).epsilon(1e-10).scale(1.0));
        CHECK(a.x == b.x);
        CHECK(a.x != c.x);
        CHECK((a.x - a.truth->x_star - a.truth->noise).norm() <= 1e-15 * a.x.norm());
    }
    CHECK_THROWS_AS(synthesize(spec, theta, vec({1.0}), NoiseSpec::none()), ValidationError);
}

}
