#include "psfunmix/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "psfunmix/errors.hpp"
#include "psfunmix/random.hpp"

namespace psfunmix {

SampleGrid::SampleGrid(std::size_t n_samples, double half_width) : n_(n_samples), half_width_(half_width) {
    if (n_samples < 2) throw ValidationError("sample grid needs at least two instants");
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
        throw ValidationError("sample grid half-width must be positive and finite");
    }
}

Vector SampleGrid::instants() const {
    Vector u(static_cast<Eigen::Index>(n_));
    for (std::size_t s = 0; s < n_; ++s) u[static_cast<Eigen::Index>(s)] = instant(s);
    return u;
}

SupportSpec::SupportSpec(std::vector<std::vector<double>> groups) : groups_(std::move(groups)) {
    if (groups_.empty()) throw ValidationError("support needs at least one group");
    std::vector<double> all;
    for (const auto& g : groups_) {
        if (g.empty()) throw ValidationError("every support group needs at least one spike");
        offsets_.push_back(total_);
        total_ += g.size();
        all.insert(all.end(), g.begin(), g.end());
    }
    std::sort(all.begin(), all.end());
    min_separation_ = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < all.size(); ++k) min_separation_ = std::min(min_separation_, all[k] - all[k - 1]);
    if (!(min_separation_ > 0.0)) throw ValidationError("spike locations must be pairwise distinct");
}

ProblemSpec::ProblemSpec(KernelFamily kernel, SampleGrid grid, SupportSpec support, bool constant_offset)
    : kernel_(kernel), grid_(grid), support_(std::move(support)), constant_offset_(constant_offset) {
    for (const auto& g : support_.groups()) {
        for (double t : g) {
            if (!grid_.contains(t)) {
                std::ostringstream os;
                os << "spike location " << t << " outside sampling interval [" << -grid_.half_width() << ", "
                   << grid_.half_width() << "]";
                throw ValidationError(os.str());
            }
        }
    }
    if (grid_.size() <= n_columns()) throw ValidationError("need more samples than dictionary columns (N > M)");
}

void ProblemSpec::check_theta(const Vector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != n_groups()) {
        throw ValidationError("theta must have one entry per group");
    }
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (!kernel_.in_domain(theta[i])) {
            std::ostringstream os;
            os << "theta[" << i << "]=" << theta[i] << " outside kernel domain";
            throw DomainError(os.str());
        }
    }
}

namespace {

// Writes the atom into `out`, touching only samples inside the kernel support.
void fill_atom(const ProblemSpec& spec, double theta, double center, int order, Eigen::Ref<Vector> out) {
    const SampleGrid& grid = spec.grid();
    const double radius = spec.kernel().support_radius(theta);
    const double h = grid.spacing();
    const auto n = static_cast<double>(grid.size());
    double first = 0.0;
    double last = n - 1.0;
    if (std::isfinite(radius)) {
        const double mid = 0.5 * (n - 1.0);
        first = std::max(0.0, std::floor((center - radius) / h + mid));
        last = std::min(n - 1.0, std::ceil((center + radius) / h + mid));
    }
    out.setZero();
    for (auto s = static_cast<std::size_t>(first); static_cast<double>(s) <= last; ++s) {
        out[static_cast<Eigen::Index>(s)] = spec.kernel().eval(theta, grid.instant(s) - center, order);
    }
}

}  // namespace

Vector build_atom(const ProblemSpec& spec, double theta, double center, int order) {
    Vector atom(static_cast<Eigen::Index>(spec.n_samples()));
    spec.kernel().eval(theta, 0.0, order);  // validates theta and order
    fill_atom(spec, theta, center, order, atom);
    return atom;
}

DerivativeBlocks::DerivativeBlocks(const ProblemSpec& spec, const Vector& theta, int order)
    : order_(order),
      full_(static_cast<Eigen::Index>(spec.n_samples()), static_cast<Eigen::Index>(spec.n_columns())) {
    if (order < 0 || order > 2) throw DomainError("derivative order must be 0, 1 or 2");
    spec.check_theta(theta);
    const SupportSpec& support = spec.support();
    for (std::size_t i = 0; i < support.n_groups(); ++i) {
        offsets_.push_back(support.group_offset(i));
        sizes_.push_back(support.group_size(i));
        for (std::size_t l = 0; l < support.group_size(i); ++l) {
            const auto col = static_cast<Eigen::Index>(support.group_offset(i) + l);
            fill_atom(spec, theta[static_cast<Eigen::Index>(i)], support.groups()[i][l], order, full_.col(col));
        }
    }
    if (spec.constant_offset()) {
        full_.col(full_.cols() - 1).setConstant(order == 0 ? 1.0 : 0.0);
    }
}

Eigen::Block<const Matrix, Eigen::Dynamic, Eigen::Dynamic, true> DerivativeBlocks::group(std::size_t i) const {
    return full_.middleCols(static_cast<Eigen::Index>(offsets_.at(i)), static_cast<Eigen::Index>(sizes_.at(i)));
}

Matrix build_dictionary(const ProblemSpec& spec, const Vector& theta) {
    return DerivativeBlocks(spec, theta, 0).full();
}

LeastSquares::LeastSquares(const Matrix& g, double min_rcond) : qr_(g), g_(g) {
    if (g.cols() == 0 || g.rows() < g.cols()) throw ValidationError("least squares needs a tall, non-empty matrix");
    const Matrix r = qr_.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
    const Eigen::JacobiSVD<Matrix> svd(r);
    const Vector sv = svd.singularValues();
    const double smax = sv[0];
    const double smin = sv[sv.size() - 1];
    rcond_ = smax > 0.0 ? (smin / smax) * (smin / smax) : 0.0;
    if (!(rcond_ >= min_rcond)) {
        std::ostringstream os;
        os << "dictionary is rank deficient or ill-conditioned: rcond(G^T G) = " << rcond_;
        throw ConditioningError(os.str(), rcond_);
    }
}

Vector LeastSquares::coefficients(const Vector& x) const {
    if (x.size() != g_.rows()) throw ValidationError("observation length does not match dictionary rows");
    return qr_.solve(x);
}

Vector LeastSquares::complement(const Vector& x) const {
    if (x.size() != g_.rows()) throw ValidationError("observation length does not match dictionary rows");
    Vector y = qr_.householderQ().adjoint() * x;
    y.head(g_.cols()).setZero();
    return qr_.householderQ() * y;
}

Matrix LeastSquares::pseudo_inverse() const {
    const Eigen::Index m = g_.cols();
    const Matrix q1 = qr_.householderQ() * Matrix::Identity(g_.rows(), m);
    const auto r = qr_.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
    return r.solve(q1.transpose());
}

Matrix pseudo_inverse(const Matrix& g) { return LeastSquares(g).pseudo_inverse(); }

Vector project_complement(const Matrix& g, const Vector& x) { return LeastSquares(g).complement(x); }

Observation synthesize(const ProblemSpec& spec, const Vector& theta_star, const Vector& eta_star,
                       const NoiseSpec& noise) {
    if (static_cast<std::size_t>(eta_star.size()) != spec.n_columns()) {
        throw ValidationError("eta* must have one entry per dictionary column");
    }
    GroundTruth truth;
    truth.theta_star = theta_star;
    truth.eta_star = eta_star;
    truth.x_star = build_dictionary(spec, theta_star) * eta_star;
    const auto n = static_cast<Eigen::Index>(spec.n_samples());
    truth.noise = Vector::Zero(n);
    if (noise.snr_db) {
        const double signal = truth.x_star.squaredNorm();
        if (!(signal > 0.0)) throw ValidationError("cannot set an SNR on an all-zero signal");
        Rng rng(noise.seed);
        for (Eigen::Index s = 0; s < n; ++s) truth.noise[s] = rng.normal();
        const double target = signal / std::pow(10.0, *noise.snr_db / 10.0);
        truth.noise *= std::sqrt(target / truth.noise.squaredNorm());
    }
    Observation obs;
    obs.x = truth.x_star + truth.noise;
    obs.truth = std::move(truth);
    return obs;
}

Vector unit_energy_amplitudes(const ProblemSpec& spec, const Vector& theta_star) {
    const Matrix g = build_dictionary(spec, theta_star);
    const double norm = g.leftCols(static_cast<Eigen::Index>(spec.model_order())).rowwise().sum().norm();
    if (!(norm > 0.0)) throw ValidationError("all atoms vanish on the grid");
    Vector eta = Vector::Zero(static_cast<Eigen::Index>(spec.n_columns()));
    eta.head(static_cast<Eigen::Index>(spec.model_order())).setConstant(1.0 / norm);
    return eta;
}

}  // namespace psfunmix
