#include "alm/gaussian.hpp"

#include "alm/errors.hpp"
#include "alm/rng.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace alm {

GaussianModel::GaussianModel(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() == 0) throw ValidationError("GaussianModel: dimension must be positive");
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
        throw ValidationError("GaussianModel: mean has length " + std::to_string(mean_.size()) +
                              " but cov is " + std::to_string(cov_.rows()) + "x" + std::to_string(cov_.cols()));
    }
    if (!mean_.allFinite()) throw ValidationError("GaussianModel: mean has NaN or Inf entries");
    require_symmetric(cov_, "GaussianModel.cov");
    cov_ = symmetrized(cov_);
    require_psd(cov_, "GaussianModel.cov");
}

double w2_distance_sq(const GaussianModel& a, const GaussianModel& b) {
    if (a.dim() != b.dim()) {
        throw ValidationError("w2_distance_sq: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                              std::to_string(b.dim()) + ")");
    }
    const Matrix root_a = psd_sqrt_unchecked(a.cov());
    const Matrix cross = psd_sqrt_unchecked(root_a * b.cov() * root_a);
    const double location = (a.mean() - b.mean()).squaredNorm();
    const double scatter = a.cov().trace() + b.cov().trace() - 2.0 * cross.trace();
    return std::max(0.0, location + scatter);
}

Matrix sampling_factor(const Matrix& cov) {
    const Eigen::Index n = cov.rows();
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    Eigen::LDLT<Matrix> ldlt(cov);
    if (ldlt.info() == Eigen::Success) {
        const double trace = std::max(cov.trace(), 0.0);
        const Vector d = ldlt.vectorD();
        if (d.minCoeff() >= -1e-10 * trace / static_cast<double>(n)) {
            // cov = P^T L D L^T P
            Matrix f = ldlt.matrixL();
            f = f * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
            return ldlt.transpositionsP().transpose() * f;
        }
    }

    const double jitter = 1e-12 * std::max(cov.trace(), 0.0) / static_cast<double>(n);
    Eigen::LLT<Matrix> jittered(cov + jitter * Matrix::Identity(n, n));
    if (jittered.info() != Eigen::Success) {
        throw NumericalError("sample: covariance could not be factorized");
    }
    return jittered.matrixL();
}

Matrix sample(const GaussianModel& model, Eigen::Index count, std::uint64_t rng_seed) {
    if (count < 1) throw ValidationError("sample: count must be >= 1");
    const Eigen::Index n = model.dim();
    const Matrix factor = sampling_factor(model.cov());
    Engine engine = make_engine(derive_seed(rng_seed, {stream::kSample}));
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix z(count, n);
    for (Eigen::Index i = 0; i < count; ++i)
        for (Eigen::Index j = 0; j < n; ++j) z(i, j) = normal(engine);
    Matrix out = z * factor.transpose();
    out.rowwise() += model.mean().transpose();
    return out;
}

}  // namespace alm
