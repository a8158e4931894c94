#pragma once

#include "alm/linalg.hpp"

#include <cstdint>

namespace alm {

/**
 * A multivariate normal law N(mean, cov).
 *
 * Construction validates that the dimensions agree, that cov is symmetric
 * within 1e-12 (relative to its largest entry) and positive semidefinite with
 * smallest eigenvalue >= -1e-10 * trace / dim. The stored covariance is
 * exactly symmetric. Instances are immutable.
 */
class GaussianModel {
public:
    GaussianModel(Vector mean, Matrix cov);

    Eigen::Index dim() const noexcept { return mean_.size(); }
    const Vector& mean() const noexcept { return mean_; }
    const Matrix& cov() const noexcept { return cov_; }

private:
    Vector mean_;
    Matrix cov_;
};

/**
 * Squared 2-Wasserstein distance between two Gaussians:
 *   |m_a - m_b|^2 + tr(C_a + C_b - 2 (C_a^{1/2} C_b C_a^{1/2})^{1/2}).
 * Clamped at zero against rounding.
 */
double w2_distance_sq(const GaussianModel& a, const GaussianModel& b);

/**
 * Draws `count` i.i.d. rows from `model`.
 *
 * Uses a Cholesky factor of cov; singular covariances fall back to a pivoted
 * LDL^T factor with negative pivots clamped, and only then to a diagonal
 * jitter of 1e-12 * trace / dim. The same seed always yields the same matrix.
 */
Matrix sample(const GaussianModel& model, Eigen::Index count, std::uint64_t rng_seed);

/// Lower-triangular-style factor F with F F^T = cov (up to the fallbacks above).
Matrix sampling_factor(const Matrix& cov);

}  // namespace alm
