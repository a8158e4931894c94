#pragma once

#include "alm/gaussian.hpp"

#include <vector>

namespace alm {

/// N Gaussian models of equal dimension with weights on the unit simplex.
class PriorSet {
public:
    /// Throws ValidationError if N == 0, dimensions differ, lengths disagree,
    /// or the weights leave the simplex (negative entry or |sum - 1| > 1e-12).
    PriorSet(std::vector<GaussianModel> models, Vector weights);

    /// Equal weights 1/N.
    static PriorSet equal_weights(std::vector<GaussianModel> models);

    std::size_t size() const noexcept { return models_.size(); }
    Eigen::Index dim() const noexcept { return models_.front().dim(); }
    const std::vector<GaussianModel>& models() const noexcept { return models_; }
    const Vector& weights() const noexcept { return weights_; }

private:
    std::vector<GaussianModel> models_;
    Vector weights_;
};

struct BarycenterResult {
    GaussianModel model;
    double frechet_variance;
    int iterations;
    bool converged;
    /// Relative Frobenius change of the last fixed-point step.
    double last_change;
};

struct BarycenterOptions {
    double tol = 1e-10;
    int max_iter = 500;
};

/// sum_i w_i * W2^2(candidate, Q_i).
double frechet_variance(const GaussianModel& candidate, const PriorSet& priors);

/**
 * Weighted 2-Wasserstein barycenter of a Gaussian prior set.
 *
 * The mean is the weighted average of the prior means. The covariance solves
 * C = sum_i w_i (C^{1/2} C_i C^{1/2})^{1/2}, found with the fixed-point map
 *   C <- C^{-1/2} (sum_i w_i (C^{1/2} C_i C^{1/2})^{1/2})^2 C^{-1/2}
 * started from C_0 = sum_i w_i C_i (inverse square roots are taken on the
 * range of C). Iteration stops once successive iterates differ by less than
 * `tol` in relative Frobenius norm. If `max_iter` is hit the last iterate is
 * returned with converged = false.
 *
 * Throws NumericalError on non-finite iterates or when the relative change
 * grows for three consecutive steps while still above 1e-6.
 */
BarycenterResult barycenter(const PriorSet& priors, const BarycenterOptions& options = {});

}  // namespace alm
