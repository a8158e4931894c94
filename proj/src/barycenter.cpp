#include "alm/barycenter.hpp"

#include "alm/errors.hpp"

#include <cmath>
#include <string>

namespace alm {

namespace {

// Growth of the step size is only treated as divergence above this level;
// below it the changes are rounding noise.
constexpr double kDivergenceFloor = 1e-6;

}  // namespace

PriorSet::PriorSet(std::vector<GaussianModel> models, Vector weights)
    : models_(std::move(models)), weights_(std::move(weights)) {
    if (models_.empty()) throw ValidationError("PriorSet: at least one model is required");
    if (static_cast<Eigen::Index>(models_.size()) != weights_.size()) {
        throw ValidationError("PriorSet: " + std::to_string(models_.size()) + " models but " +
                              std::to_string(weights_.size()) + " weights");
    }
    for (std::size_t i = 1; i < models_.size(); ++i) {
        if (models_[i].dim() != models_.front().dim()) {
            throw ValidationError("PriorSet: model " + std::to_string(i) + " has dimension " +
                                  std::to_string(models_[i].dim()) + ", expected " +
                                  std::to_string(models_.front().dim()));
        }
    }
    if (!weights_.allFinite()) throw ValidationError("PriorSet: weights must be finite");
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
        if (weights_(i) < 0.0) {
            throw ValidationError("PriorSet: weights must lie on the unit simplex (weight " + std::to_string(i) +
                                  " is negative)");
        }
    }
    const double total = weights_.sum();
    if (std::abs(total - 1.0) > 1e-12) {
        throw ValidationError("PriorSet: weights must lie on the unit simplex (sum is " +
                              std::to_string(total) + ", expected 1)");
    }
}

PriorSet PriorSet::equal_weights(std::vector<GaussianModel> models) {
    const auto n = static_cast<Eigen::Index>(models.size());
    if (n == 0) throw ValidationError("PriorSet: at least one model is required");
    Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
    // 1/N summed N times can miss 1 by a few ulps; fold the residual into the last weight.
    w(n - 1) += 1.0 - w.sum();
    return PriorSet(std::move(models), std::move(w));
}

double frechet_variance(const GaussianModel& candidate, const PriorSet& priors) {
    if (candidate.dim() != priors.dim()) {
        throw ValidationError("frechet_variance: candidate dimension " + std::to_string(candidate.dim()) +
                              " does not match prior dimension " + std::to_string(priors.dim()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < priors.size(); ++i) {
        const double w = priors.weights()(static_cast<Eigen::Index>(i));
        if (w == 0.0) continue;
        total += w * w2_distance_sq(candidate, priors.models()[i]);
    }
    return total;
}

BarycenterResult barycenter(const PriorSet& priors, const BarycenterOptions& options) {
    if (!(options.tol > 0.0)) throw ValidationError("barycenter: tol must be positive");
    if (options.max_iter < 1) throw ValidationError("barycenter: max_iter must be >= 1");

    const Eigen::Index d = priors.dim();
    const auto& models = priors.models();
    const Vector& w = priors.weights();

    Vector mean = Vector::Zero(d);
    Matrix cov = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < models.size(); ++i) {
        const double wi = w(static_cast<Eigen::Index>(i));
        mean += wi * models[i].mean();
        cov += wi * models[i].cov();
    }
    cov = symmetrized(cov);

    int iterations = 0;
    bool converged = false;
    double change = 0.0;
    double previous_change = std::numeric_limits<double>::infinity();
    int growth_streak = 0;

    // A Dirac prior set or a single active model is its own barycenter.
    const auto active = (w.array() != 0.0).count();
    if (cov.isZero(0.0) || active == 1) {
        converged = true;
    }

    while (!converged && iterations < options.max_iter) {
        const SqrtPair root = psd_sqrt_pair(cov);
        Matrix mix = Matrix::Zero(d, d);
        for (std::size_t i = 0; i < models.size(); ++i) {
            const double wi = w(static_cast<Eigen::Index>(i));
            if (wi == 0.0) continue;
            mix += wi * psd_sqrt_unchecked(root.sqrt * models[i].cov() * root.sqrt);
        }
        mix = symmetrized(mix);
        Matrix next = symmetrized(root.inv_sqrt * mix * mix * root.inv_sqrt);
        ++iterations;

        if (!next.allFinite()) {
            throw NumericalError("barycenter: non-finite covariance iterate at iteration " +
                                 std::to_string(iterations));
        }
        change = relative_frobenius(next, cov);
        cov = std::move(next);

        if (change < options.tol) {
            converged = true;
            break;
        }
        if (change > previous_change && change > kDivergenceFloor) {
            if (++growth_streak >= 3) {
                throw NumericalError("barycenter: fixed-point iteration diverging at iteration " +
                                     std::to_string(iterations));
            }
        } else {
            growth_streak = 0;
        }
        previous_change = change;
    }

    GaussianModel model(std::move(mean), std::move(cov));
    const double fv = frechet_variance(model, priors);
    return BarycenterResult{std::move(model), fv, iterations, converged, change};
}

}  // namespace alm
