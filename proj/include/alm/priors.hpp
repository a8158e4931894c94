#pragma once

#include "alm/barycenter.hpp"
#include "alm/market.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace alm {

enum class Homogeneity { high, medium, low, custom };

std::string to_string(Homogeneity h);
Homogeneity homogeneity_from_string(const std::string& name);

enum class BoundKind {
    /// Noise is U(lower, upper) * |true value|; parameters whose true value
    /// is zero receive U(lower, upper) directly.
    relative,
    absolute,
};

struct BlockBounds {
    double lower = 0.0;
    double upper = 0.0;
    BoundKind kind = BoundKind::relative;
};

/**
 * Uniform noise bounds for the four parameter blocks:
 *   rate        (R0, kappa, sigma_r)
 *   stocks      (mu, sigma)
 *   liability   (alpha, beta, gamma)
 *   correlation (off-diagonal entries of rho_W and rho_B, always absolute)
 * r0, s0 and l0 are initial states and stay fixed.
 */
struct PerturbationSpec {
    Homogeneity preset = Homogeneity::custom;
    BlockBounds rate;
    BlockBounds stocks;
    BlockBounds liability;
    BlockBounds correlation{0.0, 0.0, BoundKind::absolute};

    /// high = +/-5%, medium = +/-15%, low = +/-40% (relative), with the same
    /// half-widths used absolutely for correlations.
    static PerturbationSpec from_preset(Homogeneity preset);

    void validate() const;
};

/// Lower bound applied to volatilities and kappa after perturbation.
inline constexpr double kMinPositive = 1e-8;
/// Perturbed correlations are clipped to [-kMaxCorrelation, kMaxCorrelation].
inline constexpr double kMaxCorrelation = 0.99;

/**
 * Draws `count` perturbed copies of `true_params`. Replica j uses its own
 * stream derived from (rng_seed, j), so the output does not depend on how
 * replicas are scheduled.
 */
std::vector<MarketParams> perturb(const MarketParams& true_params, const PerturbationSpec& spec, int count,
                                  std::uint64_t rng_seed);

/// Builds the asset law of every parameter set. Weights default to 1/N.
PriorSet to_prior_set(const std::vector<MarketParams>& params, const std::optional<Vector>& weights,
                      const AssetLawConfig& config);

}  // namespace alm
