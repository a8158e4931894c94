#pragma once

#include "alm/gaussian.hpp"

#include <string>

namespace alm {

/// Ornstein-Uhlenbeck short rate: dr = kappa (R0 - r) dt + sigma_r^T dW.
struct RateParams {
    double r0 = 0.0;
    double long_run = 0.0;  ///< R0
    double kappa = 1.0;
    Vector sigma_r;  ///< length n
};

/// Geometric Brownian motion stocks: dS_i = S_i (mu_i dt + sigma_i^T dW).
struct StockParams {
    Vector s0;     ///< length n, initial prices
    Vector mu;     ///< length n
    Matrix sigma;  ///< n x n, row i is sigma_i
};

/// Brownian liability: dL = alpha dt + beta^T dW + gamma^T dB.
struct LiabilityParams {
    double l0 = 0.0;
    double alpha = 0.0;
    Vector beta;   ///< length n
    Vector gamma;  ///< length m
};

struct CorrelationParams {
    Matrix rho_w;  ///< n x n
    Matrix rho_b;  ///< m x m
};

struct MarketParams {
    RateParams rate;
    StockParams stocks;
    LiabilityParams liability;
    CorrelationParams correlations;
    double horizon = 1.0;  ///< T in years
    double bond_s0 = 1.0;  ///< initial bond price, only used without gross-return normalization
    std::string currency = "USD";

    Eigen::Index n() const noexcept { return stocks.mu.size(); }
    Eigen::Index m() const noexcept { return liability.gamma.size(); }

    /// Throws ValidationError naming the first violated field.
    void validate() const;

    /// Block-diagonal covariance of (Z_W, Z_B).
    Matrix factor_covariance() const;
};

/// Table 1 market: one OU rate, two GBM stocks, Brownian liability, n = m = 2,
/// identity correlations, T = 1.
MarketParams reference_market();

enum class BondMode { integrated_ou_exact, short_rate_proxy };

struct AssetLawConfig {
    BondMode bond_mode = BondMode::integrated_ou_exact;
    bool normalize_to_gross_returns = true;
    bool ito_correction = false;
};

struct TimeFactors {
    double c;        ///< sqrt(t (1 - exp(-2 kappa t)) / (2 kappa))
    double c_tilde;  ///< c^2 / t
};

TimeFactors time_factors(double kappa, double t);

/**
 * Joint law of Y_T = (L_T, r_T, log S_1(T), ..., log S_n(T)).
 *
 * The covariance is assembled block by block from b = (beta, gamma), the
 * zero-padded volatility vectors and the factor covariance, scaled by t, c(t)
 * and c~(t). The upper triangle is built and mirrored.
 */
GaussianModel build_joint_law(const MarketParams& params);

/**
 * Joint law of (L_T, log G_0, log G_1, ..., log G_n) where G_i = S_i(T)/S_i(0).
 *
 * The bond's log growth is the integrated short rate, either exactly
 * (integrated_ou_exact) or approximated by T * r_T (short_rate_proxy). With
 * normalize_to_gross_returns = false the coordinates are log prices instead.
 */
GaussianModel build_asset_law(const MarketParams& params, const AssetLawConfig& config = {});

std::string to_string(BondMode mode);
BondMode bond_mode_from_string(const std::string& name);

}  // namespace alm
