#pragma once

#include "alm/gaussian.hpp"

#include <cstdint>
#include <optional>

namespace alm {

/**
 * Moments of terminal asset values S_T = (G_0, ..., G_n) and liability L_T.
 * `second_moment_l` (E[L_T^2]) is needed to evaluate the surplus objective.
 */
struct MomentBundle {
    Vector mean_s;        ///< m_S = E[S_T]
    Matrix second_s;      ///< C_S = E[S_T S_T^T]
    Vector cross_sl;      ///< C_SL = E[S_T L_T]
    double mean_l = 0.0;  ///< m_L = E[L_T]
    double second_moment_l = 0.0;
    long sample_count = 0;  ///< 0 for analytic moments

    Eigen::Index assets() const noexcept { return mean_s.size(); }
};

/// Monte Carlo standard errors of each bundle entry.
struct MomentErrors {
    Vector mean_s;
    Matrix second_s;
    Vector cross_sl;
    double mean_l = 0.0;
    double second_moment_l = 0.0;
};

struct BoxBounds {
    Vector lower;
    Vector upper;
};

struct ProblemSpec {
    double zeta = 0.0;  ///< surplus floor and target
    double x0 = 1.0;    ///< initial wealth
    std::optional<BoxBounds> theta_bounds;

    void validate(Eigen::Index assets) const;
};

struct PortfolioSolution {
    Vector theta;  ///< currency amount per asset, bond first
    double lambda = 0.0;
    bool constraint_active = false;
    double expected_surplus = 0.0;
    double surplus_std = 0.0;
    double objective = 0.0;
    double kkt_residual = 0.0;
    /// Lambda from the printed active-case expression; NaN when not evaluated.
    double lambda_printed = 0.0;
    /// |lambda_printed - lambda| / max(|lambda|, 1), 0 when the constraint is slack.
    double lambda_discrepancy = 0.0;
    /// Expected surplus at lambda = 0.
    double unconstrained_surplus = 0.0;
    bool used_box_qp = false;
};

struct SurplusStats {
    double expected_surplus;
    double surplus_std;
    double objective;  ///< E[(theta^T S - L - zeta)^2]
};

/**
 * Exact moments of (L, exp(g)) for (L, g) ~ model, where model is over
 * (L, log G_0, ..., log G_n). Throws NumericalError if any exponent exceeds 700.
 */
MomentBundle moments_analytic(const GaussianModel& model);

/// Sample moments from `count` draws (count >= 1000). Deterministic in seed.
MomentBundle moments_mc(const GaussianModel& model, long count, std::uint64_t rng_seed);

/// As moments_mc, also returning per-entry standard errors.
MomentBundle moments_mc(const GaussianModel& model, long count, std::uint64_t rng_seed, MomentErrors& errors);

/// Moments of an explicit sample matrix with rows (L, log G_0, ..., log G_n).
MomentBundle moments_from_samples(const Matrix& draws, MomentErrors* errors = nullptr);

/**
 * Minimizes E[(theta^T S - L - zeta)^2] subject to 1^T theta = x0 and
 * E[theta^T S - L] >= zeta.
 *
 * Without box bounds, theta(lambda) = Ct (C_SL + (zeta + lambda) m_S)
 * + C^{-1} 1 x0 / (1^T C^{-1} 1) with Ct = C^{-1} - C^{-1} 1 1^T C^{-1} / (1^T C^{-1} 1).
 * lambda = 0 when theta(0) meets the floor; otherwise lambda solves the affine
 * equation theta(lambda)^T m_S - m_L = zeta. With box bounds the problem is
 * handed to an active-set QP and lambda is found by bisection.
 *
 * Throws SolverError if C_S is singular or has condition number >= 1e12,
 * InfeasibleError if no budget-feasible portfolio reaches zeta.
 */
PortfolioSolution solve_portfolio(const MomentBundle& moments, const ProblemSpec& spec);

SurplusStats evaluate_portfolio(const Vector& theta, const MomentBundle& moments, const ProblemSpec& spec);

/// Ct = C^{-1} - C^{-1} 1 1^T C^{-1} / (1^T C^{-1} 1). Exposed for tests.
Matrix budget_projected_inverse(const Matrix& second_s);

/// Condition-number threshold on C_S.
inline constexpr double kMaxConditionNumber = 1e12;

/**
 * Active-set solver for min 1/2 x^T Q x - c^T x  s.t. 1^T x = total, lower <= x <= upper
 * with Q symmetric positive definite. Throws InfeasibleError if the box cannot
 * hold `total`.
 */
Vector solve_budget_box_qp(const Matrix& q, const Vector& c, double total, const Vector& lower, const Vector& upper);

}  // namespace alm
