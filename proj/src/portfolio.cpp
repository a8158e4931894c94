#include "alm/portfolio.hpp"

#include "alm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace alm {

namespace {

constexpr double kMaxExponent = 700.0;

void check_exponent(double x, const char* what) {
    if (!(x <= kMaxExponent)) {
        throw NumericalError(std::string(what) + ": exponent " + std::to_string(x) + " overflows (limit 700)");
    }
}

void check_bundle(const MomentBundle& m) {
    const Eigen::Index k = m.assets();
    if (k == 0) throw ValidationError("MomentBundle: at least one asset is required");
    if (m.second_s.rows() != k || m.second_s.cols() != k || m.cross_sl.size() != k) {
        throw ValidationError("MomentBundle: inconsistent dimensions");
    }
    if (!m.mean_s.allFinite() || !m.second_s.allFinite() || !m.cross_sl.allFinite() || !std::isfinite(m.mean_l) ||
        !std::isfinite(m.second_moment_l)) {
        throw ValidationError("MomentBundle: entries must be finite");
    }
}

// Linear solves against C_S with one step of iterative refinement.
class SecondMomentSolver {
public:
    explicit SecondMomentSolver(const Matrix& c) : c_(c), ldlt_(c) {
        const auto eig = jacobi_eigen(c);
        const double lo = eig.values.minCoeff();
        const double hi = eig.values.maxCoeff();
        if (!(lo > 0.0) || ldlt_.info() != Eigen::Success) {
            throw SolverError("solve_portfolio: C_S is singular or not positive definite");
        }
        condition_ = hi / lo;
        if (!(condition_ < kMaxConditionNumber)) {
            throw SolverError("solve_portfolio: C_S is ill-conditioned (condition number " +
                              std::to_string(condition_) + ")");
        }
    }

    Vector solve(const Vector& rhs) const {
        Vector x = ldlt_.solve(rhs);
        x += ldlt_.solve(rhs - c_ * x);
        return x;
    }

    double condition() const noexcept { return condition_; }

private:
    const Matrix& c_;
    Eigen::LDLT<Matrix> ldlt_;
    double condition_ = 0.0;
};

double surplus_scale(const MomentBundle& m, const ProblemSpec& spec) {
    return std::max({std::abs(spec.zeta), std::abs(m.mean_l), std::abs(spec.x0), 1.0});
}

// Relative KKT residual: stationarity (with budget and, if present, bound
// multipliers), primal feasibility, dual feasibility and complementary slackness.
double kkt_residual(const Vector& theta, double lambda, const MomentBundle& m, const ProblemSpec& spec) {
    const Eigen::Index k = theta.size();
    const Vector c_theta = m.second_s * theta;
    const Vector linear = m.cross_sl + (spec.zeta + lambda) * m.mean_s;
    const Vector g = c_theta - linear;
    const double scale = c_theta.norm() + m.cross_sl.norm() + std::abs(spec.zeta + lambda) * m.mean_s.norm() + 1e-300;

    std::vector<bool> free(static_cast<std::size_t>(k), true);
    if (spec.theta_bounds) {
        const auto& b = *spec.theta_bounds;
        for (Eigen::Index i = 0; i < k; ++i) {
            const double tol = 1e-9 * std::max({std::abs(theta(i)), std::abs(spec.x0), 1.0});
            if (theta(i) <= b.lower(i) + tol || theta(i) >= b.upper(i) - tol) free[static_cast<std::size_t>(i)] = false;
        }
    }
    double nu = 0.0;
    int n_free = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
        if (free[static_cast<std::size_t>(i)]) {
            nu += g(i);
            ++n_free;
        }
    }
    double stationarity = 0.0;
    if (n_free > 0) {
        nu /= n_free;
        for (Eigen::Index i = 0; i < k; ++i) {
            if (free[static_cast<std::size_t>(i)]) stationarity += (g(i) - nu) * (g(i) - nu);
        }
        stationarity = std::sqrt(stationarity);
        if (spec.theta_bounds) {
            const auto& b = *spec.theta_bounds;
            for (Eigen::Index i = 0; i < k; ++i) {
                if (free[static_cast<std::size_t>(i)]) continue;
                const double mu = g(i) - nu;
                const bool at_lower = std::abs(theta(i) - b.lower(i)) <= std::abs(theta(i) - b.upper(i));
                if (at_lower && mu < 0.0) stationarity += -mu;
                if (!at_lower && mu > 0.0) stationarity += mu;
            }
        }
    }

    const double s_scale = surplus_scale(m, spec);
    const double surplus = theta.dot(m.mean_s) - m.mean_l;
    const double budget = std::abs(theta.sum() - spec.x0) / std::max(std::abs(spec.x0), 1.0);
    const double floor_violation = std::max(0.0, spec.zeta - surplus) / s_scale;
    const double slackness = lambda > 0.0 ? std::abs(surplus - spec.zeta) / s_scale : 0.0;
    const double dual = std::max(0.0, -lambda);
    return stationarity / scale + budget + floor_violation + slackness + dual;
}

double printed_lambda(const MomentBundle& m, const ProblemSpec& spec, const SecondMomentSolver& solver,
                      const Vector& ones_solved, double h) {
    // (1 / m^T m) [m_L + zeta (1 - m^T m) - m^T (Ct C_SL + C^{-1} 1 x0)]
    const double mm = m.mean_s.squaredNorm();
    const Vector ct_csl = solver.solve(m.cross_sl) - ones_solved * (ones_solved.dot(m.cross_sl) / h);
    return (m.mean_l + spec.zeta * (1.0 - mm) - m.mean_s.dot(ct_csl + ones_solved * spec.x0)) / mm;
}

PortfolioSolution finish(Vector theta, double lambda, const MomentBundle& m, const ProblemSpec& spec) {
    PortfolioSolution out;
    const auto stats = evaluate_portfolio(theta, m, spec);
    out.kkt_residual = kkt_residual(theta, lambda, m, spec);
    out.theta = std::move(theta);
    out.lambda = lambda;
    out.constraint_active = lambda > 0.0;
    out.expected_surplus = stats.expected_surplus;
    out.surplus_std = stats.surplus_std;
    out.objective = stats.objective;
    return out;
}

PortfolioSolution solve_with_box(const MomentBundle& m, const ProblemSpec& spec) {
    const auto& b = *spec.theta_bounds;
    const double s_scale = surplus_scale(m, spec);
    auto theta_at = [&](double lambda) {
        return solve_budget_box_qp(m.second_s, m.cross_sl + (spec.zeta + lambda) * m.mean_s, spec.x0, b.lower,
                                   b.upper);
    };
    auto surplus_at = [&](const Vector& th) { return th.dot(m.mean_s) - m.mean_l; };

    Vector theta = theta_at(0.0);
    const double e0 = surplus_at(theta);
    double lambda = 0.0;
    if (e0 < spec.zeta) {
        double lo = 0.0;
        double hi = std::max(1.0, s_scale);
        Vector theta_hi = theta_at(hi);
        int doublings = 0;
        while (surplus_at(theta_hi) < spec.zeta) {
            if (++doublings > 200) {
                throw InfeasibleError("solve_portfolio: the surplus floor is unreachable within the box bounds", e0);
            }
            lo = hi;
            hi *= 2.0;
            theta_hi = theta_at(hi);
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            Vector th = theta_at(mid);
            if (surplus_at(th) >= spec.zeta) {
                hi = mid;
                theta_hi = std::move(th);
            } else {
                lo = mid;
            }
        }
        lambda = hi;
        theta = std::move(theta_hi);
    }
    auto out = finish(std::move(theta), lambda, m, spec);
    out.unconstrained_surplus = e0;
    out.used_box_qp = true;
    out.lambda_printed = std::numeric_limits<double>::quiet_NaN();
    out.lambda_discrepancy = 0.0;
    return out;
}

}  // namespace

void ProblemSpec::validate(Eigen::Index assets) const {
    if (!std::isfinite(x0)) throw ValidationError("ProblemSpec.x0 must be finite");
    if (!std::isfinite(zeta)) throw ValidationError("ProblemSpec.zeta must be finite");
    if (theta_bounds) {
        const auto& b = *theta_bounds;
        if (b.lower.size() != assets || b.upper.size() != assets) {
            throw ValidationError("ProblemSpec.theta_bounds must have one entry per asset (" + std::to_string(assets) +
                                  ")");
        }
        for (Eigen::Index i = 0; i < assets; ++i) {
            if (std::isnan(b.lower(i)) || std::isnan(b.upper(i)) || b.lower(i) > b.upper(i)) {
                throw ValidationError("ProblemSpec.theta_bounds: lower exceeds upper for asset " + std::to_string(i));
            }
        }
        if (b.lower.sum() > x0 || b.upper.sum() < x0) {
            throw ValidationError("ProblemSpec.theta_bounds cannot hold the budget x0");
        }
    }
}

MomentBundle moments_analytic(const GaussianModel& model) {
    const Eigen::Index d = model.dim();
    if (d < 2) throw ValidationError("moments_analytic: model must cover (L, log G_0, ...)");
    const Eigen::Index k = d - 1;
    const Vector& mu = model.mean();
    const Matrix& s = model.cov();

    MomentBundle out;
    out.mean_s.resize(k);
    out.second_s.resize(k, k);
    out.cross_sl.resize(k);
    out.mean_l = mu(0);
    out.second_moment_l = s(0, 0) + mu(0) * mu(0);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double e = mu(1 + i) + 0.5 * s(1 + i, 1 + i);
        check_exponent(e, "moments_analytic");
        out.mean_s(i) = std::exp(e);
        out.cross_sl(i) = (mu(0) + s(0, 1 + i)) * out.mean_s(i);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i; j < k; ++j) {
            const double e =
                mu(1 + i) + mu(1 + j) + 0.5 * (s(1 + i, 1 + i) + s(1 + j, 1 + j) + 2.0 * s(1 + i, 1 + j));
            check_exponent(e, "moments_analytic");
            out.second_s(i, j) = out.second_s(j, i) = std::exp(e);
        }
    }
    out.sample_count = 0;
    return out;
}

MomentBundle moments_from_samples(const Matrix& draws, MomentErrors* errors) {
    const Eigen::Index count = draws.rows();
    const Eigen::Index d = draws.cols();
    if (d < 2) throw ValidationError("moments_mc: samples must cover (L, log G_0, ...)");
    if (count < 1) throw ValidationError("moments_mc: no samples");
    const Eigen::Index k = d - 1;

    if (draws.rightCols(k).maxCoeff() > kMaxExponent) {
        throw NumericalError("moments_mc: log-return sample exceeds 700, exponentiation overflows");
    }
    const Matrix g = draws.rightCols(k).array().exp().matrix();
    const Vector l = draws.col(0);
    const double inv = 1.0 / static_cast<double>(count);

    MomentBundle out;
    out.mean_s = g.colwise().sum().transpose() * inv;
    out.second_s = symmetrized(g.transpose() * g * inv);
    out.cross_sl = g.transpose() * l * inv;
    out.mean_l = l.sum() * inv;
    out.second_moment_l = l.squaredNorm() * inv;
    out.sample_count = static_cast<long>(count);

    if (errors != nullptr) {
        // Standard error of a sample mean: sample std / sqrt(count).
        const double denom = count > 1 ? static_cast<double>(count - 1) : 1.0;
        const double root = std::sqrt(static_cast<double>(count));
        auto se = [&](const Eigen::ArrayXd& x, double mean) {
            return std::sqrt((x - mean).square().sum() / denom) / root;
        };
        errors->mean_s.resize(k);
        errors->cross_sl.resize(k);
        errors->second_s.resize(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            errors->mean_s(i) = se(g.col(i).array(), out.mean_s(i));
            errors->cross_sl(i) = se(g.col(i).array() * l.array(), out.cross_sl(i));
            for (Eigen::Index j = i; j < k; ++j) {
                errors->second_s(i, j) = errors->second_s(j, i) =
                    se(g.col(i).array() * g.col(j).array(), out.second_s(i, j));
            }
        }
        errors->mean_l = se(l.array(), out.mean_l);
        errors->second_moment_l = se(l.array().square(), out.second_moment_l);
    }
    return out;
}

MomentBundle moments_mc(const GaussianModel& model, long count, std::uint64_t rng_seed, MomentErrors& errors) {
    if (count < 1000) throw ValidationError("moments_mc: count must be >= 1000");
    if (model.dim() < 2) throw ValidationError("moments_mc: model must cover (L, log G_0, ...)");
    return moments_from_samples(sample(model, count, rng_seed), &errors);
}

MomentBundle moments_mc(const GaussianModel& model, long count, std::uint64_t rng_seed) {
    if (count < 1000) throw ValidationError("moments_mc: count must be >= 1000");
    if (model.dim() < 2) throw ValidationError("moments_mc: model must cover (L, log G_0, ...)");
    return moments_from_samples(sample(model, count, rng_seed), nullptr);
}

Matrix budget_projected_inverse(const Matrix& second_s) {
    const Eigen::Index k = second_s.rows();
    const SecondMomentSolver solver(second_s);
    Matrix inv(k, k);
    for (Eigen::Index j = 0; j < k; ++j) inv.col(j) = solver.solve(Vector::Unit(k, j));
    inv = symmetrized(inv);
    const Vector a = inv * Vector::Ones(k);
    return inv - a * a.transpose() / a.sum();
}

SurplusStats evaluate_portfolio(const Vector& theta, const MomentBundle& m, const ProblemSpec& spec) {
    check_bundle(m);
    if (theta.size() != m.assets()) {
        throw ValidationError("evaluate_portfolio: theta has length " + std::to_string(theta.size()) + ", expected " +
                              std::to_string(m.assets()));
    }
    const double e = theta.dot(m.mean_s) - m.mean_l;
    const double second = theta.dot(m.second_s * theta) - 2.0 * theta.dot(m.cross_sl) + m.second_moment_l;
    const double variance = std::max(0.0, second - e * e);
    const double objective = second - 2.0 * spec.zeta * e + spec.zeta * spec.zeta;
    return {e, std::sqrt(variance), objective};
}

PortfolioSolution solve_portfolio(const MomentBundle& m, const ProblemSpec& spec) {
    check_bundle(m);
    const Eigen::Index k = m.assets();
    spec.validate(k);
    require_symmetric(m.second_s, "MomentBundle.second_s", 1e-10);

    if (spec.theta_bounds) return solve_with_box(m, spec);

    const SecondMomentSolver solver(m.second_s);
    const Vector ones = Vector::Ones(k);
    const Vector a = solver.solve(ones);
    const double h = a.sum();
    auto projected = [&](const Vector& v) -> Vector { return solver.solve(v) - a * (a.dot(v) / h); };

    const Vector base = projected(m.cross_sl + spec.zeta * m.mean_s) + a * (spec.x0 / h);
    const Vector direction = projected(m.mean_s);
    const double e0 = base.dot(m.mean_s) - m.mean_l;
    const double slope = direction.dot(m.mean_s);

    double lambda = 0.0;
    if (e0 < spec.zeta) {
        const double reference = m.mean_s.dot(solver.solve(m.mean_s));
        if (!(slope > 1e-12 * std::abs(reference))) {
            throw InfeasibleError("solve_portfolio: the surplus floor zeta = " + std::to_string(spec.zeta) +
                                      " is unreachable (unconstrained expected surplus " + std::to_string(e0) + ")",
                                  e0);
        }
        lambda = (spec.zeta - e0) / slope;
    }
    Vector theta = base + lambda * direction;

    auto out = finish(std::move(theta), lambda, m, spec);
    out.unconstrained_surplus = e0;
    out.lambda_printed = printed_lambda(m, spec, solver, a, h);
    if (out.constraint_active) {
        out.lambda_discrepancy = std::abs(out.lambda_printed - lambda) / std::max(std::abs(lambda), 1.0);
    }
    return out;
}

}  // namespace alm
