#include "alm/errors.hpp"
#include "alm/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace alm {

namespace {

enum class Bound { free, lower, upper };

// x_i = clamp(t, lower_i, upper_i) with t chosen so that sum x = total.
Vector feasible_start(const Vector& lower, const Vector& upper, double total) {
    const Eigen::Index k = lower.size();
    auto filled = [&](double t) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) s += std::clamp(t, lower(i), upper(i));
        return s;
    };
    double lo = -1.0;
    double hi = 1.0;
    const double span = std::max(std::abs(total), 1.0);
    while (filled(lo) > total) lo -= 2.0 * span + std::abs(lo);
    while (filled(hi) < total) hi += 2.0 * span + std::abs(hi);
    for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (filled(mid) < total ? lo : hi) = mid;
    }
    Vector x(k);
    for (Eigen::Index i = 0; i < k; ++i) x(i) = std::clamp(hi, lower(i), upper(i));
    // Push the rounding residual into a variable with room.
    double residual = total - x.sum();
    for (Eigen::Index i = 0; i < k && residual != 0.0; ++i) {
        const double moved = std::clamp(x(i) + residual, lower(i), upper(i)) - x(i);
        x(i) += moved;
        residual -= moved;
    }
    return x;
}

}  // namespace

Vector solve_budget_box_qp(const Matrix& q, const Vector& c, double total, const Vector& lower, const Vector& upper) {
    const Eigen::Index k = q.rows();
    if (q.cols() != k || c.size() != k || lower.size() != k || upper.size() != k) {
        throw ValidationError("solve_budget_box_qp: inconsistent dimensions");
    }
    if (lower.sum() > total || upper.sum() < total) {
        throw InfeasibleError("solve_budget_box_qp: bounds cannot hold the budget", std::numeric_limits<double>::quiet_NaN());
    }

    Vector x = feasible_start(lower, upper, total);
    const double scale = std::max({std::abs(total), x.cwiseAbs().maxCoeff(), 1.0});
    const double tol = 1e-12 * scale;

    std::vector<Bound> state(static_cast<std::size_t>(k), Bound::free);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (x(i) <= lower(i)) state[static_cast<std::size_t>(i)] = Bound::lower;
        else if (x(i) >= upper(i)) state[static_cast<std::size_t>(i)] = Bound::upper;
    }

    const int max_iter = 50 * static_cast<int>(k) + 50;
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<Eigen::Index> freed;
        for (Eigen::Index i = 0; i < k; ++i)
            if (state[static_cast<std::size_t>(i)] == Bound::free) freed.push_back(i);
        const auto nf = static_cast<Eigen::Index>(freed.size());

        // Equality-constrained subproblem on the free variables.
        Vector target = x;
        double nu = 0.0;
        const Vector g_full = q * x - c;
        if (nf > 0) {
            Matrix kkt = Matrix::Zero(nf + 1, nf + 1);
            Vector rhs(nf + 1);
            double fixed_sum = 0.0;
            for (Eigen::Index i = 0; i < k; ++i)
                if (state[static_cast<std::size_t>(i)] != Bound::free) fixed_sum += x(i);
            for (Eigen::Index a = 0; a < nf; ++a) {
                const Eigen::Index i = freed[static_cast<std::size_t>(a)];
                double r = c(i);
                for (Eigen::Index j = 0; j < k; ++j)
                    if (state[static_cast<std::size_t>(j)] != Bound::free) r -= q(i, j) * x(j);
                rhs(a) = r;
                for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = q(i, freed[static_cast<std::size_t>(b)]);
                kkt(a, nf) = -1.0;
                kkt(nf, a) = 1.0;
            }
            rhs(nf) = total - fixed_sum;
            const Vector sol = kkt.fullPivLu().solve(rhs);
            if (!sol.allFinite()) throw SolverError("solve_budget_box_qp: singular subproblem");
            for (Eigen::Index a = 0; a < nf; ++a) target(freed[static_cast<std::size_t>(a)]) = sol(a);
            nu = sol(nf);
        }

        const Vector step = target - x;
        if (step.cwiseAbs().maxCoeff() <= tol) {
            // Check bound multipliers mu_i = g_i - nu (>= 0 at lower, <= 0 at upper).
            const Vector g = q * target - c;
            if (nf == 0) {
                double hi_nu = std::numeric_limits<double>::infinity();
                double lo_nu = -std::numeric_limits<double>::infinity();
                for (Eigen::Index i = 0; i < k; ++i) {
                    if (state[static_cast<std::size_t>(i)] == Bound::lower) hi_nu = std::min(hi_nu, g(i));
                    if (state[static_cast<std::size_t>(i)] == Bound::upper) lo_nu = std::max(lo_nu, g(i));
                }
                nu = std::isfinite(hi_nu) && std::isfinite(lo_nu) ? 0.5 * (hi_nu + lo_nu)
                                                                    : (std::isfinite(hi_nu) ? hi_nu : lo_nu);
            }
            Eigen::Index worst = -1;
            double worst_violation = 1e-12 * (g.cwiseAbs().maxCoeff() + 1.0);
            for (Eigen::Index i = 0; i < k; ++i) {
                const double mu = g(i) - nu;
                double violation = 0.0;
                if (state[static_cast<std::size_t>(i)] == Bound::lower) violation = -mu;
                if (state[static_cast<std::size_t>(i)] == Bound::upper) violation = mu;
                if (violation > worst_violation) {
                    worst_violation = violation;
                    worst = i;
                }
            }
            x = target;
            if (worst < 0) return x;
            state[static_cast<std::size_t>(worst)] = Bound::free;
            continue;
        }

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        Bound blocking_side = Bound::free;
        for (Eigen::Index i : freed) {
            if (step(i) < 0.0 && std::isfinite(lower(i))) {
                const double a = (lower(i) - x(i)) / step(i);
                if (a < alpha) {
                    alpha = a;
                    blocking = i;
                    blocking_side = Bound::lower;
                }
            } else if (step(i) > 0.0 && std::isfinite(upper(i))) {
                const double a = (upper(i) - x(i)) / step(i);
                if (a < alpha) {
                    alpha = a;
                    blocking = i;
                    blocking_side = Bound::upper;
                }
            }
        }
        alpha = std::max(alpha, 0.0);
        x += alpha * step;
        if (blocking >= 0) {
            x(blocking) = blocking_side == Bound::lower ? lower(blocking) : upper(blocking);
            state[static_cast<std::size_t>(blocking)] = blocking_side;
        }
    }
    throw SolverError("solve_budget_box_qp: active-set iteration limit reached");
}

}  // namespace alm
