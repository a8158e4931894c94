#include <doctest.h>

#include "alm/errors.hpp"
#include "alm/market.hpp"
#include "alm/portfolio.hpp"
#include "oracles.hpp"

#include <limits>

using namespace alm;

namespace {

MomentBundle random_bundle(std::mt19937_64& rng, int k = 3) {
    std::uniform_real_distribution<double> u(0.9, 1.25);
    std::normal_distribution<double> z;
    MomentBundle m;
    m.mean_s.resize(k);
    for (int i = 0; i < k; ++i) m.mean_s(i) = u(rng);
    const Matrix cov = 0.04 * oracle::random_spd(k, rng);
    m.second_s = cov + m.mean_s * m.mean_s.transpose();
    m.second_s = 0.5 * (m.second_s + m.second_s.transpose());
    m.mean_l = 0.9 + 0.1 * z(rng);
    Vector cov_sl(k);
    for (int i = 0; i < k; ++i) cov_sl(i) = 0.02 * z(rng);
    m.cross_sl = cov_sl + m.mean_l * m.mean_s;
    m.second_moment_l = m.mean_l * m.mean_l + 0.05;
    return m;
}

double objective(const Vector& theta, const MomentBundle& m, double zeta) {
    return theta.dot(m.second_s * theta) - 2.0 * theta.dot(m.cross_sl + zeta * m.mean_s);
}

oracle::QpResult oracle_solution(const MomentBundle& m, const ProblemSpec& spec) {
    return oracle::mv_qp(m.second_s, m.cross_sl + spec.zeta * m.mean_s, m.mean_s, spec.x0, spec.zeta + m.mean_l);
}

// Smallest objective over every assignment of free / lower / upper to the
// coordinates, each solved as an equality-constrained QP.
Vector brute_force_box(const Matrix& q, const Vector& c, double total, const Vector& lo, const Vector& hi) {
    const int k = static_cast<int>(q.rows());
    int combos = 1;
    for (int i = 0; i < k; ++i) combos *= 3;
    double best = std::numeric_limits<double>::infinity();
    Vector best_x;
    for (int code = 0; code < combos; ++code) {
        std::vector<int> state(k);
        int rest = code;
        for (int i = 0; i < k; ++i) {
            state[i] = rest % 3;
            rest /= 3;
        }
        std::vector<int> free_idx;
        Vector x = Vector::Zero(k);
        double fixed_sum = 0.0;
        for (int i = 0; i < k; ++i) {
            if (state[i] == 0) free_idx.push_back(i);
            else {
                x(i) = state[i] == 1 ? lo(i) : hi(i);
                fixed_sum += x(i);
            }
        }
        const int f = static_cast<int>(free_idx.size());
        if (f == 0) {
            if (std::abs(fixed_sum - total) > 1e-9) continue;
        } else {
            Matrix kkt = Matrix::Zero(f + 1, f + 1);
            Vector rhs(f + 1);
            for (int a = 0; a < f; ++a) {
                double r = c(free_idx[a]);
                for (int i = 0; i < k; ++i)
                    if (state[i] != 0) r -= q(free_idx[a], i) * x(i);
                rhs(a) = r;
                for (int b = 0; b < f; ++b) kkt(a, b) = q(free_idx[a], free_idx[b]);
                kkt(a, f) = kkt(f, a) = 1.0;
            }
            rhs(f) = total - fixed_sum;
            const Vector sol = kkt.fullPivLu().solve(rhs);
            for (int a = 0; a < f; ++a) x(free_idx[a]) = sol(a);
        }
        bool ok = true;
        for (int i = 0; i < k; ++i) ok = ok && x(i) >= lo(i) - 1e-12 && x(i) <= hi(i) + 1e-12;
        if (!ok) continue;
        const double val = 0.5 * x.dot(q * x) - c.dot(x);
        if (val < best) {
            best = val;
            best_x = x;
        }
    }
    return best_x;
}

}  // namespace

TEST_CASE("closed form agrees with the KKT oracle") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> shift(-0.1, 0.1);
    int active = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const MomentBundle m = random_bundle(rng);
        ProblemSpec spec{0.0, 1.0, std::nullopt};
        const auto free_sol = oracle_solution(m, spec);
        spec.zeta = free_sol.theta.dot(m.mean_s) - m.mean_l + shift(rng);
        const auto ref = oracle_solution(m, spec);
        const auto sol = solve_portfolio(m, spec);
        active += sol.constraint_active;
        CHECK(sol.constraint_active == ref.floor_active);
        CHECK((sol.theta - ref.theta).norm() / ref.theta.norm() < 1e-8);
        CHECK(sol.kkt_residual < 1e-10);
        CHECK(std::abs(sol.theta.sum() - spec.x0) < 1e-12);
        CHECK(sol.expected_surplus >= spec.zeta - 1e-12);
        if (sol.constraint_active) {
            CHECK(std::isfinite(sol.lambda_printed));
            CHECK(sol.lambda > 0.0);
        }
    }
    CHECK(active > 20);
    CHECK(active < 80);
}

TEST_CASE("budget-projected inverse") {
    std::mt19937_64 rng(13);
    const MomentBundle m = random_bundle(rng, 4);
    const Matrix ct = budget_projected_inverse(m.second_s);
    CHECK((ct * Vector::Ones(4)).norm() < 1e-12 * ct.norm());
    CHECK((ct * m.second_s * ct - ct).norm() < 1e-10 * ct.norm());
    CHECK((ct - ct.transpose()).norm() == 0.0);
}

TEST_CASE("optimality against feasible perturbations") {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> z;
    for (double push : {-0.05, 0.05}) {
        const MomentBundle m = random_bundle(rng);
        ProblemSpec spec{0.0, 1.0, std::nullopt};
        spec.zeta = solve_portfolio(m, spec).expected_surplus + push;
        const auto sol = solve_portfolio(m, spec);
        const double base = objective(sol.theta, m, spec.zeta);
        for (int i = 0; i < 50; ++i) {
            Vector d(3);
            for (int j = 0; j < 3; ++j) d(j) = z(rng);
            d.array() -= d.mean();
            // Stay on the floor when it binds; otherwise any budget-neutral move.
            if (sol.constraint_active) {
                Vector mc = m.mean_s.array() - m.mean_s.mean();
                d -= mc * (d.dot(mc) / mc.squaredNorm());
            }
            d *= 1e-3;
            CHECK(objective(sol.theta + d, m, spec.zeta) >= base - 1e-12);
        }
    }
}

TEST_CASE("expected surplus follows the floor") {
    std::mt19937_64 rng(15);
    const MomentBundle m = random_bundle(rng);
    const double e0 = solve_portfolio(m, {0.0, 1.0, std::nullopt}).unconstrained_surplus;
    double previous = -std::numeric_limits<double>::infinity();
    for (double zeta = e0 - 0.2; zeta < e0 + 0.2; zeta += 0.02) {
        const auto sol = solve_portfolio(m, {zeta, 1.0, std::nullopt});
        CHECK(sol.expected_surplus >= previous - 1e-12);
        // Unconstrained surplus moves with zeta; the floor binds only above it.
        const double free_e = sol.unconstrained_surplus;
        CHECK(sol.expected_surplus == doctest::Approx(std::max(free_e, zeta)).epsilon(1e-10));
        previous = sol.expected_surplus;
    }
}

TEST_CASE("failure modes") {
    std::mt19937_64 rng(16);
    MomentBundle m = random_bundle(rng);
    SUBCASE("unreachable floor") {
        m.mean_s.setConstant(1.05);
        m.second_s = 0.04 * oracle::random_spd(3, rng) + m.mean_s * m.mean_s.transpose();
        try {
            solve_portfolio(m, {10.0, 1.0, std::nullopt});
            FAIL("expected InfeasibleError");
        } catch (const InfeasibleError& e) {
            CHECK(e.unconstrained_surplus() == doctest::Approx(1.05 - m.mean_l));
        }
    }
    SUBCASE("singular and ill-conditioned second moments") {
        m.second_s = m.mean_s * m.mean_s.transpose();
        CHECK_THROWS_AS(solve_portfolio(m, {0.0, 1.0, std::nullopt}), SolverError);
        m.second_s = Matrix::Identity(3, 3);
        m.second_s(2, 2) = 1e-13;
        CHECK_THROWS_AS(solve_portfolio(m, {0.0, 1.0, std::nullopt}), SolverError);
    }
    SUBCASE("bad inputs") {
        CHECK_THROWS_AS(solve_portfolio(m, {std::nan(""), 1.0, std::nullopt}), ValidationError);
        MomentBundle short_m = m;
        short_m.cross_sl.resize(2);
        CHECK_THROWS_AS(solve_portfolio(short_m, {0.0, 1.0, std::nullopt}), ValidationError);
    }
}

TEST_CASE("single asset takes the whole budget") {
    MomentBundle m;
    m.mean_s = Vector::Constant(1, 1.02);
    m.second_s = Matrix::Constant(1, 1, 1.0404);
    m.cross_sl = Vector::Constant(1, 0.5 * 1.02);
    m.mean_l = 0.5;
    m.second_moment_l = 0.26;
    const auto sol = solve_portfolio(m, {0.0, 1e6, std::nullopt});
    CHECK(sol.theta(0) == doctest::Approx(1e6));
}

TEST_CASE("analytic moments match lognormal formulas") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    Vector mu(4);
    for (int i = 0; i < 4; ++i) mu(i) = 0.1 * z(rng);
    const Matrix s = 0.05 * oracle::random_spd(4, rng);
    const GaussianModel model(mu, s);
    const MomentBundle m = moments_analytic(model);
    CHECK(m.sample_count == 0);
    for (int i = 0; i < 3; ++i) {
        const double ei = std::exp(mu(1 + i) + 0.5 * s(1 + i, 1 + i));
        CHECK(m.mean_s(i) == doctest::Approx(ei).epsilon(1e-14));
        // Stein: E[L e^{X}] = (mu_L + cov(L, X)) E[e^X].
        CHECK(m.cross_sl(i) == doctest::Approx((mu(0) + s(0, 1 + i)) * ei).epsilon(1e-14));
        for (int j = 0; j < 3; ++j) {
            const double v = s(1 + i, 1 + i) + s(1 + j, 1 + j) + 2.0 * s(1 + i, 1 + j);
            CHECK(m.second_s(i, j) == doctest::Approx(std::exp(mu(1 + i) + mu(1 + j) + 0.5 * v)).epsilon(1e-14));
        }
    }
    CHECK(m.second_moment_l == doctest::Approx(mu(0) * mu(0) + s(0, 0)));

    Vector big = mu;
    big(1) = 701.0;
    CHECK_THROWS_AS(moments_analytic(GaussianModel(big, s)), NumericalError);
}

TEST_CASE("Monte Carlo moments") {
    const GaussianModel model = build_asset_law(reference_market());
    const MomentBundle exact = moments_analytic(model);
    MomentErrors se;
    const MomentBundle mc = moments_mc(model, 50000, 3, se);
    CHECK(mc.sample_count == 50000);
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(mc.mean_s(i) - exact.mean_s(i)) < 4.0 * se.mean_s(i) + 1e-15);
        CHECK(std::abs(mc.cross_sl(i) - exact.cross_sl(i)) < 4.0 * se.cross_sl(i));
    }
    CHECK(std::abs(mc.mean_l - exact.mean_l) < 4.0 * se.mean_l);
    CHECK(moments_mc(model, 2000, 9).second_s == moments_mc(model, 2000, 9).second_s);
    CHECK_THROWS_AS(moments_mc(model, 999, 9), ValidationError);

    Matrix draws(2, 2);
    draws << 1.0, 0.0, 3.0, std::log(2.0);
    const MomentBundle tiny = moments_from_samples(draws);
    CHECK(tiny.mean_s(0) == doctest::Approx(1.5));
    CHECK(tiny.second_s(0, 0) == doctest::Approx(2.5));
    CHECK(tiny.cross_sl(0) == doctest::Approx(3.5));
    CHECK(tiny.mean_l == 2.0);
    CHECK(tiny.second_moment_l == 5.0);
}

TEST_CASE("reference market solution") {
    const MomentBundle m = moments_analytic(build_asset_law(reference_market()));
    const auto sol = solve_portfolio(m, {0.0, 1e6, std::nullopt});
    CHECK(sol.theta.sum() == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(sol.kkt_residual < 1e-8);
    CHECK(sol.expected_surplus >= 0.0);
}

TEST_CASE("box constrained QP") {
    std::mt19937_64 rng(18);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix q = oracle::random_spd(4, rng);
        Vector c(4), lo(4), hi(4);
        for (int i = 0; i < 4; ++i) {
            c(i) = 2.0 * z(rng);
            lo(i) = -0.3 + 0.2 * z(rng);
            hi(i) = lo(i) + 0.2 + std::abs(z(rng));
        }
        const double total = 0.5 * (lo.sum() + hi.sum());
        const Vector expected = brute_force_box(q, c, total, lo, hi);
        const Vector got = solve_budget_box_qp(q, c, total, lo, hi);
        CHECK((got - expected).norm() < 1e-9 * std::max(1.0, expected.norm()));
    }
    CHECK_THROWS_AS(solve_budget_box_qp(Matrix::Identity(2, 2), Vector::Zero(2), 5.0, Vector::Zero(2), Vector::Ones(2)),
                    InfeasibleError);
}

TEST_CASE("box bounds through solve_portfolio") {
    std::mt19937_64 rng(19);
    const MomentBundle m = random_bundle(rng);
    const double inf = std::numeric_limits<double>::infinity();
    ProblemSpec loose{0.0, 1.0, BoxBounds{Vector::Constant(3, -inf), Vector::Constant(3, inf)}};
    const auto plain = solve_portfolio(m, {0.0, 1.0, std::nullopt});
    const auto boxed = solve_portfolio(m, loose);
    CHECK(boxed.used_box_qp);
    CHECK((boxed.theta - plain.theta).norm() < 1e-9);

    ProblemSpec long_only{plain.expected_surplus + 0.01, 1.0, BoxBounds{Vector::Zero(3), Vector::Constant(3, inf)}};
    const auto sol = solve_portfolio(m, long_only);
    CHECK(sol.theta.minCoeff() >= -1e-12);
    CHECK(sol.theta.sum() == doctest::Approx(1.0));
    CHECK(sol.kkt_residual < 1e-6);

    ProblemSpec tight{0.0, 1.0, BoxBounds{Vector::Zero(3), Vector::Constant(3, 0.2)}};
    CHECK_THROWS_AS(solve_portfolio(m, tight), ValidationError);
}
