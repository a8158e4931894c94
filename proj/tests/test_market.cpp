#include <doctest.h>

#include "alm/errors.hpp"
#include "alm/market.hpp"
#include "oracles.hpp"

#include <string>

using namespace alm;

TEST_CASE("time factors") {
    CHECK_THROWS_AS(time_factors(0.6, 0.0), ValidationError);
    CHECK_THROWS_AS(time_factors(0.6, -1.0), ValidationError);
    for (double kappa : {0.01, 0.6, 5.0}) {
        for (double t : {0.5, 1.0, 2.0}) {
            const auto f = time_factors(kappa, t);
            const double c2 = t * (1.0 - std::exp(-2.0 * kappa * t)) / (2.0 * kappa);
            CHECK(f.c == doctest::Approx(std::sqrt(c2)).epsilon(1e-13));
            CHECK(f.c_tilde == doctest::Approx(c2 / t).epsilon(1e-13));
        }
    }
    // Small kappa: c~ tends to t.
    CHECK(time_factors(1e-9, 2.0).c_tilde == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("joint law of the reference market") {
    const MarketParams p = reference_market();
    const GaussianModel y = build_joint_law(p);
    REQUIRE(y.dim() == 4);
    CHECK(y.mean()(0) == doctest::Approx(1000000.0));
    CHECK(y.mean()(1) == doctest::Approx(0.02));
    CHECK(y.mean()(2) == doctest::Approx(std::log(50.0) + 0.05));
    CHECK(y.mean()(3) == doctest::Approx(std::log(50.0) + 0.10));
    CHECK(y.cov()(0, 0) == doctest::Approx(2.0 * 80000.0 * 80000.0));
    // beta = 0: liability independent of rate and stocks.
    CHECK(y.cov().row(0).tail(3).norm() == 0.0);
    const auto f = time_factors(0.6, 1.0);
    CHECK(y.cov()(1, 1) == doctest::Approx(f.c_tilde * 2.0 * 0.005 * 0.005));
    CHECK(y.cov()(1, 2) == doctest::Approx(f.c * 2.0 * 0.005 * 0.02));
    CHECK(y.cov()(2, 3) == doctest::Approx(2.0 * 0.02 * 0.05));
}

TEST_CASE("asset law") {
    const MarketParams p = reference_market();
    const GaussianModel a = build_asset_law(p);
    const GaussianModel y = build_joint_law(p);
    REQUIRE(a.dim() == 4);
    CHECK(a.mean()(0) == y.mean()(0));
    CHECK(a.cov()(0, 0) == y.cov()(0, 0));
    CHECK(a.mean()(2) == doctest::Approx(0.05));
    CHECK(a.mean()(3) == doctest::Approx(0.10));
    // r0 = R0 gives a deterministic mean of R0 T.
    CHECK(a.mean()(1) == doctest::Approx(0.02));

    SUBCASE("integrated OU variance in closed form") {
        const double k = 0.6, t = 1.0;
        const double f2 = (t - 2.0 * (1.0 - std::exp(-k * t)) / k + (1.0 - std::exp(-2.0 * k * t)) / (2.0 * k)) / (k * k);
        CHECK(a.cov()(1, 1) == doctest::Approx(2.0 * 0.005 * 0.005 * f2).epsilon(1e-12));
    }
    SUBCASE("prices are irrelevant to gross returns") {
        MarketParams q = p;
        q.stocks.s0 << 7.0, 300.0;
        const GaussianModel b = build_asset_law(q);
        CHECK(b.mean() == a.mean());
        CHECK(b.cov() == a.cov());
        AssetLawConfig raw;
        raw.normalize_to_gross_returns = false;
        const GaussianModel c = build_asset_law(q, raw);
        CHECK(c.mean()(2) == doctest::Approx(std::log(7.0) + 0.05));
        CHECK(c.cov() == a.cov());
    }
    SUBCASE("Ito correction") {
        AssetLawConfig ito;
        ito.ito_correction = true;
        const GaussianModel b = build_asset_law(p, ito);
        CHECK(b.mean()(2) == doctest::Approx(0.05 - 0.5 * 2.0 * 0.02 * 0.02));
    }
    SUBCASE("zero rate volatility") {
        MarketParams q = p;
        q.rate.sigma_r.setZero();
        q.rate.r0 = 0.05;
        const GaussianModel b = build_asset_law(q);
        CHECK(b.cov().row(1).norm() == 0.0);
        CHECK(b.mean()(1) == doctest::Approx(0.02 + 0.03 * (1.0 - std::exp(-0.6)) / 0.6).epsilon(1e-14));
    }
    SUBCASE("short-rate proxy") {
        AssetLawConfig proxy;
        proxy.bond_mode = BondMode::short_rate_proxy;
        MarketParams q = p;
        q.horizon = 2.0;
        q.rate.r0 = 0.04;
        const GaussianModel b = build_asset_law(q, proxy);
        const auto f = time_factors(0.6, 2.0);
        CHECK(b.mean()(1) == doctest::Approx(2.0 * (0.02 + 0.02 * std::exp(-1.2))));
        CHECK(b.cov()(1, 1) == doctest::Approx(4.0 * f.c_tilde * 2.0 * 0.005 * 0.005));
    }
    SUBCASE("small kappa series joins the exact branch") {
        MarketParams lo = p, hi = p;
        lo.rate.kappa = 0.99e-4;
        hi.rate.kappa = 1.01e-4;
        const double vl = build_asset_law(lo).cov()(1, 1);
        const double vh = build_asset_law(hi).cov()(1, 1);
        CHECK(vl == doctest::Approx(vh).epsilon(1e-4));
        CHECK(vl == doctest::Approx(2.0 * 0.005 * 0.005 / 3.0).epsilon(1e-3));
    }
}

TEST_CASE("integrated OU bond matches an Euler scheme") {
    MarketParams p = reference_market();
    p.rate.r0 = 0.04;
    const GaussianModel a = build_asset_law(p);
    const double vol = std::sqrt(2.0) * 0.005;
    const auto draws = oracle::euler_integrated_ou(0.04, 0.02, 0.6, vol, 1.0, 20000, 200, 99);
    const double m = oracle::mean_of(draws);
    const double v = oracle::variance_of(draws);
    const double se_m = std::sqrt(v / draws.size());
    const double se_v = v * std::sqrt(2.0 / (draws.size() - 1.0));
    CHECK(std::abs(m - a.mean()(1)) < 3.0 * se_m);
    CHECK(std::abs(v - a.cov()(1, 1)) < 3.0 * se_v);
}

TEST_CASE("market validation") {
    MarketParams p = reference_market();
    p.rate.kappa = -1.0;
    try {
        p.validate();
        FAIL("expected failure");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("kappa") != std::string::npos);
    }
    p = reference_market();
    p.stocks.mu.resize(3);
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = reference_market();
    p.correlations.rho_w << 1.0, 1.0, 1.0, 1.0;
    CHECK_NOTHROW(p.validate());
    p.correlations.rho_b.resize(3, 3);
    p.correlations.rho_b << 1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0;
    p.liability.gamma = Vector::Ones(3);
    CHECK_THROWS_AS(p.validate(), ModelError);
    CHECK(bond_mode_from_string(to_string(BondMode::short_rate_proxy)) == BondMode::short_rate_proxy);
    CHECK_THROWS_AS(bond_mode_from_string("libor"), ValidationError);
}

TEST_CASE("bond-only market") {
    MarketParams p = reference_market();
    p.rate.sigma_r = Vector::Zero(0);
    p.stocks.s0 = Vector::Zero(0);
    p.stocks.mu = Vector::Zero(0);
    p.stocks.sigma = Matrix::Zero(0, 0);
    p.liability.beta = Vector::Zero(0);
    p.correlations.rho_w = Matrix::Zero(0, 0);
    const GaussianModel a = build_asset_law(p);
    CHECK(a.dim() == 2);
    CHECK(a.cov()(1, 1) == 0.0);
}
