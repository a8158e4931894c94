#include "alm/market.hpp"

#include "alm/errors.hpp"

#include <cmath>
#include <string>

namespace alm {

namespace {

void require_finite(double x, const char* field) {
    if (!std::isfinite(x)) throw ValidationError(std::string("MarketParams.") + field + " must be finite");
}

void require_length(const Vector& v, Eigen::Index n, const char* field) {
    if (v.size() != n) {
        throw ValidationError(std::string("MarketParams.") + field + " must have length " + std::to_string(n) +
                              ", got " + std::to_string(v.size()));
    }
    if (!v.allFinite()) throw ValidationError(std::string("MarketParams.") + field + " must be finite");
}

void require_correlation(const Matrix& rho, Eigen::Index n, const char* field) {
    const std::string name = std::string("MarketParams.") + field;
    if (rho.rows() != n || rho.cols() != n) {
        throw ValidationError(name + " must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    require_symmetric(rho, name);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(rho(i, i) - 1.0) > 1e-12) throw ValidationError(name + " must have unit diagonal");
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (std::abs(rho(i, j)) > 1.0 + 1e-12) throw ValidationError(name + " entries must lie in [-1, 1]");
    try {
        require_psd(rho, name);
    } catch (const ValidationError& e) {
        throw ModelError(e.what());
    }
}

// Zero-pads a W-loading vector of length n to the (n + m) factor space.
Vector pad_w(const Vector& v, Eigen::Index m) {
    Vector out = Vector::Zero(v.size() + m);
    out.head(v.size()) = v;
    return out;
}

Vector liability_loading(const MarketParams& p) {
    Vector b(p.n() + p.m());
    b << p.liability.beta, p.liability.gamma;
    return b;
}

// Integrals of phi(v) = (1 - exp(-kappa v)) / kappa over [0, T]:
// first = int phi, second = int phi^2. Series for small kappa T.
struct IntegratedRateFactors {
    double first;
    double second;
};

IntegratedRateFactors integrated_rate_factors(double kappa, double t) {
    const double kt = kappa * t;
    if (kt < 1e-4) {
        const double t2 = t * t;
        const double t3 = t2 * t;
        return {t2 / 2.0 - kappa * t3 / 6.0 + kappa * kappa * t2 * t2 / 24.0,
                t3 / 3.0 - kappa * t2 * t2 / 4.0 + 7.0 * kappa * kappa * t3 * t2 / 60.0};
    }
    const double a = -std::expm1(-kt);
    const double b = -std::expm1(-2.0 * kt);
    return {(t - a / kappa) / kappa, (t - 2.0 * a / kappa + b / (2.0 * kappa)) / (kappa * kappa)};
}

void check_assembled(const Matrix& cov, const char* what) {
    try {
        require_psd(cov, what);
    } catch (const ValidationError&) {
        throw ModelError(std::string(what) + ": assembled covariance is indefinite beyond tolerance");
    }
}

}  // namespace

void MarketParams::validate() const {
    const Eigen::Index nn = n();
    const Eigen::Index mm = m();
    require_finite(rate.r0, "rate.r0");
    require_finite(rate.long_run, "rate.R0");
    require_finite(rate.kappa, "rate.kappa");
    if (!(rate.kappa > 0.0)) throw ValidationError("MarketParams.rate.kappa must be positive");
    require_length(rate.sigma_r, nn, "rate.sigma_r");
    require_length(stocks.s0, nn, "stocks.s0");
    require_length(stocks.mu, nn, "stocks.mu");
    if (stocks.sigma.rows() != nn || stocks.sigma.cols() != nn) {
        throw ValidationError("MarketParams.stocks.sigma must be " + std::to_string(nn) + "x" + std::to_string(nn));
    }
    if (!stocks.sigma.allFinite()) throw ValidationError("MarketParams.stocks.sigma must be finite");
    for (Eigen::Index i = 0; i < nn; ++i) {
        if (!(stocks.s0(i) > 0.0)) throw ValidationError("MarketParams.stocks.s0 entries must be positive");
    }
    require_finite(liability.l0, "liability.l0");
    require_finite(liability.alpha, "liability.alpha");
    require_length(liability.beta, nn, "liability.beta");
    require_length(liability.gamma, mm, "liability.gamma");
    require_finite(horizon, "horizon_T");
    if (!(horizon > 0.0)) throw ValidationError("MarketParams.horizon_T must be positive");
    if (!(bond_s0 > 0.0) || !std::isfinite(bond_s0)) throw ValidationError("MarketParams.bond_s0 must be positive");
    require_correlation(correlations.rho_w, nn, "correlations.rho_W");
    require_correlation(correlations.rho_b, mm, "correlations.rho_B");
}

Matrix MarketParams::factor_covariance() const {
    const Eigen::Index nn = n();
    const Eigen::Index mm = m();
    Matrix cz = Matrix::Zero(nn + mm, nn + mm);
    cz.topLeftCorner(nn, nn) = correlations.rho_w;
    cz.bottomRightCorner(mm, mm) = correlations.rho_b;
    return cz;
}

MarketParams reference_market() {
    MarketParams p;
    p.rate.r0 = 0.02;
    p.rate.long_run = 0.02;
    p.rate.kappa = 0.60;
    p.rate.sigma_r = Vector::Constant(2, 0.005);
    p.stocks.s0 = Vector::Constant(2, 50.0);
    p.stocks.mu = (Vector(2) << 0.05, 0.10).finished();
    p.stocks.sigma = (Matrix(2, 2) << 0.02, 0.02, 0.05, 0.05).finished();
    p.liability.l0 = 0.0;
    p.liability.alpha = 1000000.0;
    p.liability.beta = Vector::Zero(2);
    p.liability.gamma = Vector::Constant(2, 80000.0);
    p.correlations.rho_w = Matrix::Identity(2, 2);
    p.correlations.rho_b = Matrix::Identity(2, 2);
    p.horizon = 1.0;
    return p;
}

TimeFactors time_factors(double kappa, double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("time_factors: t must be positive");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("time_factors: kappa must be positive");
    const double c2 = t * (-std::expm1(-2.0 * kappa * t)) / (2.0 * kappa);
    return {std::sqrt(c2), c2 / t};
}

GaussianModel build_joint_law(const MarketParams& p) {
    p.validate();
    const Eigen::Index nn = p.n();
    const Eigen::Index mm = p.m();
    const Eigen::Index dim = nn + 2;
    const double t = p.horizon;
    const auto [c, c_tilde] = time_factors(p.rate.kappa, t);
    const Matrix cz = p.factor_covariance();

    // Loading vectors in coordinate order (L, r, log S_1..n); r is index 1.
    std::vector<Vector> load;
    load.reserve(static_cast<std::size_t>(dim));
    load.push_back(liability_loading(p));
    load.push_back(pad_w(p.rate.sigma_r, mm));
    for (Eigen::Index i = 0; i < nn; ++i) load.push_back(pad_w(p.stocks.sigma.row(i).transpose(), mm));

    Matrix cov(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (Eigen::Index k = j; k < dim; ++k) {
            const int rate_hits = (j == 1) + (k == 1);
            const double scale = rate_hits == 0 ? t : (rate_hits == 1 ? c : c_tilde);
            const double q = load[static_cast<std::size_t>(j)].dot(cz * load[static_cast<std::size_t>(k)]);
            cov(j, k) = cov(k, j) = scale * q;
        }
    }

    Vector mean(dim);
    mean(0) = p.liability.l0 + p.liability.alpha * t;
    mean(1) = p.rate.long_run + std::exp(-p.rate.kappa * t) * (p.rate.r0 - p.rate.long_run);
    for (Eigen::Index i = 0; i < nn; ++i) mean(2 + i) = std::log(p.stocks.s0(i)) + p.stocks.mu(i) * t;

    check_assembled(cov, "build_joint_law");
    return GaussianModel(std::move(mean), std::move(cov));
}

GaussianModel build_asset_law(const MarketParams& p, const AssetLawConfig& config) {
    p.validate();
    const Eigen::Index nn = p.n();
    const Eigen::Index mm = p.m();
    const Eigen::Index dim = nn + 2;
    const double t = p.horizon;
    const double kappa = p.rate.kappa;
    const Matrix cz = p.factor_covariance();
    const Vector b = liability_loading(p);
    const Vector sr = pad_w(p.rate.sigma_r, mm);

    std::vector<Vector> stock_load;
    stock_load.reserve(static_cast<std::size_t>(nn));
    for (Eigen::Index i = 0; i < nn; ++i) stock_load.push_back(pad_w(p.stocks.sigma.row(i).transpose(), mm));

    Vector mean(dim);
    Matrix cov = Matrix::Zero(dim, dim);

    // Liability: identical expressions to build_joint_law.
    mean(0) = p.liability.l0 + p.liability.alpha * t;
    cov(0, 0) = t * b.dot(cz * b);

    // Stocks.
    for (Eigen::Index i = 0; i < nn; ++i) {
        const Vector& si = stock_load[static_cast<std::size_t>(i)];
        double mu = p.stocks.mu(i) * t;
        if (config.ito_correction) mu -= 0.5 * si.dot(cz * si) * t;
        if (!config.normalize_to_gross_returns) mu += std::log(p.stocks.s0(i));
        mean(2 + i) = mu;
        cov(0, 2 + i) = cov(2 + i, 0) = t * si.dot(cz * b);
        for (Eigen::Index j = i; j < nn; ++j) {
            cov(2 + i, 2 + j) = cov(2 + j, 2 + i) = t * si.dot(cz * stock_load[static_cast<std::size_t>(j)]);
        }
    }

    // Bond log growth.
    const double rate_var = sr.dot(cz * sr);
    double bond_mean;
    double rate_scale;  // multiplies sigma_r^T C_Z v for covariances with L and stocks
    double bond_var;
    if (config.bond_mode == BondMode::integrated_ou_exact) {
        const auto f = integrated_rate_factors(kappa, t);
        bond_mean = p.rate.long_run * t + (p.rate.r0 - p.rate.long_run) * (-std::expm1(-kappa * t)) / kappa;
        rate_scale = f.first;
        bond_var = rate_var * f.second;
    } else {
        const auto [c, c_tilde] = time_factors(kappa, t);
        bond_mean = t * (p.rate.long_run + std::exp(-kappa * t) * (p.rate.r0 - p.rate.long_run));
        rate_scale = t * c;
        bond_var = t * t * c_tilde * rate_var;
    }
    if (!config.normalize_to_gross_returns) bond_mean += std::log(p.bond_s0);
    mean(1) = bond_mean;
    cov(1, 1) = bond_var;
    cov(0, 1) = cov(1, 0) = rate_scale * sr.dot(cz * b);
    for (Eigen::Index i = 0; i < nn; ++i) {
        cov(1, 2 + i) = cov(2 + i, 1) = rate_scale * sr.dot(cz * stock_load[static_cast<std::size_t>(i)]);
    }

    check_assembled(cov, "build_asset_law");
    return GaussianModel(std::move(mean), std::move(cov));
}

std::string to_string(BondMode mode) {
    return mode == BondMode::integrated_ou_exact ? "integrated_ou_exact" : "short_rate_proxy";
}

BondMode bond_mode_from_string(const std::string& name) {
    if (name == "integrated_ou_exact") return BondMode::integrated_ou_exact;
    if (name == "short_rate_proxy") return BondMode::short_rate_proxy;
    throw ValidationError("unknown bond_mode '" + name + "'");
}

}  // namespace alm
