#include "alm/priors.hpp"

#include "alm/errors.hpp"
#include "alm/rng.hpp"

#include <cmath>
#include <random>

namespace alm {

namespace {

class Perturber {
public:
    Perturber(Engine& engine, const BlockBounds& bounds) : engine_(engine), bounds_(bounds) {}

    double operator()(double value) {
        if (bounds_.lower == bounds_.upper && bounds_.lower == 0.0) return value;
        const double u = std::uniform_real_distribution<double>(bounds_.lower, bounds_.upper)(engine_);
        if (bounds_.kind == BoundKind::relative && value != 0.0) return value + u * std::abs(value);
        return value + u;
    }

    void apply(Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = (*this)(v(i));
    }

    void apply(Matrix& a) {
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = (*this)(a(i, j));
    }

private:
    Engine& engine_;
    const BlockBounds& bounds_;
};

double floor_positive(double x) { return std::max(x, kMinPositive); }

Matrix perturb_correlation(const Matrix& rho, Perturber& noise) {
    const Eigen::Index n = rho.rows();
    Matrix out = rho;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = std::clamp(noise(rho(i, j)), -kMaxCorrelation, kMaxCorrelation);
            out(i, j) = out(j, i) = v;
        }
    }
    return nearest_correlation(out);
}

// Largest value the noise can produce for `value` under `b`.
double max_reach(double value, const BlockBounds& b) {
    if (b.kind == BoundKind::relative && value != 0.0) return value + b.upper * std::abs(value);
    return value + b.upper;
}

void require_reachable_positive(double value, const BlockBounds& b, const char* field) {
    if (max_reach(value, b) <= 0.0) {
        throw ValidationError(std::string("perturb: bounds force ") + field + " to be non-positive");
    }
}

}  // namespace

std::string to_string(Homogeneity h) {
    switch (h) {
        case Homogeneity::high: return "high";
        case Homogeneity::medium: return "medium";
        case Homogeneity::low: return "low";
        case Homogeneity::custom: return "custom";
    }
    return "custom";
}

Homogeneity homogeneity_from_string(const std::string& name) {
    if (name == "high") return Homogeneity::high;
    if (name == "medium") return Homogeneity::medium;
    if (name == "low") return Homogeneity::low;
    if (name == "custom") return Homogeneity::custom;
    throw ValidationError("unknown homogeneity preset '" + name + "'");
}

PerturbationSpec PerturbationSpec::from_preset(Homogeneity preset) {
    double half = 0.0;
    switch (preset) {
        case Homogeneity::high: half = 0.05; break;
        case Homogeneity::medium: half = 0.15; break;
        case Homogeneity::low: half = 0.40; break;
        case Homogeneity::custom:
            throw ValidationError("PerturbationSpec: the custom preset has no built-in bounds");
    }
    PerturbationSpec spec;
    spec.preset = preset;
    spec.rate = {-half, half, BoundKind::relative};
    spec.stocks = {-half, half, BoundKind::relative};
    spec.liability = {-half, half, BoundKind::relative};
    spec.correlation = {-half, half, BoundKind::absolute};
    return spec;
}

void PerturbationSpec::validate() const {
    const std::pair<const BlockBounds*, const char*> blocks[] = {
        {&rate, "rate"}, {&stocks, "stocks"}, {&liability, "liability"}, {&correlation, "correlation"}};
    for (const auto& [b, name] : blocks) {
        if (!std::isfinite(b->lower) || !std::isfinite(b->upper)) {
            throw ValidationError(std::string("PerturbationSpec.") + name + ": bounds must be finite");
        }
        if (b->lower > b->upper) {
            throw ValidationError(std::string("PerturbationSpec.") + name + ": lower bound exceeds upper bound");
        }
    }
}

std::vector<MarketParams> perturb(const MarketParams& truth, const PerturbationSpec& spec, int count,
                                  std::uint64_t rng_seed) {
    if (count < 1) throw ValidationError("perturb: count must be >= 1");
    truth.validate();
    spec.validate();

    require_reachable_positive(truth.rate.kappa, spec.rate, "rate.kappa");
    for (Eigen::Index i = 0; i < truth.rate.sigma_r.size(); ++i)
        require_reachable_positive(truth.rate.sigma_r(i), spec.rate, "rate.sigma_r");
    for (Eigen::Index i = 0; i < truth.liability.gamma.size(); ++i)
        require_reachable_positive(truth.liability.gamma(i), spec.liability, "liability.gamma");

    std::vector<MarketParams> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        Engine engine = make_engine(derive_seed(rng_seed, {stream::kPerturb, static_cast<std::uint64_t>(j)}));
        MarketParams p = truth;

        Perturber rate(engine, spec.rate);
        p.rate.long_run = rate(p.rate.long_run);
        p.rate.kappa = floor_positive(rate(p.rate.kappa));
        rate.apply(p.rate.sigma_r);
        p.rate.sigma_r = p.rate.sigma_r.unaryExpr(&floor_positive);

        Perturber stocks(engine, spec.stocks);
        stocks.apply(p.stocks.mu);
        stocks.apply(p.stocks.sigma);
        p.stocks.sigma = p.stocks.sigma.unaryExpr(&floor_positive);

        Perturber liability(engine, spec.liability);
        p.liability.alpha = liability(p.liability.alpha);
        liability.apply(p.liability.beta);
        liability.apply(p.liability.gamma);
        p.liability.gamma = p.liability.gamma.unaryExpr(&floor_positive);

        Perturber correlation(engine, spec.correlation);
        p.correlations.rho_w = perturb_correlation(truth.correlations.rho_w, correlation);
        p.correlations.rho_b = perturb_correlation(truth.correlations.rho_b, correlation);

        p.validate();
        out.push_back(std::move(p));
    }
    return out;
}

PriorSet to_prior_set(const std::vector<MarketParams>& params, const std::optional<Vector>& weights,
                      const AssetLawConfig& config) {
    if (params.empty()) throw ValidationError("to_prior_set: at least one parameter set is required");
    if (weights && weights->size() != static_cast<Eigen::Index>(params.size())) {
        throw ValidationError("to_prior_set: " + std::to_string(params.size()) + " parameter sets but " +
                              std::to_string(weights->size()) + " weights");
    }
    std::vector<GaussianModel> models;
    models.reserve(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        try {
            models.push_back(build_asset_law(params[j], config));
        } catch (const Error& e) {
            throw ModelError("to_prior_set: replica " + std::to_string(j) + ": " + e.what());
        }
    }
    if (weights) return PriorSet(std::move(models), *weights);
    return PriorSet::equal_weights(std::move(models));
}

}  // namespace alm
