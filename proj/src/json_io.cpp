#include "alm/json_io.hpp"

#include "alm/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace alm::io {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ValidationError("field '" + path + "': " + what);
}

const json& field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing");
    return *it;
}

const json* optional_field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    const auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
}

double number(const json& j, const char* key, const std::string& path) {
    return number(field(j, key, path), path + "." + key);
}

bool boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
}

std::string string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

long integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<long>();
}

Vector vector(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Matrix matrix(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of rows");
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    if (rows > 0) {
        if (!j[0].is_array()) fail(path + "[0]", "expected an array of numbers");
        cols = j[0].size();
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        if (!j[r].is_array() || j[r].size() != cols) fail(rp, "expected " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                number(j[r][c], rp + "[" + std::to_string(c) + "]");
        }
    }
    return m;
}

// Bounds may use null for an open side.
Vector bound_vector(const json& j, double open, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j[i].is_null() ? open : number(j[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
}

json bound_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
    return out;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// Rethrows library validation errors with the field path prepended.
template <typename F>
auto at_path(const std::string& path, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        if (msg.rfind("field '", 0) == 0) throw;
        throw ValidationError("field '" + path + "': " + msg);
    }
}

BlockBounds block_from_json(const json& j, const std::string& path, BoundKind default_kind) {
    BlockBounds b;
    b.lower = number(j, "lower", path);
    b.upper = number(j, "upper", path);
    b.kind = default_kind;
    if (const json* k = optional_field(j, "kind", path)) {
        const std::string kind = string(*k, path + ".kind");
        if (kind == "relative") b.kind = BoundKind::relative;
        else if (kind == "absolute") b.kind = BoundKind::absolute;
        else fail(path + ".kind", "expected 'relative' or 'absolute'");
    }
    return b;
}

json to_json(const BlockBounds& b) {
    return {{"lower", b.lower}, {"upper", b.upper}, {"kind", b.kind == BoundKind::relative ? "relative" : "absolute"}};
}

}  // namespace

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < upto; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ValidationError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(column) +
                              ": malformed JSON: " + e.what());
    }
}

void check_schema(const json& doc, const std::string& where) {
    if (!doc.is_object()) throw ValidationError(where + ": top level must be a JSON object");
    const auto it = doc.find("schema");
    if (it == doc.end()) return;
    if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
        throw ValidationError("field 'schema': unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
    }
}

json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

json to_json(const GaussianModel& model) {
    return {{"mean", to_json(model.mean())}, {"cov", to_json(model.cov())}};
}

GaussianModel gaussian_from_json(const json& j, const std::string& path) {
    Vector mean = vector(field(j, "mean", path), path + ".mean");
    Matrix cov = matrix(field(j, "cov", path), path + ".cov");
    return at_path(path, [&] { return GaussianModel(std::move(mean), std::move(cov)); });
}

json to_json(const PriorSet& priors) {
    json models = json::array();
    for (const auto& m : priors.models()) models.push_back(to_json(m));
    return {{"schema", kSchemaVersion}, {"weights", to_json(priors.weights())}, {"models", std::move(models)}};
}

PriorSet prior_set_from_json(const json& j, const std::string& path) {
    const json& models_json = field(j, "models", path);
    if (!models_json.is_array()) fail(path + ".models", "expected an array of models");
    std::vector<GaussianModel> models;
    for (std::size_t i = 0; i < models_json.size(); ++i) {
        models.push_back(gaussian_from_json(models_json[i], path + ".models[" + std::to_string(i) + "]"));
    }
    if (const json* w = optional_field(j, "weights", path)) {
        Vector weights = vector(*w, path + ".weights");
        return at_path(path + ".weights", [&] { return PriorSet(std::move(models), std::move(weights)); });
    }
    return at_path(path, [&] { return PriorSet::equal_weights(std::move(models)); });
}

json to_json(const BarycenterResult& result) {
    return {{"schema", kSchemaVersion},
            {"model", to_json(result.model)},
            {"frechet_variance", result.frechet_variance},
            {"iterations", result.iterations},
            {"converged", result.converged},
            {"last_change", result.last_change}};
}

json to_json(const MarketParams& p) {
    return {{"rate",
             {{"r0", p.rate.r0}, {"R0", p.rate.long_run}, {"kappa", p.rate.kappa}, {"sigma_r", to_json(p.rate.sigma_r)}}},
            {"stocks", {{"s0", to_json(p.stocks.s0)}, {"mu", to_json(p.stocks.mu)}, {"sigma", to_json(p.stocks.sigma)}}},
            {"liability",
             {{"l0", p.liability.l0},
              {"alpha", p.liability.alpha},
              {"beta", to_json(p.liability.beta)},
              {"gamma", to_json(p.liability.gamma)}}},
            {"correlations", {{"rho_W", to_json(p.correlations.rho_w)}, {"rho_B", to_json(p.correlations.rho_b)}}},
            {"horizon_T", p.horizon},
            {"bond_s0", p.bond_s0},
            {"currency", p.currency}};
}

MarketParams market_from_json(const json& j, const std::string& path) {
    MarketParams p;
    const std::string rp = path + ".rate";
    const json& rate = field(j, "rate", path);
    p.rate.r0 = number(rate, "r0", rp);
    p.rate.long_run = number(rate, "R0", rp);
    p.rate.kappa = number(rate, "kappa", rp);
    p.rate.sigma_r = vector(field(rate, "sigma_r", rp), rp + ".sigma_r");

    const std::string sp = path + ".stocks";
    const json& stocks = field(j, "stocks", path);
    p.stocks.s0 = vector(field(stocks, "s0", sp), sp + ".s0");
    p.stocks.mu = vector(field(stocks, "mu", sp), sp + ".mu");
    p.stocks.sigma = matrix(field(stocks, "sigma", sp), sp + ".sigma");
    if (p.stocks.sigma.size() == 0) p.stocks.sigma.resize(p.stocks.mu.size(), p.stocks.mu.size());

    const std::string lp = path + ".liability";
    const json& liability = field(j, "liability", path);
    p.liability.l0 = number(liability, "l0", lp);
    p.liability.alpha = number(liability, "alpha", lp);
    p.liability.beta = vector(field(liability, "beta", lp), lp + ".beta");
    p.liability.gamma = vector(field(liability, "gamma", lp), lp + ".gamma");

    const Eigen::Index n = p.stocks.mu.size();
    const Eigen::Index m = p.liability.gamma.size();
    p.correlations.rho_w = Matrix::Identity(n, n);
    p.correlations.rho_b = Matrix::Identity(m, m);
    if (const json* corr = optional_field(j, "correlations", path)) {
        const std::string cp = path + ".correlations";
        if (const json* w = optional_field(*corr, "rho_W", cp)) p.correlations.rho_w = matrix(*w, cp + ".rho_W");
        if (const json* b = optional_field(*corr, "rho_B", cp)) p.correlations.rho_b = matrix(*b, cp + ".rho_B");
        if (p.correlations.rho_w.size() == 0) p.correlations.rho_w.resize(n, n);
        if (p.correlations.rho_b.size() == 0) p.correlations.rho_b.resize(m, m);
    }
    p.horizon = number(j, "horizon_T", path);
    if (const json* b = optional_field(j, "bond_s0", path)) p.bond_s0 = number(*b, path + ".bond_s0");
    if (const json* c = optional_field(j, "currency", path)) p.currency = string(*c, path + ".currency");

    try {
        p.validate();
    } catch (const ValidationError& e) {
        // MarketParams messages already name the field.
        throw ValidationError(path + ": " + e.what());
    }
    return p;
}

json to_json(const AssetLawConfig& c) {
    return {{"bond_mode", to_string(c.bond_mode)},
            {"normalize_to_gross_returns", c.normalize_to_gross_returns},
            {"ito_correction", c.ito_correction}};
}

AssetLawConfig asset_law_from_json(const json& j, const std::string& path) {
    AssetLawConfig c;
    if (const json* m = optional_field(j, "bond_mode", path)) {
        const std::string mode = string(*m, path + ".bond_mode");
        c.bond_mode = at_path(path + ".bond_mode", [&] { return bond_mode_from_string(mode); });
    }
    if (const json* v = optional_field(j, "normalize_to_gross_returns", path)) {
        c.normalize_to_gross_returns = boolean(*v, path + ".normalize_to_gross_returns");
    }
    if (const json* v = optional_field(j, "ito_correction", path)) c.ito_correction = boolean(*v, path + ".ito_correction");
    return c;
}

json to_json(const ProblemSpec& spec) {
    json out = {{"zeta", spec.zeta}, {"x0", spec.x0}};
    if (spec.theta_bounds) {
        out["theta_bounds"] = {{"lower", bound_json(spec.theta_bounds->lower)},
                               {"upper", bound_json(spec.theta_bounds->upper)}};
    }
    return out;
}

ProblemSpec problem_from_json(const json& j, const std::string& path) {
    ProblemSpec spec;
    spec.zeta = number(j, "zeta", path);
    spec.x0 = number(j, "x0", path);
    if (const json* b = optional_field(j, "theta_bounds", path)) {
        const std::string bp = path + ".theta_bounds";
        const double inf = std::numeric_limits<double>::infinity();
        BoxBounds box;
        box.lower = bound_vector(field(*b, "lower", bp), -inf, bp + ".lower");
        box.upper = bound_vector(field(*b, "upper", bp), inf, bp + ".upper");
        spec.theta_bounds = std::move(box);
    }
    return spec;
}

json to_json(const PortfolioSolution& s, const ProblemSpec& spec) {
    return {{"schema", kSchemaVersion},
            {"theta", to_json(s.theta)},
            {"theta_pct", to_json(Vector(s.theta * (100.0 / spec.x0)))},
            {"x0", spec.x0},
            {"zeta", spec.zeta},
            {"lambda", s.lambda},
            {"lambda_printed", finite_or_null(s.lambda_printed)},
            {"lambda_discrepancy", s.lambda_discrepancy},
            {"constraint_active", s.constraint_active},
            {"expected_surplus", s.expected_surplus},
            {"surplus_std", s.surplus_std},
            {"objective", s.objective},
            {"kkt_residual", s.kkt_residual},
            {"unconstrained_surplus", s.unconstrained_surplus},
            {"used_box_qp", s.used_box_qp}};
}

json to_json(const MomentBundle& m) {
    return {{"m_S", to_json(m.mean_s)},
            {"C_S", to_json(m.second_s)},
            {"C_SL", to_json(m.cross_sl)},
            {"m_L", m.mean_l},
            {"m_L2", m.second_moment_l},
            {"sample_count", m.sample_count}};
}

json to_json(const PerturbationSpec& spec) {
    return {{"preset", to_string(spec.preset)},
            {"rate", to_json(spec.rate)},
            {"stocks", to_json(spec.stocks)},
            {"liability", to_json(spec.liability)},
            {"correlation", to_json(spec.correlation)}};
}

PerturbationSpec perturbation_from_json(const json& j, const std::string& path) {
    Homogeneity preset = Homogeneity::custom;
    if (const json* p = optional_field(j, "preset", path)) {
        const std::string name = string(*p, path + ".preset");
        preset = at_path(path + ".preset", [&] { return homogeneity_from_string(name); });
    }
    PerturbationSpec spec;
    if (preset != Homogeneity::custom) {
        spec = PerturbationSpec::from_preset(preset);
    } else {
        spec.preset = Homogeneity::custom;
        spec.rate = block_from_json(field(j, "rate", path), path + ".rate", BoundKind::relative);
        spec.stocks = block_from_json(field(j, "stocks", path), path + ".stocks", BoundKind::relative);
        spec.liability = block_from_json(field(j, "liability", path), path + ".liability", BoundKind::relative);
        spec.correlation = block_from_json(field(j, "correlation", path), path + ".correlation", BoundKind::absolute);
    }
    at_path(path, [&] {
        spec.validate();
        return 0;
    });
    return spec;
}

json to_json(const ExperimentConfig& c) {
    json levels = json::array();
    for (auto h : c.homogeneity_levels) levels.push_back(to_string(h));
    return {{"schema", kSchemaVersion},
            {"true_params", to_json(c.true_params)},
            {"problem", to_json(c.problem)},
            {"perturbation", to_json(c.perturbation)},
            {"homogeneity_levels", std::move(levels)},
            {"prior_counts", c.prior_counts},
            {"replications", c.replications},
            {"mc_samples", c.mc_samples},
            {"rng_seed", c.rng_seed},
            {"weights_rule", "equal"},
            {"asset_law", to_json(c.asset_law)},
            {"barycenter", {{"tol", c.barycenter.tol}, {"max_iter", c.barycenter.max_iter}}}};
}

ExperimentConfig experiment_from_json(const json& j) {
    check_schema(j, "experiment config");
    const std::string path = "experiment";
    ExperimentConfig c;
    if (const json* t = optional_field(j, "true_params", path)) c.true_params = market_from_json(*t, "true_params");
    if (const json* p = optional_field(j, "problem", path)) c.problem = problem_from_json(*p, "problem");
    if (const json* p = optional_field(j, "perturbation", path)) c.perturbation = perturbation_from_json(*p, "perturbation");
    if (const json* l = optional_field(j, "homogeneity_levels", path)) {
        if (!l->is_array()) fail("homogeneity_levels", "expected an array of preset names");
        c.homogeneity_levels.clear();
        for (std::size_t i = 0; i < l->size(); ++i) {
            const std::string p = "homogeneity_levels[" + std::to_string(i) + "]";
            const std::string name = string((*l)[i], p);
            c.homogeneity_levels.push_back(at_path(p, [&] { return homogeneity_from_string(name); }));
        }
    }
    if (const json* n = optional_field(j, "prior_counts", path)) {
        if (!n->is_array()) fail("prior_counts", "expected an array of integers");
        c.prior_counts.clear();
        for (std::size_t i = 0; i < n->size(); ++i) {
            c.prior_counts.push_back(static_cast<int>(integer((*n)[i], "prior_counts[" + std::to_string(i) + "]")));
        }
    }
    if (const json* k = optional_field(j, "replications", path)) c.replications = static_cast<int>(integer(*k, "replications"));
    if (const json* m = optional_field(j, "mc_samples", path)) c.mc_samples = integer(*m, "mc_samples");
    if (const json* s = optional_field(j, "rng_seed", path)) {
        if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0)) {
            fail("rng_seed", "expected a non-negative integer");
        }
        c.rng_seed = s->get<std::uint64_t>();
    }
    if (const json* w = optional_field(j, "weights_rule", path)) {
        if (string(*w, "weights_rule") != "equal") fail("weights_rule", "only 'equal' is supported");
    }
    if (const json* a = optional_field(j, "asset_law", path)) c.asset_law = asset_law_from_json(*a, "asset_law");
    if (const json* b = optional_field(j, "barycenter", path)) {
        if (const json* t = optional_field(*b, "tol", "barycenter")) c.barycenter.tol = number(*t, "barycenter.tol");
        if (const json* m = optional_field(*b, "max_iter", "barycenter")) {
            c.barycenter.max_iter = static_cast<int>(integer(*m, "barycenter.max_iter"));
        }
    }
    at_path("experiment", [&] {
        c.validate();
        return 0;
    });
    return c;
}

json to_json(const CellSummary& s) {
    return {{"homogeneity", s.homogeneity},
            {"n_priors", s.n_priors},
            {"replications", s.replications},
            {"failures", s.failures}};
}

}  // namespace alm::io
