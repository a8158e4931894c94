#include "cli_app.hpp"

#include "alm/errors.hpp"
#include "alm/experiment.hpp"
#include "alm/json_io.hpp"
#include "alm/rng.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace alm::cli {

namespace {

using io::json;

constexpr std::uint64_t kDefaultSeed = 20240101;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("--config", c.config, "input JSON file")->check(CLI::ExistingFile);
    if (config_required) opt->required();
    cmd->add_option("--out", c.out, "output path");
    cmd->add_option("--seed", c.seed, "RNG seed (falls back to ALM_SEED)");
    cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--verbose", c.verbose, "progress on stderr");
}

std::optional<std::uint64_t> resolve_seed(const Common& c) {
    if (c.seed) return c.seed;
    if (const char* env = std::getenv("ALM_SEED"); env != nullptr && *env != '\0') {
        std::uint64_t v = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto res = std::from_chars(env, end, v);
        if (res.ec != std::errc() || res.ptr != end) throw ValidationError("ALM_SEED is not an unsigned integer");
        return v;
    }
    return std::nullopt;
}

void write_json(const json& doc, const std::string& out_path, std::ostream& out) {
    if (out_path.empty() || out_path == "-") {
        out << doc.dump(2) << "\n";
        return;
    }
    const std::filesystem::path p(out_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << doc.dump(2) << "\n";
    if (!f) throw IoError("cannot write " + out_path);
}

BarycenterOptions barycenter_options(const json& doc) {
    BarycenterOptions opts;
    const auto it = doc.find("barycenter");
    if (it == doc.end()) return opts;
    if (!it->is_object()) throw ValidationError("field 'barycenter': expected an object");
    if (auto t = it->find("tol"); t != it->end()) {
        if (!t->is_number() || t->get<double>() <= 0) throw ValidationError("field 'barycenter.tol': must be > 0");
        opts.tol = t->get<double>();
    }
    if (auto m = it->find("max_iter"); m != it->end()) {
        if (!m->is_number_integer() || m->get<int>() < 1) {
            throw ValidationError("field 'barycenter.max_iter': must be an integer >= 1");
        }
        opts.max_iter = m->get<int>();
    }
    return opts;
}

const json& priors_node(const json& doc) {
    const auto it = doc.find("priors");
    return it != doc.end() ? *it : doc;
}

int cmd_barycenter(const Common& c, std::ostream& out, std::ostream& err) {
    const json doc = io::load_json(c.config);
    io::check_schema(doc, c.config);
    const PriorSet priors = io::prior_set_from_json(priors_node(doc));
    const BarycenterResult result = barycenter(priors, barycenter_options(doc));
    write_json(io::to_json(result), c.out, out);
    if (c.verbose) {
        err << "barycenter: " << result.iterations << " iterations, last change " << result.last_change
            << ", Frechet variance " << result.frechet_variance << "\n";
    }
    if (!result.converged) {
        err << "barycenter did not converge after " << result.iterations << " iterations (last change "
            << result.last_change << "); best iterate written\n";
        return kNotConverged;
    }
    return kOk;
}

struct OptimizeInput {
    GaussianModel model;
    std::optional<BarycenterResult> bary;
    ProblemSpec problem;
    std::string moments = "analytic";
    long mc_samples = 20000;
    std::uint64_t seed = kDefaultSeed;
};

OptimizeInput parse_optimize(const json& doc, std::optional<std::uint64_t> seed_override) {
    if (!doc.is_object()) throw ValidationError("optimize config: top level must be a JSON object");
    const auto has = [&](const char* k) { return doc.contains(k); };
    if (!has("problem")) throw ValidationError("field 'problem': missing");
    ProblemSpec problem = io::problem_from_json(doc.at("problem"));
    AssetLawConfig law;
    if (has("asset_law")) law = io::asset_law_from_json(doc.at("asset_law"));

    std::optional<BarycenterResult> bary;
    std::optional<GaussianModel> model;
    if (has("market") == has("priors")) throw ValidationError("optimize config: give exactly one of 'market' or 'priors'");
    if (has("market")) {
        model = build_asset_law(io::market_from_json(doc.at("market")), law);
    } else {
        bary = barycenter(io::prior_set_from_json(doc.at("priors")), barycenter_options(doc));
        model = bary->model;
    }
    OptimizeInput in{*model, bary, problem};
    if (auto m = doc.find("moments"); m != doc.end()) {
        if (!m->is_string() || (*m != "analytic" && *m != "mc")) {
            throw ValidationError("field 'moments': expected \"analytic\" or \"mc\"");
        }
        in.moments = m->get<std::string>();
    }
    if (auto s = doc.find("mc_samples"); s != doc.end()) {
        if (!s->is_number_integer() || s->get<long>() < 1000) throw ValidationError("field 'mc_samples': must be >= 1000");
        in.mc_samples = s->get<long>();
    }
    if (auto s = doc.find("rng_seed"); s != doc.end()) {
        if (!s->is_number_unsigned()) throw ValidationError("field 'rng_seed': expected a non-negative integer");
        in.seed = s->get<std::uint64_t>();
    }
    if (seed_override) in.seed = *seed_override;
    in.problem.validate(in.model.dim() - 1);
    return in;
}

int cmd_optimize(const Common& c, std::ostream& out, std::ostream& err) {
    const json doc = io::load_json(c.config);
    io::check_schema(doc, c.config);
    const OptimizeInput in = parse_optimize(doc, resolve_seed(c));
    const MomentBundle moments =
        in.moments == "mc" ? moments_mc(in.model, in.mc_samples, derive_seed(in.seed, {stream::kMoments})) : moments_analytic(in.model);

    json report;
    try {
        const PortfolioSolution sol = solve_portfolio(moments, in.problem);
        report = io::to_json(sol, in.problem);
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << " (unconstrained optimum surplus " << e.unconstrained_surplus() << ")\n";
        report = {{"schema", io::kSchemaVersion},
                  {"error", "infeasible"},
                  {"message", e.what()},
                  {"unconstrained_surplus", e.unconstrained_surplus()}};
        write_json(report, c.out, out);
        return kInfeasible;
    }
    report["moments"] = {{"method", in.moments}, {"sample_count", moments.sample_count}};
    if (in.moments == "mc") report["moments"]["rng_seed"] = in.seed;
    if (in.bary) {
        report["barycenter"] = io::to_json(*in.bary);
        report["barycenter"].erase("schema");
    }
    write_json(report, c.out, out);
    if (c.verbose) {
        err << "optimize: expected surplus " << report["expected_surplus"].get<double>() << ", KKT residual "
            << report["kkt_residual"].get<double>() << "\n";
    }
    if (in.bary && !in.bary->converged) {
        err << "barycenter did not converge after " << in.bary->iterations << " iterations; best iterate used\n";
        return kNotConverged;
    }
    return kOk;
}

int cmd_experiment(const Common& c, std::ostream& out, std::ostream& err) {
    const json doc = io::load_json(c.config);
    ExperimentConfig config = io::experiment_from_json(doc);
    if (auto s = resolve_seed(c)) config.rng_seed = *s;
    const std::filesystem::path out_dir = c.out.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out);

    const TableMeta meta{fnv1a_hex(io::to_json(config).dump()), config.rng_seed};
    RunOptions options;
    options.threads = c.threads;
    const std::size_t total = config.homogeneity_levels.size() * config.prior_counts.size() + 1;
    std::size_t done = 0;
    const auto progress = [&](const CellSummary& s) {
        ++done;
        err << "[" << done << "/" << total << "] " << s.homogeneity << " N=" << s.n_priors << ": " << s.replications
            << " ok, " << s.failures << " failed\n";
    };

    ExperimentReport report;
    try {
        report = run_experiment(config, options, progress);
    } catch (const ExperimentError& e) {
        err << "experiment failed: " << e.what() << "\n";
        return kExperimentFailed;
    }

    std::vector<CellSummary> rows{report.true_model};
    rows.insert(rows.end(), report.cells.begin(), report.cells.end());
    emit_tables(rows, out_dir, meta);

    json failures = json::array();
    for (const auto& s : rows) {
        failures.push_back({{"homogeneity", s.homogeneity}, {"n_priors", s.n_priors}, {"failures", s.failures}});
    }
    const json run_meta = {{"schema", io::kSchemaVersion},
                           {"seed", config.rng_seed},
                           {"config_hash", meta.config_hash},
                           {"failures", std::move(failures)},
                           {"wall_seconds", report.wall_seconds},
                           {"threads", c.threads},
                           {"config", io::to_json(config)}};
    write_json(run_meta, (out_dir / "run_meta.json").string(), out);
    if (c.verbose) out << "wrote " << out_dir.string() << "/{table2.csv,table3.csv,run_meta.json}\n";
    return kOk;
}

const char* kSchemaText = R"({
  "schema": 1,
  "documents": {
    "prior_set": {
      "weights": "number[N], optional, defaults to 1/N",
      "models": "[{mean: number[d], cov: number[d][d]}]",
      "barycenter": "{tol: number, max_iter: integer}, optional"
    },
    "market": {
      "rate": {"r0": "number", "R0": "number", "kappa": "number > 0", "sigma_r": "number[n]"},
      "stocks": {"s0": "number[n] > 0", "mu": "number[n]", "sigma": "number[n][n]"},
      "liability": {"l0": "number", "alpha": "number", "beta": "number[n]", "gamma": "number[m]"},
      "correlations": "{rho_W: number[n][n], rho_B: number[m][m]}, optional, identity",
      "horizon_T": "number > 0",
      "bond_s0": "number > 0, optional",
      "currency": "string, optional"
    },
    "optimize": {
      "market": "market, or give priors",
      "priors": "prior_set, or give market",
      "problem": {"zeta": "number", "x0": "number", "theta_bounds": "{lower, upper}, optional, null = open side"},
      "asset_law": "{bond_mode, normalize_to_gross_returns, ito_correction}, optional",
      "moments": "analytic | mc",
      "mc_samples": "integer >= 1000, optional",
      "rng_seed": "integer, optional"
    },
    "experiment": {
      "true_params": "market, optional",
      "problem": "problem, optional",
      "perturbation": "{preset} or {preset: custom, rate, stocks, liability, correlation}",
      "homogeneity_levels": "[high | medium | low | custom]",
      "prior_counts": "integer[]",
      "replications": "integer >= 1",
      "mc_samples": "integer >= 1000",
      "rng_seed": "integer",
      "weights_rule": "equal",
      "asset_law": "optional",
      "barycenter": "optional"
    }
  }
})";

std::string detect_kind(const json& doc) {
    if (!doc.is_object()) throw ValidationError("top level must be a JSON object");
    if (auto k = doc.find("kind"); k != doc.end() && k->is_string()) return k->get<std::string>();
    if (doc.contains("problem") && (doc.contains("market") || doc.contains("priors"))) return "optimize";
    if (doc.contains("models")) return "prior_set";
    if (doc.contains("rate") && doc.contains("stocks")) return "market";
    return "experiment";
}

int cmd_validate(const Common& c, bool schema, std::ostream& out, std::ostream& err) {
    if (schema) {
        out << kSchemaText << "\n";
        if (c.config.empty()) return kOk;
    }
    if (c.config.empty()) {
        err << "validate: --config is required unless --schema is given\n";
        return kParseError;
    }
    const json doc = io::load_json(c.config);
    io::check_schema(doc, c.config);
    const std::string kind = detect_kind(doc);
    if (kind == "prior_set") {
        io::prior_set_from_json(priors_node(doc));
        barycenter_options(doc);
    } else if (kind == "market") {
        io::market_from_json(doc);
    } else if (kind == "optimize") {
        const json& p = doc.at("problem");
        io::problem_from_json(p);
        if (doc.contains("market")) {
            const MarketParams m = io::market_from_json(doc.at("market"));
            io::problem_from_json(p).validate(m.n() + 1);
        } else {
            const PriorSet priors = io::prior_set_from_json(doc.at("priors"));
            io::problem_from_json(p).validate(priors.dim() - 1);
        }
        if (doc.contains("asset_law")) io::asset_law_from_json(doc.at("asset_law"));
    } else if (kind == "experiment") {
        const ExperimentConfig config = io::experiment_from_json(doc);
        build_asset_law(config.true_params, config.asset_law);
    } else {
        throw ValidationError("field 'kind': unknown document kind '" + kind + "'");
    }
    out << "ok: " << kind << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust asset-liability portfolios from Wasserstein barycenters of prior models"};
    app.require_subcommand(1);
    Common common;
    bool schema = false;

    auto* bary = app.add_subcommand("barycenter", "barycenter of a prior set");
    add_common(bary, common, true);
    auto* opt = app.add_subcommand("optimize", "optimal portfolio for a market or prior set");
    add_common(opt, common, true);
    auto* exp = app.add_subcommand("experiment", "simulation study tables");
    add_common(exp, common, true);
    auto* val = app.add_subcommand("validate", "check a config file");
    add_common(val, common, false);
    val->add_flag("--schema", schema, "print the config schema");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kParseError;
    }

    try {
        if (bary->parsed()) return cmd_barycenter(common, out, err);
        if (opt->parsed()) return cmd_optimize(common, out, err);
        if (exp->parsed()) return cmd_experiment(common, out, err);
        return cmd_validate(common, schema, out, err);
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << "\n";
        return kParseError;
    } catch (const ModelError& e) {
        err << "invalid model: " << e.what() << "\n";
        return kParseError;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return kParseError;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << " (unconstrained optimum surplus " << e.unconstrained_surplus() << ")\n";
        return kInfeasible;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNotConverged;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << "\n";
        return kNotConverged;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "io error: " << e.what() << "\n";
        return kParseError;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace alm::cli
