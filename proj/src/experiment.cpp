#include "alm/experiment.hpp"

#include "alm/errors.hpp"
#include "alm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace alm {

namespace {

constexpr double kMaxFailureFraction = 0.05;

std::uint64_t cell_id(Homogeneity level, int n_priors) {
    return (static_cast<std::uint64_t>(level) + 1) << 32 | static_cast<std::uint32_t>(n_priors);
}

int resolve_threads(const RunOptions& options) {
    if (options.threads > 0) return options.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, count) on up to `threads` workers. Work is claimed
// dynamically, results must be written by index.
void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

std::string fmt(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw IoError("cannot parse number '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        rows.push_back(split(line));
    }
    return rows;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::string asset_name(Eigen::Index i) { return i == 0 ? "bond" : "stock_" + std::to_string(i); }

}  // namespace

void ExperimentConfig::validate() const {
    true_params.validate();
    problem.validate(true_params.n() + 1);
    perturbation.validate();
    if (replications < 1) throw ValidationError("ExperimentConfig.replications must be >= 1");
    if (mc_samples < 1000) throw ValidationError("ExperimentConfig.mc_samples must be >= 1000");
    if (prior_counts.empty()) throw ValidationError("ExperimentConfig.prior_counts must not be empty");
    for (int n : prior_counts)
        if (n < 1) throw ValidationError("ExperimentConfig.prior_counts entries must be >= 1");
    if (homogeneity_levels.empty()) throw ValidationError("ExperimentConfig.homogeneity_levels must not be empty");
}

PerturbationSpec ExperimentConfig::perturbation_for(Homogeneity level) const {
    if (level == Homogeneity::custom) return perturbation;
    return PerturbationSpec::from_preset(level);
}

TrueReference true_reference(const ExperimentConfig& config) {
    const GaussianModel law = build_asset_law(config.true_params, config.asset_law);
    const MomentBundle exact = moments_analytic(law);
    const PortfolioSolution sol = solve_portfolio(exact, config.problem);
    TrueReference ref;
    ref.theta = sol.theta;
    ref.expected_surplus = sol.expected_surplus;
    ref.surplus_std = sol.surplus_std;
    ref.surplus_variance = sol.surplus_std * sol.surplus_std;
    return ref;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CellSummary summarize(const std::vector<ReplicationOutcome>& outcomes, std::string homogeneity, int n_priors,
                      const TrueReference& reference) {
    CellSummary s;
    s.homogeneity = std::move(homogeneity);
    s.n_priors = n_priors;
    std::vector<double> surplus;
    std::vector<double> stds;
    std::vector<double> ratios;
    Vector alloc_sum;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++s.failures;
            continue;
        }
        if (alloc_sum.size() == 0) alloc_sum = Vector::Zero(o.allocation_pct.size());
        alloc_sum += o.allocation_pct;
        surplus.push_back(o.expected_surplus);
        stds.push_back(o.surplus_std);
        ratios.push_back(o.variance_ratio);
    }
    s.replications = static_cast<int>(surplus.size());
    if (s.replications == 0) return s;

    const double k = static_cast<double>(s.replications);
    auto mean_of = [&](const std::vector<double>& v) {
        double total = 0.0;
        for (double x : v) total += x;
        return total / k;
    };
    auto se_of = [&](const std::vector<double>& v, double mean) {
        if (v.size() < 2) return 0.0;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
    };
    auto rms_of = [&](const std::vector<double>& v, double target) {
        double ss = 0.0;
        for (double x : v) ss += (x - target) * (x - target);
        return std::sqrt(ss / k);
    };

    s.mean_allocation_pct = alloc_sum / k;
    s.mean_expected_surplus = mean_of(surplus);
    s.mean_surplus_std = mean_of(stds);
    s.se_expected_surplus = se_of(surplus, s.mean_expected_surplus);
    s.se_surplus_std = se_of(stds, s.mean_surplus_std);
    s.rms_expected_surplus = rms_of(surplus, reference.expected_surplus);
    s.rms_surplus_std = rms_of(stds, reference.surplus_std);
    s.mean_variance_ratio = mean_of(ratios);
    s.surplus_ci = {percentile(surplus, 0.025), percentile(surplus, 0.975)};
    s.variance_ratio_ci = {percentile(ratios, 0.025), percentile(ratios, 0.975)};
    return s;
}

namespace {

ReplicationOutcome evaluate_replication(const GaussianModel& discount_model, const ExperimentConfig& config,
                                        const TrueReference& reference, std::uint64_t moment_seed) {
    ReplicationOutcome o;
    const MomentBundle sampled = moments_mc(discount_model, config.mc_samples, moment_seed);
    const PortfolioSolution sol = solve_portfolio(sampled, config.problem);
    const MomentBundle exact = moments_analytic(discount_model);
    const SurplusStats stats = evaluate_portfolio(sol.theta, exact, config.problem);
    o.allocation_pct = sol.theta * (100.0 / config.problem.x0);
    o.expected_surplus = stats.expected_surplus;
    o.surplus_std = stats.surplus_std;
    o.variance_ratio = stats.surplus_std * stats.surplus_std / reference.surplus_variance;
    o.ok = std::isfinite(o.expected_surplus) && std::isfinite(o.surplus_std) && o.allocation_pct.allFinite();
    if (!o.ok) o.error = "non-finite replication output";
    return o;
}

void enforce_failure_policy(const CellSummary& s, int total) {
    if (static_cast<double>(s.failures) > kMaxFailureFraction * static_cast<double>(total)) {
        throw ExperimentError("cell (" + s.homogeneity + ", N=" + std::to_string(s.n_priors) + "): " +
                              std::to_string(s.failures) + " of " + std::to_string(total) +
                              " replications failed");
    }
}

}  // namespace

std::vector<ReplicationOutcome> run_cell_replications(const ExperimentConfig& config, int n_priors, Homogeneity level,
                                                      const TrueReference& reference, const RunOptions& options) {
    config.validate();
    if (n_priors < 1) throw ValidationError("run_cell: n_priors must be >= 1");
    const PerturbationSpec spec = config.perturbation_for(level);
    const std::uint64_t cell = cell_id(level, n_priors);
    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(config.replications));

    parallel_for(config.replications, resolve_threads(options), [&](int rep) {
        const std::uint64_t seed = derive_seed(config.rng_seed, {cell, static_cast<std::uint64_t>(rep)});
        ReplicationOutcome& out = outcomes[static_cast<std::size_t>(rep)];
        try {
            const auto params = perturb(config.true_params, spec, n_priors, derive_seed(seed, {stream::kPerturb}));
            const PriorSet priors = to_prior_set(params, std::nullopt, config.asset_law);
            const BarycenterResult bary = barycenter(priors, config.barycenter);
            if (!bary.converged) {
                out.error = "barycenter did not converge";
                return;
            }
            out = evaluate_replication(bary.model, config, reference, derive_seed(seed, {stream::kMoments}));
        } catch (const Error& e) {
            out = ReplicationOutcome{};
            out.error = e.what();
        }
    });
    return outcomes;
}

CellSummary run_cell(const ExperimentConfig& config, int n_priors, Homogeneity level, const TrueReference& reference,
                     const RunOptions& options) {
    const auto outcomes = run_cell_replications(config, n_priors, level, reference, options);
    CellSummary s = summarize(outcomes, to_string(level), n_priors, reference);
    enforce_failure_policy(s, config.replications);
    return s;
}

CellSummary run_cell(const ExperimentConfig& config, int n_priors, Homogeneity level, const RunOptions& options) {
    config.validate();
    return run_cell(config, n_priors, level, true_reference(config), options);
}

CellSummary run_true_model(const ExperimentConfig& config, const TrueReference& reference, const RunOptions& options) {
    config.validate();
    const GaussianModel law = build_asset_law(config.true_params, config.asset_law);
    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(config.replications));
    parallel_for(config.replications, resolve_threads(options), [&](int rep) {
        const std::uint64_t seed =
            derive_seed(config.rng_seed, {stream::kTrueModel, static_cast<std::uint64_t>(rep)});
        ReplicationOutcome& out = outcomes[static_cast<std::size_t>(rep)];
        try {
            out = evaluate_replication(law, config, reference, derive_seed(seed, {stream::kMoments}));
        } catch (const Error& e) {
            out = ReplicationOutcome{};
            out.error = e.what();
        }
    });
    CellSummary s = summarize(outcomes, "true", 0, reference);
    enforce_failure_policy(s, config.replications);
    return s;
}

CellSummary run_true_model(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    return run_true_model(config, true_reference(config), options);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options,
                                const std::function<void(const CellSummary&)>& on_cell) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    const TrueReference reference = true_reference(config);
    ExperimentReport report;
    report.true_model = run_true_model(config, reference, options);
    if (on_cell) on_cell(report.true_model);
    for (Homogeneity level : config.homogeneity_levels) {
        for (int n : config.prior_counts) {
            report.cells.push_back(run_cell(config, n, level, reference, options));
            if (on_cell) on_cell(report.cells.back());
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void emit_tables(const std::vector<CellSummary>& summaries, const std::filesystem::path& out_dir,
                 const TableMeta& meta) {
    if (summaries.empty()) throw ValidationError("emit_tables: no summaries");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    const Eigen::Index assets = summaries.front().mean_allocation_pct.size();
    const std::string banner = "# config_hash=" + meta.config_hash + ",seed=" + std::to_string(meta.seed) + "\n";

    {
        auto out = open_for_write(out_dir / "table2.csv");
        out << banner << "homogeneity,n_priors,replications,failures";
        for (Eigen::Index i = 0; i < assets; ++i) out << ",alloc_pct_" << asset_name(i);
        out << ",mean_expected_surplus,se_expected_surplus,rms_expected_surplus"
               ",mean_surplus_std,se_surplus_std,rms_surplus_std\n";
        for (const auto& s : summaries) {
            out << s.homogeneity << ',' << s.n_priors << ',' << s.replications << ',' << s.failures;
            for (Eigen::Index i = 0; i < assets; ++i) {
                out << ',' << (i < s.mean_allocation_pct.size() ? fmt(s.mean_allocation_pct(i)) : "nan");
            }
            out << ',' << fmt(s.mean_expected_surplus) << ',' << fmt(s.se_expected_surplus) << ','
                << fmt(s.rms_expected_surplus) << ',' << fmt(s.mean_surplus_std) << ',' << fmt(s.se_surplus_std)
                << ',' << fmt(s.rms_surplus_std) << '\n';
        }
        if (!out) throw IoError("failed writing table2.csv");
    }
    {
        auto out = open_for_write(out_dir / "table3.csv");
        out << banner
            << "homogeneity,n_priors,surplus_p2_5,surplus_p97_5,variance_ratio_p2_5,variance_ratio_p97_5\n";
        for (const auto& s : summaries) {
            if (s.n_priors == 0) continue;
            out << s.homogeneity << ',' << s.n_priors << ',' << fmt(s.surplus_ci.first) << ','
                << fmt(s.surplus_ci.second) << ',' << fmt(s.variance_ratio_ci.first) << ','
                << fmt(s.variance_ratio_ci.second) << '\n';
        }
        if (!out) throw IoError("failed writing table3.csv");
    }
}

std::vector<CellSummary> read_table2(const std::filesystem::path& path) {
    std::vector<CellSummary> out;
    for (const auto& row : read_rows(path)) {
        if (row.size() < 10) throw IoError("table2.csv: short row");
        CellSummary s;
        s.homogeneity = row[0];
        s.n_priors = std::stoi(row[1]);
        s.replications = std::stoi(row[2]);
        s.failures = std::stoi(row[3]);
        const std::size_t assets = row.size() - 10;
        s.mean_allocation_pct.resize(static_cast<Eigen::Index>(assets));
        for (std::size_t i = 0; i < assets; ++i) s.mean_allocation_pct(static_cast<Eigen::Index>(i)) = parse_double(row[4 + i]);
        std::size_t c = 4 + assets;
        s.mean_expected_surplus = parse_double(row[c++]);
        s.se_expected_surplus = parse_double(row[c++]);
        s.rms_expected_surplus = parse_double(row[c++]);
        s.mean_surplus_std = parse_double(row[c++]);
        s.se_surplus_std = parse_double(row[c++]);
        s.rms_surplus_std = parse_double(row[c++]);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<CellSummary> read_table3(const std::filesystem::path& path) {
    std::vector<CellSummary> out;
    for (const auto& row : read_rows(path)) {
        if (row.size() != 6) throw IoError("table3.csv: expected 6 columns");
        CellSummary s;
        s.homogeneity = row[0];
        s.n_priors = std::stoi(row[1]);
        s.surplus_ci = {parse_double(row[2]), parse_double(row[3])};
        s.variance_ratio_ci = {parse_double(row[4]), parse_double(row[5])};
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SensitivityRow> true_model_sensitivity(const ExperimentConfig& config, const std::vector<double>& horizons,
                                                   const RunOptions& options) {
    std::vector<SensitivityRow> rows;
    for (BondMode mode : {BondMode::integrated_ou_exact, BondMode::short_rate_proxy}) {
        for (bool ito : {false, true}) {
            for (double t : horizons) {
                ExperimentConfig c = config;
                c.asset_law.bond_mode = mode;
                c.asset_law.ito_correction = ito;
                c.true_params.horizon = t;
                SensitivityRow row{mode, ito, t, {}, {}};
                row.exact = true_reference(c);
                row.sampled = run_true_model(c, row.exact, options);
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

void write_sensitivity_report(const std::vector<SensitivityRow>& rows, const std::filesystem::path& path,
                              const Vector& target_allocation_pct, double target_surplus_std) {
    auto out = open_for_write(path);
    out << "# True-model sensitivity sweep\n\n"
        << "Target allocation (% of x0):";
    for (Eigen::Index i = 0; i < target_allocation_pct.size(); ++i) out << ' ' << fmt(target_allocation_pct(i));
    out << "; target surplus std: " << fmt(target_surplus_std) << "\n"
        << "Hit = every allocation within 2 pp and surplus std within 3% (exact, sampled, both or no).\n\n"
        << "| bond_mode | ito | T | exact allocation % | exact std | sampled allocation % | sampled std | hit |\n"
        << "|---|---|---|---|---|---|---|---|\n";
    auto alloc = [](const Vector& pct) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(2);
        for (Eigen::Index i = 0; i < pct.size(); ++i) s << (i ? ", " : "") << pct(i);
        return s.str();
    };
    for (const auto& r : rows) {
        const Vector exact_pct = r.exact.theta * (100.0 / r.exact.theta.sum());
        const Vector& sampled_pct = r.sampled.mean_allocation_pct;
        auto reaches = [&](const Vector& pct, double std) {
            return pct.size() == target_allocation_pct.size() &&
                   (pct - target_allocation_pct).cwiseAbs().maxCoeff() <= 2.0 &&
                   std::abs(std - target_surplus_std) <= 0.03 * target_surplus_std;
        };
        const bool exact_hit = reaches(exact_pct, r.exact.surplus_std);
        const bool sampled_hit = reaches(sampled_pct, r.sampled.mean_surplus_std);
        out << "| " << to_string(r.bond_mode) << " | " << (r.ito_correction ? "yes" : "no") << " | " << fmt(r.horizon)
            << " | " << alloc(exact_pct) << " | " << fmt(std::round(r.exact.surplus_std * 100) / 100) << " | "
            << alloc(sampled_pct) << " | " << fmt(std::round(r.sampled.mean_surplus_std * 100) / 100) << " | "
            << (exact_hit ? (sampled_hit ? "both" : "exact") : (sampled_hit ? "sampled" : "no")) << " |\n";
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace alm
