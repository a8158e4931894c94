#pragma once

#include "alm/barycenter.hpp"
#include "alm/market.hpp"
#include "alm/portfolio.hpp"
#include "alm/priors.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace alm {

enum class WeightsRule { equal };

struct ExperimentConfig {
    MarketParams true_params = reference_market();
    ProblemSpec problem{0.0, 1000000.0, std::nullopt};
    /// Bounds used for cells whose homogeneity is `custom`.
    PerturbationSpec perturbation = PerturbationSpec::from_preset(Homogeneity::high);
    std::vector<Homogeneity> homogeneity_levels{Homogeneity::high, Homogeneity::medium, Homogeneity::low};
    std::vector<int> prior_counts{1, 2, 3, 5, 10, 30};
    int replications = 200;    ///< K
    long mc_samples = 20000;   ///< M
    std::uint64_t rng_seed = 20240101;
    WeightsRule weights_rule = WeightsRule::equal;
    AssetLawConfig asset_law;
    BarycenterOptions barycenter;

    void validate() const;
    PerturbationSpec perturbation_for(Homogeneity level) const;
};

/// Quantities recorded for one replication.
struct ReplicationOutcome {
    bool ok = false;
    std::string error;
    Vector allocation_pct;
    double expected_surplus = 0.0;
    double surplus_std = 0.0;
    double variance_ratio = 0.0;
};

/// Exact solution under the true model; the reference for ratios and RMS errors.
struct TrueReference {
    Vector theta;
    double expected_surplus = 0.0;
    double surplus_std = 0.0;
    double surplus_variance = 0.0;
};

TrueReference true_reference(const ExperimentConfig& config);

struct CellSummary {
    std::string homogeneity;  ///< preset name, or "true" for the true-model row
    int n_priors = 0;         ///< 0 for the true-model row
    int replications = 0;     ///< successful replications
    int failures = 0;
    Vector mean_allocation_pct;
    double mean_expected_surplus = 0.0;
    double mean_surplus_std = 0.0;
    double se_expected_surplus = 0.0;  ///< sample std / sqrt(K)
    double se_surplus_std = 0.0;
    double rms_expected_surplus = 0.0;  ///< RMS deviation from the true-model value
    double rms_surplus_std = 0.0;
    double mean_variance_ratio = 0.0;
    std::pair<double, double> surplus_ci{0.0, 0.0};         ///< 2.5% / 97.5% percentiles
    std::pair<double, double> variance_ratio_ci{0.0, 0.0};  ///< 2.5% / 97.5% percentiles
};

struct RunOptions {
    int threads = 0;  ///< 0 = hardware concurrency
};

/// Aggregates replications in index order. Failed replications are excluded.
CellSummary summarize(const std::vector<ReplicationOutcome>& outcomes, std::string homogeneity, int n_priors,
                      const TrueReference& reference);

/**
 * K replications of: perturb N priors -> barycenter -> M-sample moments of the
 * barycenter -> closed-form portfolio -> surplus statistics under the
 * barycenter model. Seeds derive from (rng_seed, cell id, replica index).
 * Throws ExperimentError if more than 5% of the replications fail.
 */
CellSummary run_cell(const ExperimentConfig& config, int n_priors, Homogeneity level, const RunOptions& options = {});
CellSummary run_cell(const ExperimentConfig& config, int n_priors, Homogeneity level, const TrueReference& reference,
                     const RunOptions& options = {});

/// Same pipeline on the unperturbed model, without a barycenter step.
CellSummary run_true_model(const ExperimentConfig& config, const RunOptions& options = {});
CellSummary run_true_model(const ExperimentConfig& config, const TrueReference& reference,
                           const RunOptions& options = {});

/// Raw per-replication outcomes of a cell (for diagnostics and tests).
std::vector<ReplicationOutcome> run_cell_replications(const ExperimentConfig& config, int n_priors, Homogeneity level,
                                                      const TrueReference& reference, const RunOptions& options = {});

struct ExperimentReport {
    CellSummary true_model;
    std::vector<CellSummary> cells;
    double wall_seconds = 0.0;
};

/// Runs the true-model row and every (level, N) cell. `on_cell` is invoked
/// after each cell finishes, in deterministic order.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {},
                                const std::function<void(const CellSummary&)>& on_cell = {});

struct TableMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
};

/**
 * Writes `table2.csv` (allocations and surplus statistics, one row per
 * summary) and `table3.csv` (percentile intervals, one row per prior-set
 * cell, i.e. n_priors > 0). Both start with a `# config_hash=...,seed=...`
 * line followed by a column header. Numbers use shortest round-trip form.
 */
void emit_tables(const std::vector<CellSummary>& summaries, const std::filesystem::path& out_dir,
                 const TableMeta& meta);

/// Parses a table2.csv written by emit_tables (allocations, means, SEs, RMS).
std::vector<CellSummary> read_table2(const std::filesystem::path& path);
/// Parses a table3.csv written by emit_tables (intervals only).
std::vector<CellSummary> read_table3(const std::filesystem::path& path);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// 2.5%/97.5%-style percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double p);

struct SensitivityRow {
    BondMode bond_mode;
    bool ito_correction;
    double horizon;
    TrueReference exact;  ///< analytic moments
    CellSummary sampled;  ///< run_true_model with the configured K and M
};

/// Sweeps bond_mode x ito_correction x horizons for the true-model row.
std::vector<SensitivityRow> true_model_sensitivity(const ExperimentConfig& config, const std::vector<double>& horizons,
                                                   const RunOptions& options = {});

void write_sensitivity_report(const std::vector<SensitivityRow>& rows, const std::filesystem::path& path,
                              const Vector& target_allocation_pct, double target_surplus_std);

}  // namespace alm
