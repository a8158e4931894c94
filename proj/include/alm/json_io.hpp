#pragma once

#include "alm/barycenter.hpp"
#include "alm/experiment.hpp"
#include "alm/market.hpp"
#include "alm/portfolio.hpp"
#include "alm/priors.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace alm::io {

using nlohmann::json;

/// Current value of the top-level "schema" field.
inline constexpr int kSchemaVersion = 1;

/// Reads and parses a JSON file. Syntax errors raise ValidationError with
/// the line and column; an unreadable file raises IoError.
json load_json(const std::filesystem::path& path);

/// Rejects documents whose "schema" field is present and not kSchemaVersion.
void check_schema(const json& doc, const std::string& where);

// Each reader validates the full object and reports the offending field path
// ("models[2].cov", "rate.kappa", ...) in the ValidationError message.

json to_json(const Vector& v);
json to_json(const Matrix& m);

json to_json(const GaussianModel& model);
GaussianModel gaussian_from_json(const json& j, const std::string& path = "model");

json to_json(const PriorSet& priors);
PriorSet prior_set_from_json(const json& j, const std::string& path = "priors");

json to_json(const BarycenterResult& result);

json to_json(const MarketParams& params);
MarketParams market_from_json(const json& j, const std::string& path = "market");

json to_json(const AssetLawConfig& config);
AssetLawConfig asset_law_from_json(const json& j, const std::string& path = "asset_law");

json to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const json& j, const std::string& path = "problem");

/// Includes theta in currency and as percent of x0.
json to_json(const PortfolioSolution& solution, const ProblemSpec& spec);

json to_json(const MomentBundle& moments);

json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const json& j, const std::string& path = "perturbation");

json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const json& j);

json to_json(const CellSummary& summary);

}  // namespace alm::io
