#pragma once

#include "stealsim/eval.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace stealsim {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

// Declarative experiment: one target/distribution/attack, a list of defenses,
// and grids of sample sizes and budgets; the run is the full factorial
// (defense x n x u x replicate).
struct ScenarioConfig {
  int schema_version = kConfigSchemaVersion;
  std::string id;
  TargetModel target = PolynomialModel{};
  QueryDistribution dist = BetaDist{1.0, 3.0};
  AttackSpec attack = NoAttack{};
  std::vector<DefenseSpec> defenses;
  std::vector<int> n_values;
  std::vector<double> u_values;
  int replicates = 1;
  int n_test = 1000;
  std::uint64_t seed = 0;
  std::string output_dir;  // empty = runs/<id>
};

ScenarioConfig parse_scenario_config(const std::string& text);
std::string serialize_config(const ScenarioConfig& config);
void validate_config(const ScenarioConfig& config);

// Built-in scenarios as (id, config text, one-line description).
struct BuiltinScenario {
  std::string id;
  std::string text;
  std::string description;
};
const std::vector<BuiltinScenario>& builtin_scenarios();

// Load a config from a file path, or from the built-in list when the argument
// names a built-in id and no such file exists.
ScenarioConfig load_scenario(const std::string& path_or_id);

struct RawRow {
  std::string scenario;
  std::string defense;
  int n = 0;
  double u = 0.0;
  int replicate = 0;
  ReplicateOutcome outcome;
};

struct SummaryRow {
  std::string scenario;
  std::string defense;
  int n = 0;
  double u = 0.0;
  int replicates = 0;
  int failed = 0;
  // NaN marks an inapplicable aggregate (e.g. privacy without an attack).
  double privacy_mean = std::numeric_limits<double>::quiet_NaN();
  double privacy_se = std::numeric_limits<double>::quiet_NaN();
  double utility_mean = std::numeric_limits<double>::quiet_NaN();
  double utility_se = std::numeric_limits<double>::quiet_NaN();
  double symdiff_mean = std::numeric_limits<double>::quiet_NaN();
  double symdiff_se = std::numeric_limits<double>::quiet_NaN();
};

struct ScenarioResult {
  ScenarioConfig config;
  std::vector<RawRow> raw;        // deterministic (defense, n, u, replicate) order
  std::vector<SummaryRow> summary;
};

ScenarioResult run_scenario(const ScenarioConfig& config, int jobs = 1);

std::string write_raw_csv(const std::vector<RawRow>& rows);
std::vector<RawRow> parse_raw_csv(const std::string& text);
std::string write_summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> parse_summary_csv(const std::string& text);

// Writes raw.csv, summary.csv, and the manifest into dir (created if needed);
// returns the directory used.
std::string write_run_outputs(const ScenarioResult& result, const std::string& dir);

// Figure ids: privacy_vs_n, privacy_vs_u, symdiff_vs_u. Produces (x, defense,
// mean, se) rows; throws config_error when required cells are absent, listing
// the missing (defense, x) pairs.
std::string export_figure_data(const std::vector<SummaryRow>& summary,
                               const std::string& figure_id);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace stealsim
