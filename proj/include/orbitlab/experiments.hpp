#pragma once

#include "orbitlab/dynamics.hpp"
#include "orbitlab/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace orbitlab::expcli {

using nlohmann::json;

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  /// Overrides of the experiment's dynamics defaults (DynamicsConfig field names).
  json dynamics = json::object();
  /// Overrides of the model defaults for the experiment's model kind.
  json model_params = json::object();
  /// Experiment-specific knobs (chain count, histogram bins, recording cadence).
  json options = json::object();
  std::filesystem::path output_dir;
  bool emit_samples = false;

  /// Strict parse: unknown keys and wrongly typed values are errors.
  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  json to_json() const;
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::string model_kind;
  /// Variants run side by side; the first is the primary model.
  std::vector<std::string> variants;
  ExperimentConfig defaults;
};

const std::vector<ExperimentInfo>& list_experiments();
const ExperimentInfo& find_experiment(const std::string& name);

/// Defaults for the experiment overlaid with `config`; validates every section.
struct ResolvedConfig {
  ExperimentConfig config;
  dynamics::DynamicsConfig dynamics;
  json model_params;
  json options;
};
ResolvedConfig resolve(const ExperimentConfig& config);

dynamics::DynamicsConfig dynamics_from_json(const json& j, dynamics::DynamicsConfig base = {});
json dynamics_to_json(const dynamics::DynamicsConfig& c);

struct Comparison {
  std::string metric;
  std::string relation;  // "<", "<=", ">", ">=", "==", "within"
  double target = 0.0;
  double tolerance = 0.0;  // half-width for "within"
  double value = 0.0;
  bool passed = false;
  std::string provenance;  // "oracle:...", "baseline:...", "threshold"
};

/// Evaluates `value relation target`, scaling the bound by tol_scale
/// (upper bounds and half-widths multiply, lower bounds divide).
Comparison compare(const std::string& metric, double value, const std::string& relation, double target,
                   double tolerance, std::string provenance, double tol_scale = 1.0);

/// Time series with named columns; first column is the step index.
struct SeriesTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(const std::filesystem::path& path) const;
  static SeriesTable read_csv(const std::filesystem::path& path);
};

struct RunReport {
  std::string experiment;
  json config;
  NamedValues metrics;
  NamedValues targets;
  json reference = json::object();  // published values, context only
  std::vector<Comparison> comparisons;
  double wall_clock_seconds = 0.0;
  std::string timestamp;
  std::vector<std::string> artifacts;
  bool failed = false;
  std::string diagnostics;

  bool passed() const;
  json to_json() const;
  static RunReport from_json(const json& j);
};

/// Runs the experiment, writes its artifacts into config.output_dir (when set)
/// and returns the report. Divergence yields a failed report, not an exception.
RunReport run_experiment(const ExperimentConfig& config, double tol_scale = 1.0);

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::string selector = "all";  // "all" or an experiment name
  double tol_scale = 1.0;
  std::filesystem::path output_root;  // empty: no artifacts
};

struct VerifyResult {
  std::vector<CriterionResult> criteria;
  std::vector<RunReport> reports;
  double seconds = 0.0;

  bool passed() const;
  const RunReport* report(const std::string& experiment) const;
};

/// Runs the acceptance criteria selected by `options`, printing one line per
/// criterion to `out` as it completes.
VerifyResult verify(const VerifyOptions& options, std::ostream& out);

}  // namespace orbitlab::expcli
