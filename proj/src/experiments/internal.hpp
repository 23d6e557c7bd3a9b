#pragma once

#include "orbitlab/dynamics.hpp"
#include "orbitlab/experiments.hpp"
#include "orbitlab/models.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace orbitlab::expcli::detail {

/// Files produced by a run, written only once the whole run has succeeded.
struct Artifacts {
  SeriesTable series;
  std::vector<std::pair<std::string, std::function<void(const std::filesystem::path&)>>> files;
};

struct RunContext {
  const ResolvedConfig& rc;
  double tol_scale;
  RunReport& report;
  Artifacts& artifacts;

  std::int64_t option(const std::string& key) const { return rc.options.at(key).get<std::int64_t>(); }
  void metric(const std::string& name, double value) { report.metrics[name] = value; }
  void target(const std::string& name, double value) { report.targets[name] = value; }
  /// Adds a comparison on a metric already stored in the report.
  void check(const std::string& metric, const std::string& relation, double target, double tolerance,
             std::string provenance);
};

struct VariantRun {
  std::string variant;
  models::ModelSpec spec;
  dynamics::Trajectory trajectory;
  Vector initial;
  NamedValues initial_values;
  NamedValues final_values;
};

/// Builds the dataset once from the resolved parameters and trains every
/// variant on it with the same dynamics, recording about record_points rows.
std::vector<VariantRun> run_variants(RunContext& ctx, models::DatasetSpec& data,
                                     const std::vector<std::string>& variants,
                                     const std::vector<std::string>& observables);

/// step, loss of the primary variant, then <variant>.<observable> columns.
SeriesTable variant_series(const std::vector<VariantRun>& runs, const std::vector<std::string>& observables);

const VariantRun& find_run(const std::vector<VariantRun>& runs, const std::string& variant);

using Runner = void (*)(RunContext&);
Runner find_runner(const std::string& experiment);

void run_radial(RunContext& ctx);
void run_fourier_sparse(RunContext& ctx);
void run_tv_recon(RunContext& ctx);
void run_multichannel(RunContext& ctx);
void run_rank2_completion(RunContext& ctx);
void run_attention_ts(RunContext& ctx);
void run_relu_balance(RunContext& ctx);
void run_l1_hadamard(RunContext& ctx);
void run_group_lasso(RunContext& ctx);

// Library-side acceptance checks (criteria 2-4 and 13-16).
CriterionResult check_gram_relation(double tol_scale);
CriterionResult check_gradients(double tol_scale);
CriterionResult check_invariance(double tol_scale);
CriterionResult check_oracle_equivalences(double tol_scale);
CriterionResult check_tt_balancing(double tol_scale);
CriterionResult check_pca_stationarity(double tol_scale);
CriterionResult check_orbit_counting(double tol_scale);

}  // namespace orbitlab::expcli::detail
