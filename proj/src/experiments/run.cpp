#include "internal.hpp"

#include "orbitlab/errors.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>

namespace orbitlab::expcli {

namespace detail {

void RunContext::check(const std::string& metric, const std::string& relation, double target, double tolerance,
                       std::string provenance) {
  auto it = report.metrics.find(metric);
  if (it == report.metrics.end()) throw Error("internal: comparison on unrecorded metric '" + metric + "'");
  report.comparisons.push_back(compare(metric, it->second, relation, target, tolerance, std::move(provenance), tol_scale));
}

std::vector<VariantRun> run_variants(RunContext& ctx, models::DatasetSpec& data,
                                     const std::vector<std::string>& variants,
                                     const std::vector<std::string>& observables) {
  dynamics::DynamicsConfig dyn = ctx.rc.dynamics;
  dyn.burn_in_steps = 0;
  dyn.thinning = std::max<std::int64_t>(1, dyn.total_steps / ctx.option("record_points"));
  dyn.record_snapshots = false;
  ctx.report.config["dynamics"] = dynamics_to_json(dyn);

  std::vector<VariantRun> runs;
  for (const auto& variant : variants) {
    models::DatasetSpec copy = data;
    if (copy.params.contains("variant")) copy.params["variant"] = variant;
    VariantRun run;
    run.variant = variant;
    run.spec = models::model_from_dataset(copy);
    run.initial = run.spec.init;
    for (const auto& name : observables) run.initial_values[name] = run.spec.model->observe(name, run.initial);
    run.trajectory = dynamics::simulate(*run.spec.model, run.spec.init, dyn, observables);
    for (const auto& name : observables) {
      run.final_values[name] = run.spec.model->observe(name, run.trajectory.final_theta);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

SeriesTable variant_series(const std::vector<VariantRun>& runs, const std::vector<std::string>& observables) {
  SeriesTable t;
  t.columns = {"step", "loss"};
  for (const auto& run : runs) {
    for (const auto& name : observables) t.columns.push_back(run.variant + "." + name);
  }
  const auto& primary = runs.front();
  const std::size_t n = primary.trajectory.step_indices.size();
  for (std::size_t k = 0; k <= n; ++k) {
    std::vector<double> row;
    row.push_back(k == 0 ? 0.0 : static_cast<double>(primary.trajectory.step_indices[k - 1]));
    row.push_back(k == 0 ? primary.initial_values.at("loss") : primary.trajectory.observables.at("loss")[k - 1]);
    for (const auto& run : runs) {
      for (const auto& name : observables) {
        row.push_back(k == 0 ? run.initial_values.at(name) : run.trajectory.observables.at(name)[k - 1]);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

const VariantRun& find_run(const std::vector<VariantRun>& runs, const std::string& variant) {
  for (const auto& r : runs) {
    if (r.variant == variant) return r;
  }
  throw Error("internal: no run for variant '" + variant + "'");
}

Runner find_runner(const std::string& experiment) {
  static const std::vector<std::pair<std::string, Runner>> runners = {
      {"radial", run_radial},
      {"fourier_sparse", run_fourier_sparse},
      {"tv_recon", run_tv_recon},
      {"multichannel", run_multichannel},
      {"rank2_completion", run_rank2_completion},
      {"attention_ts", run_attention_ts},
      {"relu_balance", run_relu_balance},
      {"l1_hadamard", run_l1_hadamard},
      {"group_lasso", run_group_lasso},
  };
  for (const auto& [name, fn] : runners) {
    if (name == experiment) return fn;
  }
  throw InvalidArgument("unknown experiment '" + experiment + "'");
}

}  // namespace detail

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_report(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << report.to_json().dump(2) << '\n';
}

/// Writes every file under a temporary name first so a failure leaves no partial artifacts.
void write_artifacts(RunReport& report, const detail::Artifacts& artifacts, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::pair<std::string, std::function<void(const fs::path&)>>> files;
  files.emplace_back("series.csv", [&](const fs::path& p) { artifacts.series.write_csv(p); });
  for (const auto& f : artifacts.files) files.push_back(f);
  report.artifacts.clear();
  for (const auto& [name, fn] : files) report.artifacts.push_back(name);
  report.artifacts.push_back("report.json");

  std::vector<fs::path> staged;
  try {
    for (const auto& [name, fn] : files) {
      const fs::path tmp = dir / (name + ".partial");
      fn(tmp);
      staged.push_back(tmp);
    }
  } catch (...) {
    for (const auto& p : staged) fs::remove(p);
    throw;
  }
  for (std::size_t k = 0; k < files.size(); ++k) fs::rename(staged[k], dir / files[k].first);
  write_report(report, dir / "report.json");
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, double tol_scale) {
  const auto start = std::chrono::steady_clock::now();
  const ResolvedConfig rc = resolve(config);
  RunReport report;
  report.experiment = rc.config.experiment;
  report.config = rc.config.to_json();
  detail::Artifacts artifacts;
  detail::RunContext ctx{rc, tol_scale, report, artifacts};
  try {
    detail::find_runner(rc.config.experiment)(ctx);
  } catch (const SimulationError& e) {
    report.failed = true;
    report.diagnostics = e.what();
  }
  report.timestamp = utc_timestamp();
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!config.output_dir.empty()) {
    if (report.failed) {
      std::filesystem::create_directories(config.output_dir);
      report.artifacts = {"report.json"};
      write_report(report, config.output_dir / "report.json");
    } else {
      write_artifacts(report, artifacts, config.output_dir);
    }
  } else if (!report.failed) {
    report.artifacts.clear();
  }
  return report;
}

}  // namespace orbitlab::expcli
