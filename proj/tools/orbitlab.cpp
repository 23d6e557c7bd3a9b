#include "orbitlab/errors.hpp"
#include "orbitlab/experiments.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <optional>

namespace {

using namespace orbitlab;
using namespace orbitlab::expcli;

int cmd_list() {
  for (const auto& e : list_experiments()) {
    std::cout << std::left << std::setw(18) << e.name << e.description << "\n";
    std::cout << std::setw(18) << "" << "defaults: " << e.defaults.to_json().dump() << "\n";
  }
  return 0;
}

struct RunArgs {
  std::string experiment;
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::int64_t> steps;
  bool emit_samples = false;
};

int cmd_run(const RunArgs& a) {
  ExperimentConfig config;
  if (!a.config_file.empty()) {
    config = ExperimentConfig::load(a.config_file);
    if (config.experiment != a.experiment) {
      throw InvalidArgument("config file is for '" + config.experiment + "', not '" + a.experiment + "'");
    }
  } else {
    config.experiment = a.experiment;
  }
  find_experiment(config.experiment);
  if (a.seed) config.seed = *a.seed;
  if (a.steps) config.dynamics["total_steps"] = *a.steps;
  if (a.emit_samples) config.emit_samples = true;
  if (!a.out.empty()) {
    config.output_dir = a.out;
  } else if (config.output_dir.empty()) {
    config.output_dir = std::filesystem::path("runs") / config.experiment;
  }

  const RunReport report = run_experiment(config);
  std::cout << report.experiment << " (" << std::fixed << std::setprecision(1) << report.wall_clock_seconds
            << " s) -> " << config.output_dir.string() << "\n";
  if (report.failed) {
    std::cout << "FAILED: " << report.diagnostics << "\n";
    return 1;
  }
  std::cout << std::defaultfloat << std::setprecision(5);
  for (const auto& c : report.comparisons) {
    std::cout << "  " << (c.passed ? "pass" : "FAIL") << "  " << c.metric << " = " << c.value << " " << c.relation
              << " " << c.target;
    if (c.relation == "within") std::cout << " +- " << c.tolerance;
    std::cout << "  [" << c.provenance << "]\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry-reduced training dynamics: experiments and acceptance checks"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List registered experiments with their default configs");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one experiment and write series.csv and report.json");
  run->add_option("experiment", run_args.experiment, "Experiment name")->required();
  run->add_option("--config", run_args.config_file, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--seed", run_args.seed, "Seed for data, initialization and noise");
  run->add_option("--out", run_args.out, "Output directory (default runs/<experiment>)");
  run->add_option("--steps", run_args.steps, "Override dynamics.total_steps")->check(CLI::PositiveNumber);
  run->add_flag("--emit-samples", run_args.emit_samples, "Also write samples.csv (radial)");

  VerifyOptions verify_opts;
  bool verify_all = false;
  std::string verify_experiment;
  std::string verify_out;
  auto* ver = app.add_subcommand("verify", "Run the acceptance criteria and print a pass/fail table");
  auto* all_flag = ver->add_flag("--all", verify_all, "All criteria (default)");
  ver->add_option("--experiment", verify_experiment, "Only the criterion of this experiment")->excludes(all_flag);
  ver->add_option("--tol-scale", verify_opts.tol_scale, "Scale every tolerance by this factor")
      ->check(CLI::PositiveNumber);
  ver->add_option("--out", verify_out, "Write each experiment's artifacts under this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) return cmd_list();
    if (*run) return cmd_run(run_args);
    if (*ver) {
      if (!verify_experiment.empty()) verify_opts.selector = verify_experiment;
      verify_opts.output_root = verify_out;
      return verify(verify_opts, std::cout).passed() ? 0 : 1;
    }
  } catch (const orbitlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
