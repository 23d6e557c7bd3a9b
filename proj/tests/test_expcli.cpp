#include "orbitlab/errors.hpp"
#include "orbitlab/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace orbitlab;
using namespace orbitlab::expcli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("orbitlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A short run of every experiment, enough to exercise the full pipeline.
ExperimentConfig quick(const std::string& name) {
  ExperimentConfig c;
  c.experiment = name;
  c.dynamics["total_steps"] = name == "radial" ? 20000 : 400;
  if (name == "radial") c.options = {{"chains", 2}, {"grid_points", 400}};
  return c;
}

}  // namespace

TEST(Registry, NamesAreStable) {
  const std::vector<std::string> expected = {"radial",           "fourier_sparse", "tv_recon",
                                             "multichannel",     "rank2_completion", "attention_ts",
                                             "relu_balance",     "l1_hadamard",    "group_lasso"};
  std::vector<std::string> names;
  for (const auto& e : list_experiments()) names.push_back(e.name);
  EXPECT_EQ(names, expected);
  EXPECT_THROW(find_experiment("nope"), InvalidArgument);
}

TEST(Registry, RadialDefaults) {
  const auto rc = resolve(find_experiment("radial").defaults);
  EXPECT_EQ(rc.dynamics.total_steps, 800000);
  EXPECT_EQ(rc.model_params.at("d").get<int>(), 10);
  EXPECT_DOUBLE_EQ(rc.dynamics.beta, 10.0);
}

TEST(Config, DefaultsRoundTrip) {
  for (const auto& e : list_experiments()) {
    const json j = e.defaults.to_json();
    const auto back = ExperimentConfig::from_json(j);
    EXPECT_EQ(back.to_json(), j) << e.name;
    EXPECT_NO_THROW(resolve(back)) << e.name;
  }
}

TEST(Config, RejectsUnknownKeys) {
  json j = find_experiment("radial").defaults.to_json();
  j["colour"] = "blue";
  EXPECT_THROW(ExperimentConfig::from_json(j), InvalidArgument);

  ExperimentConfig c;
  c.experiment = "radial";
  c.dynamics["etaa"] = 0.1;
  EXPECT_THROW(resolve(c), InvalidArgument);

  c.dynamics = json::object();
  c.options["chainz"] = 2;
  EXPECT_THROW(resolve(c), InvalidArgument);

  ExperimentConfig f;
  f.experiment = "fourier_sparse";
  f.options = {{"chains", 2}};  // radial only
  EXPECT_THROW(resolve(f), InvalidArgument);

  c.options = {{"chains", -1}};
  EXPECT_THROW(resolve(c), InvalidArgument);

  ExperimentConfig v;
  v.experiment = "tv_recon";
  v.model_params["variant"] = "naive";
  EXPECT_THROW(resolve(v), InvalidArgument);

  ExperimentConfig u;
  u.experiment = "nope";
  EXPECT_THROW(resolve(u), InvalidArgument);
}

TEST(Config, DynamicsRoundTrip) {
  dynamics::DynamicsConfig d;
  d.eta = 0.03;
  d.beta = 7.0;
  d.total_steps = 1234;
  d.thinning = 3;
  d.batch_size = 5;
  d.noise_mode = dynamics::NoiseMode::minibatch_plus_langevin;
  const auto back = dynamics_from_json(dynamics_to_json(d));
  EXPECT_EQ(dynamics_to_json(back), dynamics_to_json(d));
}

TEST(Compare, ToleranceScaling) {
  EXPECT_TRUE(compare("x", 0.5, "<", 1.0, 0.0, "threshold").passed);
  EXPECT_FALSE(compare("x", 0.5, "<", 1.0, 0.0, "threshold", 0.1).passed);
  EXPECT_TRUE(compare("x", 6.0, ">", 5.0, 0.0, "threshold").passed);
  EXPECT_FALSE(compare("x", 6.0, ">", 5.0, 0.0, "threshold", 0.5).passed);
  EXPECT_TRUE(compare("x", 1.05, "within", 1.0, 0.1, "oracle").passed);
  EXPECT_FALSE(compare("x", 1.05, "within", 1.0, 0.1, "oracle", 0.1).passed);
  EXPECT_TRUE(compare("x", 2.0, "==", 2.0, 0.0, "oracle").passed);
  EXPECT_FALSE(compare("x", NAN, "<", 1.0, 0.0, "threshold").passed);
}

TEST(SeriesTable, CsvRoundTrip) {
  SeriesTable t;
  t.columns = {"step", "loss", "a.b"};
  t.rows = {{0, 1.5, -2.25}, {10, 0.125, 3e-17}, {20, 1e300, 0.1}};
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  t.write_csv(dir / "s.csv");
  const auto back = SeriesTable::read_csv(dir / "s.csv");
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows, t.rows);
}

TEST(RunReport, JsonRoundTrip) {
  RunReport r;
  r.experiment = "radial";
  r.metrics = {{"a", 1.0}, {"b", NAN}};
  r.targets = {{"t", 2.0}};
  r.comparisons.push_back(compare("a", 1.0, "<", 2.0, 0.0, "threshold"));
  r.timestamp = "2020-01-01T00:00:00Z";
  const auto back = RunReport::from_json(r.to_json());
  EXPECT_EQ(back.experiment, "radial");
  EXPECT_EQ(back.metrics.at("a"), 1.0);
  EXPECT_TRUE(std::isnan(back.metrics.at("b")));
  ASSERT_EQ(back.comparisons.size(), 1u);
  EXPECT_TRUE(back.comparisons[0].passed);
}

TEST(Run, EveryComparisonUsesARecordedMetric) {
  for (const auto& e : list_experiments()) {
    const auto report = run_experiment(quick(e.name));
    ASSERT_FALSE(report.failed) << e.name << ": " << report.diagnostics;
    EXPECT_FALSE(report.comparisons.empty()) << e.name;
    for (const auto& c : report.comparisons) {
      ASSERT_TRUE(report.metrics.count(c.metric)) << e.name << " " << c.metric;
      EXPECT_EQ(report.metrics.at(c.metric), c.value);
    }
    EXPECT_FALSE(report.reference.empty()) << e.name;
  }
}

TEST(Run, DeterministicArtifacts) {
  auto c = quick("fourier_sparse");
  const fs::path dir_a = scratch("det_a"), dir_b = scratch("det_b");
  c.output_dir = dir_a;
  const auto a = run_experiment(c);
  c.output_dir = dir_b;
  const auto b = run_experiment(c);
  EXPECT_EQ(slurp(dir_a / "series.csv"), slurp(dir_b / "series.csv"));
  json ja = a.to_json(), jb = b.to_json();
  for (auto* j : {&ja, &jb}) {
    j->erase("timestamp");
    j->erase("wall_clock_seconds");
    (*j)["config"].erase("output_dir");
  }
  EXPECT_EQ(ja, jb);
}

TEST(Run, SeedChangesTheRun) {
  auto c = quick("fourier_sparse");
  const auto a = run_experiment(c);
  c.seed = 1;
  const auto b = run_experiment(c);
  EXPECT_NE(a.to_json()["metrics"], b.to_json()["metrics"]);
}

TEST(Run, WritesDeclaredArtifacts) {
  auto c = quick("radial");
  c.emit_samples = true;
  c.output_dir = scratch("radial");
  const auto r = run_experiment(c);
  ASSERT_FALSE(r.failed);
  std::set<std::string> files;
  for (const auto& entry : fs::directory_iterator(c.output_dir)) files.insert(entry.path().filename().string());
  EXPECT_EQ(files, std::set<std::string>(r.artifacts.begin(), r.artifacts.end()));
  EXPECT_TRUE(files.count("samples.csv"));
  EXPECT_TRUE(files.count("series.csv"));
  const auto parsed = RunReport::from_json(json::parse(slurp(c.output_dir / "report.json")));
  EXPECT_EQ(parsed.metrics, r.metrics);
}

TEST(Run, DivergenceWritesOnlyTheReport) {
  ExperimentConfig c;
  c.experiment = "rank2_completion";
  c.dynamics = {{"eta", 50.0}, {"total_steps", 2000}};
  c.output_dir = scratch("diverged");
  const auto r = run_experiment(c);
  EXPECT_TRUE(r.failed);
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.diagnostics.empty());
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(c.output_dir)) files.push_back(entry.path().filename().string());
  EXPECT_EQ(files, std::vector<std::string>{"report.json"});
  EXPECT_TRUE(RunReport::from_json(json::parse(slurp(c.output_dir / "report.json"))).failed);
}

TEST(Verify, TightToleranceFails) {
  std::ostringstream out;
  const auto loose = verify({"radial", 1.0, {}}, out);
  ASSERT_EQ(loose.criteria.size(), 1u);
  EXPECT_TRUE(loose.passed()) << out.str();
  const auto tight = verify({"radial", 1e-3, {}}, out);
  EXPECT_FALSE(tight.passed());
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);
  EXPECT_THROW(verify({"nope", 1.0, {}}, out), InvalidArgument);
  EXPECT_THROW(verify({"radial", 0.0, {}}, out), InvalidArgument);
}
