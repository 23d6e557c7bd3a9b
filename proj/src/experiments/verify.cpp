#include "internal.hpp"

#include "orbitlab/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace orbitlab::expcli {

namespace {

struct ExperimentCriterion {
  int id;
  std::string experiment;
  std::string title;
  double budget_seconds;  // 0: no runtime requirement
};

const std::vector<ExperimentCriterion>& experiment_criteria() {
  static const std::vector<ExperimentCriterion> list = {
      {1, "radial", "radial stationary law", 60.0},
      {5, "rank2_completion", "rank-2 completion mode energies", 180.0},
      {6, "attention_ts", "attention query/key balancing", 0.0},
      {7, "relu_balance", "ReLU neuron balance", 0.0},
      {8, "l1_hadamard", "l1 inverse design", 0.0},
      {9, "group_lasso", "group sparsity", 0.0},
      {10, "fourier_sparse", "Fourier sparsity", 0.0},
      {11, "tv_recon", "total-variation inverse design", 0.0},
      {12, "multichannel", "multichannel effective rank", 0.0},
  };
  return list;
}

using Check = CriterionResult (*)(double);

const std::vector<std::pair<int, Check>>& library_criteria() {
  static const std::vector<std::pair<int, Check>> list = {
      {2, detail::check_gram_relation},     {3, detail::check_gradients},        {4, detail::check_invariance},
      {13, detail::check_oracle_equivalences}, {14, detail::check_tt_balancing}, {15, detail::check_pca_stationarity},
      {16, detail::check_orbit_counting},
  };
  return list;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string short_value(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

void print(std::ostream& out, const CriterionResult& c) {
  out << (c.passed ? "PASS" : "FAIL") << "  [" << (c.id < 10 ? " " : "") << c.id << "] " << c.title << " ("
      << fixed(c.seconds, 1) << " s): " << c.detail << std::endl;
}

CriterionResult experiment_criterion(const ExperimentCriterion& ec, const VerifyOptions& options, RunReport& report) {
  ExperimentConfig config;
  config.experiment = ec.experiment;
  if (!options.output_root.empty()) config.output_dir = options.output_root / ec.experiment;
  report = run_experiment(config, options.tol_scale);

  CriterionResult c{ec.id, ec.title, report.passed(), "", report.wall_clock_seconds};
  std::ostringstream detail;
  if (report.failed) {
    detail << "run failed: " << report.diagnostics;
  } else {
    bool first = true;
    for (const auto& cmp : report.comparisons) {
      detail << (first ? "" : ", ") << cmp.metric << " " << short_value(cmp.value) << " " << cmp.relation << " "
             << short_value(cmp.target);
      if (cmp.relation == "within") detail << " +- " << short_value(cmp.tolerance);
      if (!cmp.passed) detail << " [X]";
      first = false;
    }
  }
  if (ec.budget_seconds > 0.0) {
    const bool in_time = report.wall_clock_seconds < ec.budget_seconds;
    detail << ", runtime " << fixed(report.wall_clock_seconds, 1) << " s < " << fixed(ec.budget_seconds, 0) << " s"
           << (in_time ? "" : " [X]");
    c.passed = c.passed && in_time;
  }
  c.detail = detail.str();
  return c;
}

}  // namespace

bool VerifyResult::passed() const {
  for (const auto& c : criteria) {
    if (!c.passed) return false;
  }
  return !criteria.empty();
}

const RunReport* VerifyResult::report(const std::string& experiment) const {
  for (const auto& r : reports) {
    if (r.experiment == experiment) return &r;
  }
  return nullptr;
}

VerifyResult verify(const VerifyOptions& options, std::ostream& out) {
  if (!(options.tol_scale > 0.0)) throw InvalidArgument("tol_scale must be positive");
  const bool all = options.selector == "all";
  if (!all) find_experiment(options.selector);

  const auto start = std::chrono::steady_clock::now();
  VerifyResult result;

  if (all) {
    for (const auto& [id, check] : library_criteria()) {
      const auto t0 = std::chrono::steady_clock::now();
      CriterionResult c = check(options.tol_scale);
      c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      print(out, c);
      result.criteria.push_back(c);
    }
  }
  for (const auto& ec : experiment_criteria()) {
    if (!all && ec.experiment != options.selector) continue;
    RunReport report;
    CriterionResult c = experiment_criterion(ec, options, report);
    print(out, c);
    result.criteria.push_back(c);
    result.reports.push_back(std::move(report));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (all) {
    CriterionResult c{17, "full verify(all) wall clock", result.seconds < 600.0,
                      "total " + fixed(result.seconds, 1) + " s < 600 s", result.seconds};
    print(out, c);
    result.criteria.push_back(c);
  }
  std::sort(result.criteria.begin(), result.criteria.end(),
            [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });

  int passed = 0;
  for (const auto& c : result.criteria) passed += c.passed;
  out << passed << "/" << result.criteria.size() << " criteria passed in " << fixed(result.seconds, 1) << " s"
      << std::endl;
  return result;
}

}  // namespace orbitlab::expcli
