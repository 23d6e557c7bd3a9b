#include "orbitlab/errors.hpp"
#include "orbitlab/experiments.hpp"
#include "orbitlab/models.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace orbitlab::expcli {

namespace {

ExperimentConfig make_defaults(const std::string& name, json dyn, json model, json options) {
  ExperimentConfig c;
  c.experiment = name;
  c.dynamics = std::move(dyn);
  c.model_params = std::move(model);
  c.options = std::move(options);
  return c;
}

std::vector<ExperimentInfo> build_registry() {
  std::vector<ExperimentInfo> r;
  r.push_back({"radial",
               "Langevin on a rotation-invariant radial loss in d=10; radial density vs gauge-corrected and naive laws",
               "radial", {"radial"},
               make_defaults("radial",
                             {{"eta", 1e-3}, {"beta", 10.0}, {"noise_scale", 1.0}, {"total_steps", 800000},
                              {"burn_in_fraction", 0.1}, {"thinning", 10}, {"noise_mode", "langevin"}},
                             {{"d", 10}, {"init_radius", 1.0}},
                             {{"chains", 16}, {"bins", 80}, {"grid_points", 4000}, {"record_points", 2000}})});
  r.push_back({"fourier_sparse",
               "Sparse cosine regression: direct coefficients vs Hadamard p*q coefficients", "fourier_sparse",
               {"pq", "naive"},
               make_defaults("fourier_sparse",
                             {{"eta", 0.01}, {"total_steps", 100000}, {"noise_mode", "minibatch"}, {"batch_size", 10}},
                             json::object(), {{"record_points", 200}})});
  r.push_back({"tv_recon",
               "Piecewise-constant signal from random projections: direct signal vs cumulative-sum of p*q increments",
               "tv_recon", {"biased", "naive"},
               make_defaults("tv_recon",
                             {{"eta", 0.004}, {"total_steps", 300000}, {"noise_mode", "minibatch"}, {"batch_size", 10}},
                             json::object(), {{"record_points", 200}})});
  r.push_back({"multichannel",
               "Shared low-rank multichannel regression: direct, elementwise and matrix factorizations",
               "multichannel", {"matrix", "naive", "scalar"},
               make_defaults("multichannel",
                             {{"eta", 0.02}, {"total_steps", 1500}, {"noise_mode", "minibatch"}, {"batch_size", 20}},
                             json::object(), {{"record_points", 100}})});
  r.push_back({"rank2_completion",
               "Rank-2 matrix completion by SGD on U V^T; per-mode energies vs log(2 sigma_i)", "rank2_completion",
               {"uv"},
               make_defaults("rank2_completion",
                             {{"eta", 0.1}, {"total_steps", 1000000}, {"noise_mode", "minibatch"}, {"batch_size", 16}},
                             json::object(), {{"record_points", 200}})});
  r.push_back({"attention_ts",
               "Single-head attention teacher-student with added Langevin noise; query/key column balance",
               "attention_ts", {"single_head"},
               make_defaults("attention_ts",
                             {{"eta", 0.05}, {"beta", 1e8}, {"noise_scale", 1.0}, {"total_steps", 20000},
                              {"noise_mode", "minibatch_plus_langevin"}, {"batch_size", 32}},
                             json::object(), {{"record_points", 200}})});
  r.push_back({"relu_balance",
               "Two-layer ReLU classifier on separable 2-D clusters; per-neuron balance ratio |w_j|/|v_j|", "relu2",
               {"two_layer"},
               make_defaults("relu_balance",
                             {{"eta", 0.1}, {"total_steps", 7000}, {"noise_mode", "minibatch"}, {"batch_size", 20}},
                             json::object(), {{"record_points", 140}})});
  r.push_back({"l1_hadamard",
               "Sparse inverse design d=200, n=80: vanilla weights vs Hadamard u*v", "l1_hadamard",
               {"factorized", "vanilla"},
               make_defaults("l1_hadamard",
                             {{"eta", 0.002}, {"total_steps", 100000}, {"noise_mode", "minibatch"}, {"batch_size", 10}},
                             json::object(), {{"record_points", 200}})});
  r.push_back({"group_lasso",
               "Group-sparse regression with 40 groups: vanilla weights vs blockwise s_g * t_g", "block_group",
               {"factorized", "vanilla"},
               make_defaults("group_lasso",
                             {{"eta", 0.002}, {"total_steps", 100000}, {"noise_mode", "minibatch"}, {"batch_size", 10}},
                             json::object(), {{"record_points", 200}})});
  return r;
}

const std::set<std::string> kOptionKeys = {"chains", "bins", "grid_points", "record_points"};

void require_object(const json& j, const std::string& what) {
  if (!j.is_object()) throw InvalidArgument(what + " must be a JSON object");
}

}  // namespace

const std::vector<ExperimentInfo>& list_experiments() {
  static const std::vector<ExperimentInfo> registry = build_registry();
  return registry;
}

const ExperimentInfo& find_experiment(const std::string& name) {
  for (const auto& e : list_experiments()) {
    if (e.name == name) return e;
  }
  throw InvalidArgument("unknown experiment '" + name + "'");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  require_object(j, "experiment config");
  static const std::set<std::string> keys = {"experiment", "seed",       "dynamics",    "model_params",
                                             "options",    "output_dir", "emit_samples"};
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw InvalidArgument("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  if (!j.contains("experiment") || !j["experiment"].is_string()) throw InvalidArgument("config needs an 'experiment' name");
  c.experiment = j["experiment"].get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0)) {
      throw InvalidArgument("seed must be a nonnegative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("dynamics")) {
    require_object(j["dynamics"], "dynamics");
    c.dynamics = j["dynamics"];
  }
  if (j.contains("model_params")) {
    require_object(j["model_params"], "model_params");
    c.model_params = j["model_params"];
  }
  if (j.contains("options")) {
    require_object(j["options"], "options");
    c.options = j["options"];
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw InvalidArgument("output_dir must be a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("emit_samples")) {
    if (!j["emit_samples"].is_boolean()) throw InvalidArgument("emit_samples must be a boolean");
    c.emit_samples = j["emit_samples"].get<bool>();
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  return {{"experiment", experiment},     {"seed", seed},         {"dynamics", dynamics},
          {"model_params", model_params}, {"options", options},   {"output_dir", output_dir.string()},
          {"emit_samples", emit_samples}};
}

dynamics::DynamicsConfig dynamics_from_json(const json& j, dynamics::DynamicsConfig c) {
  require_object(j, "dynamics");
  for (const auto& [key, value] : j.items()) {
    auto number = [&]() {
      if (!value.is_number()) throw InvalidArgument("dynamics." + key + " must be a number");
      return value.get<double>();
    };
    auto integer = [&]() -> std::int64_t {
      const double x = number();
      if (std::floor(x) != x) throw InvalidArgument("dynamics." + key + " must be an integer");
      return static_cast<std::int64_t>(x);
    };
    if (key == "eta") {
      c.eta = number();
    } else if (key == "beta") {
      c.beta = number();
    } else if (key == "noise_scale") {
      c.noise_scale = number();
    } else if (key == "total_steps") {
      c.total_steps = integer();
    } else if (key == "burn_in_fraction") {
      c.burn_in_fraction = number();
    } else if (key == "burn_in_steps") {
      c.burn_in_steps = integer();
    } else if (key == "thinning") {
      c.thinning = integer();
    } else if (key == "seed") {
      const std::int64_t s = integer();
      if (s < 0) throw InvalidArgument("dynamics.seed must be nonnegative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "noise_mode") {
      if (!value.is_string()) throw InvalidArgument("dynamics.noise_mode must be a string");
      c.noise_mode = dynamics::noise_mode_from_string(value.get<std::string>());
    } else if (key == "batch_size") {
      c.batch_size = integer();
    } else {
      throw InvalidArgument("unknown dynamics key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

json dynamics_to_json(const dynamics::DynamicsConfig& c) {
  json j = {{"eta", c.eta},
            {"beta", c.beta},
            {"noise_scale", c.noise_scale},
            {"total_steps", c.total_steps},
            {"burn_in_fraction", c.burn_in_fraction},
            {"thinning", c.thinning},
            {"seed", c.seed},
            {"noise_mode", dynamics::to_string(c.noise_mode)},
            {"batch_size", c.batch_size}};
  if (c.burn_in_steps) j["burn_in_steps"] = *c.burn_in_steps;
  return j;
}

ResolvedConfig resolve(const ExperimentConfig& config) {
  const ExperimentInfo& info = find_experiment(config.experiment);
  ResolvedConfig r;
  r.config = config;

  json dyn = info.defaults.dynamics;
  for (const auto& [key, value] : config.dynamics.items()) dyn[key] = value;
  r.dynamics = dynamics_from_json(dyn);
  if (!config.dynamics.contains("seed")) r.dynamics.seed = config.seed;

  json model = info.defaults.model_params;
  for (const auto& [key, value] : config.model_params.items()) {
    if (key == "variant") throw InvalidArgument("model_params.variant is fixed by the experiment");
    model[key] = value;
  }
  r.model_params = models::resolve_params(models::kind_from_string(info.model_kind), model);

  r.options = info.defaults.options;
  for (const auto& [key, value] : config.options.items()) {
    if (!kOptionKeys.count(key) || !r.options.contains(key)) {
      throw InvalidArgument("unknown option '" + key + "' for experiment " + info.name);
    }
    if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
      throw InvalidArgument("option '" + key + "' must be a positive integer");
    }
    r.options[key] = value;
  }
  r.config.dynamics = dynamics_to_json(r.dynamics);
  r.config.model_params = r.model_params;
  r.config.options = r.options;
  return r;
}

Comparison compare(const std::string& metric, double value, const std::string& relation, double target,
                   double tolerance, std::string provenance, double tol_scale) {
  if (!(tol_scale > 0.0)) throw InvalidArgument("tol_scale must be positive");
  Comparison c{metric, relation, target, tolerance, value, false, std::move(provenance)};
  if (relation == "<" || relation == "<=") {
    c.target = target * tol_scale;
  } else if (relation == ">" || relation == ">=") {
    c.target = target / tol_scale;
  } else if (relation == "within") {
    c.tolerance = tolerance * tol_scale;
  } else if (relation != "==") {
    throw InvalidArgument("unknown relation '" + relation + "'");
  }
  if (!std::isfinite(value)) return c;
  if (relation == "<") c.passed = value < c.target;
  if (relation == "<=") c.passed = value <= c.target;
  if (relation == ">") c.passed = value > c.target;
  if (relation == ">=") c.passed = value >= c.target;
  if (relation == "==") c.passed = value == c.target;
  if (relation == "within") c.passed = std::abs(value - c.target) <= c.tolerance;
  return c;
}

void SeriesTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
}

SeriesTable SeriesTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  SeriesTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + " is empty");
  std::stringstream header(line);
  for (std::string cell; std::getline(header, cell, ',');) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream s(line);
    for (std::string cell; std::getline(s, cell, ',');) row.push_back(std::stod(cell));
    if (row.size() != t.columns.size()) throw Error(path.string() + ": ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

bool RunReport::passed() const {
  if (failed) return false;
  for (const auto& c : comparisons) {
    if (!c.passed) return false;
  }
  return true;
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

json RunReport::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["config"] = config;
  j["metrics"] = json::object();
  for (const auto& [k, v] : metrics) j["metrics"][k] = number_or_null(v);
  j["targets"] = json::object();
  for (const auto& [k, v] : targets) j["targets"][k] = number_or_null(v);
  j["reference"] = reference;
  j["comparisons"] = json::array();
  for (const auto& c : comparisons) {
    j["comparisons"].push_back({{"metric", c.metric},
                                {"relation", c.relation},
                                {"target", number_or_null(c.target)},
                                {"tolerance", c.tolerance},
                                {"value", number_or_null(c.value)},
                                {"passed", c.passed},
                                {"provenance", c.provenance}});
  }
  j["passed"] = passed();
  j["failed"] = failed;
  j["diagnostics"] = diagnostics;
  j["artifacts"] = artifacts;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["timestamp"] = timestamp;
  return j;
}

RunReport RunReport::from_json(const json& j) {
  RunReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config = j.at("config");
  for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = number_from(v);
  for (const auto& [k, v] : j.at("targets").items()) r.targets[k] = number_from(v);
  r.reference = j.value("reference", json::object());
  for (const auto& c : j.at("comparisons")) {
    r.comparisons.push_back({c.at("metric").get<std::string>(), c.at("relation").get<std::string>(),
                             number_from(c.at("target")), c.at("tolerance").get<double>(),
                             number_from(c.at("value")), c.at("passed").get<bool>(),
                             c.at("provenance").get<std::string>()});
  }
  r.failed = j.value("failed", false);
  r.diagnostics = j.value("diagnostics", "");
  r.artifacts = j.value("artifacts", std::vector<std::string>{});
  r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
  r.timestamp = j.value("timestamp", "");
  return r;
}

}  // namespace orbitlab::expcli
