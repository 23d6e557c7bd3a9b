#include "internal.hpp"

#include "orbitlab/linalg.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace orbitlab::models {

using nlohmann::json;

namespace {

const std::vector<std::pair<Kind, const char*>>& kind_names() {
  static const std::vector<std::pair<Kind, const char*>> names = {
      {Kind::radial, "radial"},
      {Kind::fourier_sparse, "fourier_sparse"},
      {Kind::tv_recon, "tv_recon"},
      {Kind::multichannel, "multichannel"},
      {Kind::rank2_completion, "rank2_completion"},
      {Kind::attention_ts, "attention_ts"},
      {Kind::relu2, "relu2"},
      {Kind::circulant2, "circulant2"},
      {Kind::circulant_deep, "circulant_deep"},
      {Kind::cp_rank1, "cp_rank1"},
      {Kind::tt3, "tt3"},
      {Kind::block_group, "block_group"},
      {Kind::l1_hadamard, "l1_hadamard"},
      {Kind::pca, "pca"},
  };
  return names;
}

}  // namespace

std::string to_string(Kind kind) {
  for (const auto& [k, name] : kind_names()) {
    if (k == kind) return name;
  }
  throw InvalidArgument("unknown model kind");
}

Kind kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kind_names()) {
    if (name == n) return k;
  }
  throw InvalidArgument("unknown model kind '" + name + "'");
}

const std::vector<Kind>& all_kinds() {
  static const std::vector<Kind> kinds = [] {
    std::vector<Kind> out;
    for (const auto& entry : kind_names()) out.push_back(entry.first);
    return out;
  }();
  return kinds;
}

json default_params(Kind kind) {
  switch (kind) {
    case Kind::radial:
      return {{"d", 10}, {"init_radius", 1.0}};
    case Kind::fourier_sparse:
      return {{"variant", "pq"},          {"D", 64},         {"n_train", 30},
              {"noise_variance", 0.01},   {"n_test", 2000},  {"test_grid", "uniform"},
              {"n_active", 3},            {"coef_min", 1.0}, {"coef_max", 2.0},
              {"init_scale", 0.01}};
    case Kind::tv_recon:
      return {{"variant", "biased"}, {"d", 200},          {"jumps", 3},           {"m", 60},
              {"noise_variance", 0.025}, {"level_range", 2.0}, {"min_segment", 10}, {"init_scale", 0.01}};
    case Kind::multichannel:
      return {{"variant", "matrix"}, {"D", 30}, {"C", 20}, {"r", 2}, {"N", 200}, {"n_test", 2000},
              {"noise_variance", 0.04}, {"top_singular_value", 1.0}, {"inner_dim", 0}, {"init_scale", 1e-3}};
    case Kind::rank2_completion:
      return {{"n", 20}, {"m", 20}, {"sigma1", 3.0}, {"sigma2", 1.0}, {"mask_fraction", 0.4}, {"r", 2},
              {"init_scale", 0.1}};
    case Kind::attention_ts:
      return {{"L", 8}, {"d_model", 16}, {"d_head", 8}, {"n_train", 512}, {"n_test", 256},
              {"teacher_variance_scale", 0.5}, {"student_variance_scale", 1.0}};
    case Kind::relu2:
      return {{"p", 32}, {"n", 200}, {"mean", 2.0}, {"init_scale", 0.1}};
    case Kind::circulant2:
      return {{"N", 16}, {"n", 64}, {"init_scale", 0.3}};
    case Kind::circulant_deep:
      return {{"N", 16}, {"depth", 3}, {"n", 64}, {"init_scale", 0.3}};
    case Kind::cp_rank1:
      return {{"d1", 4}, {"d2", 5}, {"d3", 6}, {"init_scale", 0.3}};
    case Kind::tt3:
      return {{"n1", 4}, {"n2", 4}, {"n3", 4}, {"r1", 2}, {"r2", 2}, {"init_scale", 0.3}};
    case Kind::block_group:
      return {{"variant", "factorized"}, {"d", 200}, {"G", 40}, {"active_groups", 5}, {"n", 80},
              {"n_test", 2000}, {"coef_std", 3.0}, {"init_scale", 0.01}};
    case Kind::l1_hadamard:
      return {{"variant", "factorized"}, {"d", 200}, {"n", 80}, {"n_test", 2000}, {"support_fraction", 0.1},
              {"coef_std", 3.0}, {"init_scale", 0.01}};
    case Kind::pca:
      return {{"d", 6}, {"r", 3}, {"spectrum", {5.0, 4.0, 3.0, 2.0, 1.0, 0.5}}, {"n", 200}, {"init_scale", 0.3}};
  }
  throw InvalidArgument("unknown model kind");
}

json resolve_params(Kind kind, const json& params) {
  json out = default_params(kind);
  if (params.is_null()) return out;
  if (!params.is_object()) throw InvalidArgument("model params must be a JSON object");
  for (const auto& [key, value] : params.items()) {
    if (!out.contains(key)) {
      throw InvalidArgument("unknown parameter '" + key + "' for model kind " + to_string(kind));
    }
    const json& def = out[key];
    const bool ok = (def.is_number() && value.is_number()) || (def.is_string() && value.is_string()) ||
                    (def.is_array() && value.is_array());
    if (!ok) throw InvalidArgument("parameter '" + key + "' has the wrong type");
    out[key] = value;
  }
  return out;
}

const Matrix& DatasetSpec::array(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw InvalidArgument("dataset has no array '" + name + "'");
  return it->second;
}

void DatasetSpec::export_to(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json meta;
  meta["kind"] = to_string(kind);
  meta["seed"] = seed;
  meta["params"] = params;
  for (const auto& [name, m] : arrays) {
    meta["arrays"][name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"file", name + ".csv"}};
    std::ofstream out(dir / (name + ".csv"));
    if (!out) throw Error("cannot write " + (dir / (name + ".csv")).string());
    out << std::setprecision(17);
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
      out << '\n';
    }
  }
  std::ofstream out(dir / "dataset.json");
  out << meta.dump(2) << '\n';
}

DatasetSpec DatasetSpec::import_from(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json");
  if (!in) throw Error("cannot read " + (dir / "dataset.json").string());
  const json meta = json::parse(in);
  DatasetSpec data;
  data.kind = kind_from_string(meta.at("kind").get<std::string>());
  data.seed = meta.at("seed").get<std::uint64_t>();
  data.params = meta.at("params");
  if (meta.contains("arrays")) {
    for (const auto& [name, info] : meta["arrays"].items()) {
      const Index rows = info.at("rows").get<Index>();
      const Index cols = info.at("cols").get<Index>();
      Matrix m(rows, cols);
      std::ifstream csv(dir / info.at("file").get<std::string>());
      if (!csv) throw Error("missing array file for '" + name + "'");
      std::string line;
      for (Index i = 0; i < rows; ++i) {
        if (!std::getline(csv, line)) throw Error("array '" + name + "' is truncated");
        std::stringstream ss(line);
        std::string cell;
        for (Index j = 0; j < cols; ++j) {
          if (!std::getline(ss, cell, ',')) throw Error("array '" + name + "' has a short row");
          m(i, j) = std::stod(cell);
        }
      }
      data.arrays.emplace(name, std::move(m));
    }
  }
  return data;
}

Vector ModelSpec::block(const Vector& theta, const std::string& name) const {
  const auto& b = blocks.at(name);
  return theta.segment(b.offset, b.rows * b.cols);
}

Matrix ModelSpec::block_matrix(const Vector& theta, const std::string& name) const {
  return detail::as_matrix(theta, blocks.at(name));
}

DatasetSpec make_dataset(Kind kind, const json& params, std::uint64_t seed) {
  const json p = resolve_params(kind, params);
  using namespace detail;
  switch (kind) {
    case Kind::radial:
      return radial_dataset(p, seed);
    case Kind::fourier_sparse:
      return fourier_dataset(p, seed);
    case Kind::tv_recon:
      return tv_dataset(p, seed);
    case Kind::multichannel:
      return multichannel_dataset(p, seed);
    case Kind::rank2_completion:
      return rank2_dataset(p, seed);
    case Kind::attention_ts:
      return attention_dataset(p, seed);
    case Kind::relu2:
      return relu2_dataset(p, seed);
    case Kind::circulant2:
    case Kind::circulant_deep:
      return circulant_dataset(kind, p, seed);
    case Kind::cp_rank1:
      return cp_dataset(p, seed);
    case Kind::tt3:
      return tt_dataset(p, seed);
    case Kind::block_group:
      return block_dataset(p, seed);
    case Kind::l1_hadamard:
      return l1_dataset(p, seed);
    case Kind::pca:
      return pca_dataset(p, seed);
  }
  throw InvalidArgument("unknown model kind");
}

ModelSpec model_from_dataset(const DatasetSpec& data) {
  using namespace detail;
  ModelSpec spec;
  switch (data.kind) {
    case Kind::radial:
      spec = radial_model(data);
      break;
    case Kind::fourier_sparse:
      spec = fourier_model(data);
      break;
    case Kind::tv_recon:
      spec = tv_model(data);
      break;
    case Kind::multichannel:
      spec = multichannel_model(data);
      break;
    case Kind::rank2_completion:
      spec = rank2_model(data);
      break;
    case Kind::attention_ts:
      spec = attention_model(data);
      break;
    case Kind::relu2:
      spec = relu2_model(data);
      break;
    case Kind::circulant2:
    case Kind::circulant_deep:
      spec = circulant_model(data);
      break;
    case Kind::cp_rank1:
      spec = cp_model(data);
      break;
    case Kind::tt3:
      spec = tt_model(data);
      break;
    case Kind::block_group:
      spec = block_model(data);
      break;
    case Kind::l1_hadamard:
      spec = l1_model(data);
      break;
    case Kind::pca:
      spec = pca_model(data);
      break;
  }
  spec.kind = data.kind;
  spec.param_dim = spec.model->param_dim();
  if (spec.init.size() != spec.param_dim) throw Error("internal: init has wrong dimension");
  return spec;
}

std::pair<ModelSpec, DatasetSpec> build_model(Kind kind, const json& params, std::uint64_t seed) {
  DatasetSpec data = make_dataset(kind, params, seed);
  ModelSpec spec = model_from_dataset(data);
  return {std::move(spec), std::move(data)};
}

NamedValues eval_invariants(const ModelSpec& spec, const Vector& theta) {
  if (theta.size() != spec.param_dim) throw InvalidArgument("eval_invariants: theta has wrong dimension");
  return spec.model->invariants(theta);
}

Matrix kaiming_like_init(Index fan_in, Index fan_out, double variance_scale, std::uint64_t seed) {
  if (fan_in < 1 || fan_out < 1) throw InvalidArgument("kaiming_like_init: dimensions must be positive");
  if (variance_scale < 0.0) throw InvalidArgument("kaiming_like_init: negative variance scale");
  Rng rng(seed);
  return linalg::random_normal(fan_in, fan_out, rng, std::sqrt(variance_scale * 2.0 / static_cast<double>(fan_in)));
}

Matrix circulant(const Vector& c) {
  const Index n = c.size();
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) m(i, k) = c(((i - k) % n + n) % n);
  }
  return m;
}

Matrix frequency_projector(Index n, Index k) {
  if (k < 0 || 2 * k > n) throw InvalidArgument("frequency_projector: frequency out of range");
  Vector c(n);
  Vector s(n);
  for (Index i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n);
    c(i) = std::cos(phase);
    s(i) = std::sin(phase);
  }
  Matrix p = c * c.transpose() / c.squaredNorm();
  if (s.norm() > 1e-9) p += s * s.transpose() / s.squaredNorm();
  return p;
}

std::pair<double, double> dft_coefficient(const Vector& x, Index k) {
  double re = 0.0;
  double im = 0.0;
  const Index n = x.size();
  for (Index i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
    re += x(i) * std::cos(phase);
    im -= x(i) * std::sin(phase);
  }
  return {re, im};
}

Matrix cumulative_sum_operator(Index d) {
  if (d < 2) throw InvalidArgument("cumulative_sum_operator: need d >= 2");
  Matrix c = Matrix::Zero(d, d - 1);
  for (Index i = 0; i < d; ++i) {
    for (Index k = 0; k < i; ++k) c(i, k) = 1.0;
  }
  return c;
}

namespace detail {

double get_real(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_number()) throw InvalidArgument(std::string("missing numeric parameter ") + key);
  const double v = p[key].get<double>();
  if (!std::isfinite(v)) throw InvalidArgument(std::string("parameter ") + key + " is not finite");
  return v;
}

Index get_count(const json& p, const char* key, Index min_value) {
  const double v = get_real(p, key);
  if (v != std::floor(v) || v < static_cast<double>(min_value)) {
    throw InvalidArgument(std::string("parameter ") + key + " must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<Index>(v);
}

std::string get_string(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_string()) throw InvalidArgument(std::string("missing string parameter ") + key);
  return p[key].get<std::string>();
}

std::vector<Index> index_range(Index begin, Index end) {
  std::vector<Index> out;
  for (Index i = begin; i < end; ++i) out.push_back(i);
  return out;
}

std::string indexed(const std::string& name, Index i) { return name + "[" + std::to_string(i) + "]"; }

std::string indexed(const std::string& name, Index i, Index j) {
  return name + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
}

void put_vector(NamedValues& out, const std::string& name, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out[indexed(name, i)] = v(i);
}

void put_matrix(NamedValues& out, const std::string& name, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out[indexed(name, i, j)] = m(i, j);
  }
}

Matrix as_matrix(const Vector& theta, const symmetry::MatrixBlock& b) {
  return Eigen::Map<const Matrix>(theta.data() + b.offset, b.rows, b.cols);
}

void write_block(Vector& theta, const symmetry::MatrixBlock& b, const Matrix& m) {
  Eigen::Map<Matrix>(theta.data() + b.offset, b.rows, b.cols) = m;
}

symmetry::GeneratorSet concat(std::string label, const std::vector<symmetry::GeneratorSet>& sets) {
  symmetry::GeneratorSet out{std::move(label), {}};
  for (const auto& s : sets) out.generators.insert(out.generators.end(), s.generators.begin(), s.generators.end());
  return out;
}

Vector small_gaussian(Index n, double scale, std::uint64_t seed) {
  Rng rng = stream(seed, kInit);
  return linalg::random_normal(n, rng, scale);
}

}  // namespace detail
}  // namespace orbitlab::models
