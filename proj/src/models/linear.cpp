#include "internal.hpp"

#include "orbitlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

namespace orbitlab::models::detail {

namespace {

enum class Reparam { direct, hadamard, block };

struct LinearProblem {
  Matrix X;  // N x D
  Vector y;
  Matrix X_test;
  Vector y_test;
  Reparam reparam = Reparam::direct;
  Index free_prefix = 0;
  std::vector<Index> groups;
  Index num_groups = 0;
  std::optional<Matrix> signal;  // omega = signal * w
  std::optional<Vector> signal_truth;
  double active_threshold = 0.2;
};

/// Linear regression y ~ x^T w(theta) under a coordinate reparameterization:
/// direct (theta = w), Hadamard (w = [free; u * v]) or blockwise (w_i = s_g(i) t_i).
class ReparamLinear final : public Model {
 public:
  explicit ReparamLinear(LinearProblem p) : p_(std::move(p)), xt_(p_.X.transpose()) {
    d_ = p_.X.cols();
    switch (p_.reparam) {
      case Reparam::direct:
        n_ = d_;
        break;
      case Reparam::hadamard:
        n_ = p_.free_prefix + 2 * (d_ - p_.free_prefix);
        break;
      case Reparam::block:
        n_ = p_.num_groups + d_;
        break;
    }
  }

  Index param_dim() const override { return n_; }
  Index num_samples() const override { return p_.X.rows(); }

  Vector weights(const Vector& theta) const {
    switch (p_.reparam) {
      case Reparam::direct:
        return theta;
      case Reparam::hadamard: {
        const Index k = p_.free_prefix;
        const Index h = d_ - k;
        Vector w(d_);
        w.head(k) = theta.head(k);
        w.tail(h) = theta.segment(k, h).cwiseProduct(theta.segment(k + h, h));
        return w;
      }
      case Reparam::block: {
        Vector w(d_);
        for (Index i = 0; i < d_; ++i) w(i) = theta(p_.groups[static_cast<std::size_t>(i)]) * theta(p_.num_groups + i);
        return w;
      }
    }
    return theta;
  }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    const Vector w = weights(theta);
    double loss = 0.0;
    Vector gw = Vector::Zero(d_);
    for (Index i : batch) {
      const double r = xt_.col(i).dot(w) - p_.y(i);
      loss += 0.5 * r * r;
      if (grad) gw.noalias() += r * xt_.col(i);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (grad) {
      gw *= inv;
      grad->resize(n_);
      switch (p_.reparam) {
        case Reparam::direct:
          *grad = gw;
          break;
        case Reparam::hadamard: {
          const Index k = p_.free_prefix;
          const Index h = d_ - k;
          grad->head(k) = gw.head(k);
          grad->segment(k, h) = gw.tail(h).cwiseProduct(theta.segment(k + h, h));
          grad->segment(k + h, h) = gw.tail(h).cwiseProduct(theta.segment(k, h));
          break;
        }
        case Reparam::block: {
          grad->setZero();
          for (Index i = 0; i < d_; ++i) {
            const Index g = p_.groups[static_cast<std::size_t>(i)];
            (*grad)(g) += gw(i) * theta(p_.num_groups + i);
            (*grad)(p_.num_groups + i) = gw(i) * theta(g);
          }
          break;
        }
      }
    }
    return loss * inv;
  }

  NamedValues invariants(const Vector& theta) const override {
    NamedValues out;
    put_vector(out, "w", weights(theta));
    return out;
  }

  std::vector<std::string> observable_names() const override {
    std::vector<std::string> names = {"loss", "train_mse", "l1", "l2"};
    if (p_.X_test.rows() > 0) names.push_back("test_mse");
    if (p_.signal) names.push_back("tv");
    if (p_.signal_truth) names.push_back("recon_mse");
    if (p_.reparam == Reparam::block || !p_.groups.empty()) {
      names.push_back("group_norm_sum");
      names.push_back("active_fraction");
    }
    return names;
  }

  double observe(const std::string& name, const Vector& theta) const override {
    if (name == "loss") return loss(theta);
    const Vector w = weights(theta);
    if (name == "train_mse") return (p_.X * w - p_.y).squaredNorm() / static_cast<double>(p_.X.rows());
    if (name == "test_mse" && p_.X_test.rows() > 0) {
      return (p_.X_test * w - p_.y_test).squaredNorm() / static_cast<double>(p_.X_test.rows());
    }
    const Vector tail = w.tail(d_ - p_.free_prefix);
    if (name == "l1") return tail.lpNorm<1>();
    if (name == "l2") return tail.norm();
    if (name == "tv" && p_.signal) {
      const Vector omega = *p_.signal * w;
      return (omega.tail(omega.size() - 1) - omega.head(omega.size() - 1)).lpNorm<1>();
    }
    if (name == "recon_mse" && p_.signal_truth) {
      const Vector omega = p_.signal ? Vector(*p_.signal * w) : w;
      return (omega - *p_.signal_truth).squaredNorm() / static_cast<double>(omega.size());
    }
    if ((name == "group_norm_sum" || name == "active_fraction") && !p_.groups.empty()) {
      Vector norms = Vector::Zero(p_.num_groups);
      for (Index i = 0; i < d_; ++i) norms(p_.groups[static_cast<std::size_t>(i)]) += w(i) * w(i);
      norms = norms.cwiseSqrt();
      if (name == "group_norm_sum") return norms.sum();
      return static_cast<double>((norms.array() > p_.active_threshold).count()) / static_cast<double>(p_.num_groups);
    }
    throw InvalidArgument("unknown observable '" + name + "'");
  }

 private:
  LinearProblem p_;
  Matrix xt_;
  Index d_ = 0;
  Index n_ = 0;
};

ModelSpec finish(LinearProblem problem, const std::string& variant, double init_scale, std::uint64_t seed) {
  ModelSpec spec;
  spec.variant = variant;
  const Index d = problem.X.cols();
  const Reparam reparam = problem.reparam;
  const Index k = problem.free_prefix;
  const Index g = problem.num_groups;
  std::vector<Index> groups = problem.groups;
  auto model = std::make_shared<ReparamLinear>(std::move(problem));
  spec.init = small_gaussian(model->param_dim(), init_scale, seed);
  switch (reparam) {
    case Reparam::direct:
      spec.generators = {"trivial", {}};
      spec.blocks["w"] = {0, d, 1};
      break;
    case Reparam::hadamard: {
      const Index h = d - k;
      std::vector<symmetry::ScalingGroup> sg;
      for (Index i = 0; i < h; ++i) sg.push_back({{k + i}, {k + h + i}, 1.0});
      spec.generators = symmetry::scaling_generators("(R>0)^" + std::to_string(h) + " coordinate scaling", sg);
      spec.gauge = symmetry::metric_dual_gauge(spec.generators);
      if (k > 0) {
        spec.blocks["free"] = {0, k, 1};
        spec.init.head(k).setZero();
      }
      spec.blocks["u"] = {k, h, 1};
      spec.blocks["v"] = {k + h, h, 1};
      break;
    }
    case Reparam::block: {
      std::vector<symmetry::ScalingGroup> sg(static_cast<std::size_t>(g));
      for (Index j = 0; j < g; ++j) sg[static_cast<std::size_t>(j)].up = {j};
      for (Index i = 0; i < d; ++i) sg[static_cast<std::size_t>(groups[static_cast<std::size_t>(i)])].down.push_back(g + i);
      spec.generators = symmetry::scaling_generators("(R>0)^" + std::to_string(g) + " blockwise scaling", sg);
      spec.gauge = symmetry::metric_dual_gauge(spec.generators);
      spec.blocks["s"] = {0, g, 1};
      spec.blocks["t"] = {g, d, 1};
      break;
    }
  }
  spec.model = std::move(model);
  return spec;
}

Matrix cosine_design(const Vector& t, Index dim) {
  Matrix x(t.size(), dim);
  for (Index i = 0; i < t.size(); ++i) {
    for (Index k = 0; k < dim; ++k) x(i, k) = std::cos(2.0 * std::numbers::pi * static_cast<double>(k) * t(i));
  }
  return x;
}

std::vector<Index> choose_distinct(Rng& rng, Index population, Index count, Index offset = 0) {
  std::vector<Index> pool(static_cast<std::size_t>(population));
  std::iota(pool.begin(), pool.end(), offset);
  for (Index i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(population - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Vector as_vector(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

void require_variant(const std::string& v, std::initializer_list<const char*> allowed, const char* kind) {
  for (const char* a : allowed) {
    if (v == a) return;
  }
  throw InvalidArgument(std::string("unknown variant '") + v + "' for " + kind);
}

}  // namespace

DatasetSpec fourier_dataset(const json& p, std::uint64_t seed) {
  const Index dim = get_count(p, "D", 2);
  const Index n_train = get_count(p, "n_train");
  const Index n_test = get_count(p, "n_test");
  const Index n_active = get_count(p, "n_active");
  if (n_active > dim - 1) throw InvalidArgument("fourier_sparse: n_active exceeds the number of positive frequencies");
  const double lo = get_real(p, "coef_min");
  const double hi = get_real(p, "coef_max");
  const std::string grid = get_string(p, "test_grid");
  require_variant(get_string(p, "variant"), {"naive", "pq"}, "fourier_sparse");
  if (grid != "uniform" && grid != "random") throw InvalidArgument("fourier_sparse: test_grid must be uniform or random");

  Rng rng = stream(seed, kData);
  Vector w_true = Vector::Zero(dim);
  for (Index k : choose_distinct(rng, dim - 1, n_active, 1)) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    w_true(k) = sign * rng.uniform(lo, hi);
  }
  Vector t(n_train);
  for (Index i = 0; i < n_train; ++i) t(i) = rng.uniform();
  Rng noise = stream(seed, kNoise);
  const Matrix x = cosine_design(t, dim);
  Vector y = x * w_true;
  const double sd = std::sqrt(get_real(p, "noise_variance"));
  for (Index i = 0; i < n_train; ++i) y(i) += sd * noise.normal();

  Vector t_test(n_test);
  Rng test = stream(seed, kTest);
  for (Index i = 0; i < n_test; ++i) {
    t_test(i) = grid == "uniform" ? (n_test > 1 ? static_cast<double>(i) / static_cast<double>(n_test - 1) : 0.5)
                                  : test.uniform();
  }
  const Matrix x_test = cosine_design(t_test, dim);

  DatasetSpec data{Kind::fourier_sparse, seed, p, {}};
  data.arrays["w_true"] = w_true;
  data.arrays["t"] = t;
  data.arrays["X"] = x;
  data.arrays["y"] = y;
  data.arrays["t_test"] = t_test;
  data.arrays["X_test"] = x_test;
  data.arrays["y_test"] = x_test * w_true;
  return data;
}

ModelSpec fourier_model(const DatasetSpec& d) {
  LinearProblem lp;
  lp.X = d.array("X");
  lp.y = as_vector(d.array("y"));
  lp.X_test = d.array("X_test");
  lp.y_test = as_vector(d.array("y_test"));
  const std::string variant = get_string(d.params, "variant");
  lp.reparam = variant == "pq" ? Reparam::hadamard : Reparam::direct;
  return finish(std::move(lp), variant, get_real(d.params, "init_scale"), d.seed);
}

DatasetSpec tv_dataset(const json& p, std::uint64_t seed) {
  const Index dim = get_count(p, "d", 4);
  const Index jumps = get_count(p, "jumps", 0);
  const Index m = get_count(p, "m");
  const Index min_seg = get_count(p, "min_segment");
  const double range = get_real(p, "level_range");
  require_variant(get_string(p, "variant"), {"naive", "biased"}, "tv_recon");
  if ((jumps + 1) * min_seg > dim) throw InvalidArgument("tv_recon: segments do not fit in d");

  Rng rng = stream(seed, kData);
  // Jump positions with every segment at least min_seg long.
  const Index slack = dim - (jumps + 1) * min_seg;
  std::vector<Index> cuts = choose_distinct(rng, slack + jumps, jumps);
  Vector omega(dim);
  std::vector<Index> edges = {0};
  for (Index j = 0; j < jumps; ++j) edges.push_back(cuts[static_cast<std::size_t>(j)] - j + (j + 1) * min_seg);
  edges.push_back(dim);
  double level = rng.uniform(-range, range);
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    if (s > 0) {
      double next = level;
      while (std::abs(next - level) < 0.25 * range) next = rng.uniform(-range, range);
      level = next;
    }
    for (Index i = edges[s]; i < edges[s + 1]; ++i) omega(i) = level;
  }
  const Matrix q = linalg::random_normal(m, dim, rng, 1.0 / std::sqrt(static_cast<double>(m)));
  Rng noise = stream(seed, kNoise);
  Vector y = q * omega;
  const double sd = std::sqrt(get_real(p, "noise_variance"));
  for (Index i = 0; i < m; ++i) y(i) += sd * noise.normal();

  DatasetSpec data{Kind::tv_recon, seed, p, {}};
  data.arrays["omega_true"] = omega;
  data.arrays["Q"] = q;
  data.arrays["y"] = y;
  return data;
}

ModelSpec tv_model(const DatasetSpec& d) {
  const Matrix& q = d.array("Q");
  const Index dim = q.cols();
  LinearProblem lp;
  lp.y = as_vector(d.array("y"));
  lp.signal_truth = as_vector(d.array("omega_true"));
  const std::string variant = get_string(d.params, "variant");
  if (variant == "biased") {
    // omega = b 1 + C g with g = p * q; the offset b is the learnable integration constant.
    Matrix s(dim, dim);
    s.col(0).setOnes();
    s.rightCols(dim - 1) = cumulative_sum_operator(dim);
    lp.X = q * s;
    lp.signal = s;
    lp.reparam = Reparam::hadamard;
    lp.free_prefix = 1;
  } else {
    lp.X = q;
    lp.signal = Matrix::Identity(dim, dim);
    lp.reparam = Reparam::direct;
  }
  return finish(std::move(lp), variant, get_real(d.params, "init_scale"), d.seed);
}

DatasetSpec l1_dataset(const json& p, std::uint64_t seed) {
  const Index dim = get_count(p, "d");
  const Index n = get_count(p, "n");
  const Index n_test = get_count(p, "n_test");
  const double frac = get_real(p, "support_fraction");
  require_variant(get_string(p, "variant"), {"vanilla", "factorized"}, "l1_hadamard");
  const Index support = static_cast<Index>(std::llround(frac * static_cast<double>(dim)));
  if (support < 1 || support > dim) throw InvalidArgument("l1_hadamard: support_fraction out of range");

  Rng rng = stream(seed, kData);
  Vector w_true = Vector::Zero(dim);
  const double sd = get_real(p, "coef_std");
  for (Index i : choose_distinct(rng, dim, support)) w_true(i) = sd * rng.normal();
  const Matrix x = linalg::random_normal(n, dim, rng);
  Rng test = stream(seed, kTest);
  const Matrix x_test = linalg::random_normal(n_test, dim, test);

  DatasetSpec data{Kind::l1_hadamard, seed, p, {}};
  data.arrays["w_true"] = w_true;
  data.arrays["X"] = x;
  data.arrays["y"] = x * w_true;
  data.arrays["X_test"] = x_test;
  data.arrays["y_test"] = x_test * w_true;
  return data;
}

ModelSpec l1_model(const DatasetSpec& d) {
  LinearProblem lp;
  lp.X = d.array("X");
  lp.y = as_vector(d.array("y"));
  lp.X_test = d.array("X_test");
  lp.y_test = as_vector(d.array("y_test"));
  const std::string variant = get_string(d.params, "variant");
  lp.reparam = variant == "factorized" ? Reparam::hadamard : Reparam::direct;
  return finish(std::move(lp), variant, get_real(d.params, "init_scale"), d.seed);
}

DatasetSpec block_dataset(const json& p, std::uint64_t seed) {
  const Index dim = get_count(p, "d");
  const Index g = get_count(p, "G");
  const Index active = get_count(p, "active_groups", 0);
  const Index n = get_count(p, "n");
  const Index n_test = get_count(p, "n_test");
  require_variant(get_string(p, "variant"), {"vanilla", "factorized"}, "block_group");
  if (dim % g != 0) throw InvalidArgument("block_group: d must be divisible by G");
  if (active > g) throw InvalidArgument("block_group: more active groups than groups");

  Rng rng = stream(seed, kData);
  // Random partition into G groups of equal size.
  std::vector<Index> perm = index_range(0, dim);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  Vector groups(dim);
  for (Index i = 0; i < dim; ++i) groups(perm[static_cast<std::size_t>(i)]) = static_cast<double>(i / (dim / g));
  Vector w_true = Vector::Zero(dim);
  const double sd = get_real(p, "coef_std");
  const std::vector<Index> on = choose_distinct(rng, g, active);
  for (Index i = 0; i < dim; ++i) {
    if (std::find(on.begin(), on.end(), static_cast<Index>(groups(i))) != on.end()) w_true(i) = sd * rng.normal();
  }
  const Matrix x = linalg::random_normal(n, dim, rng);
  Rng test = stream(seed, kTest);
  const Matrix x_test = linalg::random_normal(n_test, dim, test);

  DatasetSpec data{Kind::block_group, seed, p, {}};
  data.arrays["groups"] = groups;
  data.arrays["w_true"] = w_true;
  data.arrays["X"] = x;
  data.arrays["y"] = x * w_true;
  data.arrays["X_test"] = x_test;
  data.arrays["y_test"] = x_test * w_true;
  return data;
}

ModelSpec block_model(const DatasetSpec& d) {
  LinearProblem lp;
  lp.X = d.array("X");
  lp.y = as_vector(d.array("y"));
  lp.X_test = d.array("X_test");
  lp.y_test = as_vector(d.array("y_test"));
  const Vector groups = as_vector(d.array("groups"));
  for (Index i = 0; i < groups.size(); ++i) lp.groups.push_back(static_cast<Index>(groups(i)));
  lp.num_groups = get_count(d.params, "G");
  const std::string variant = get_string(d.params, "variant");
  lp.reparam = variant == "factorized" ? Reparam::block : Reparam::direct;
  return finish(std::move(lp), variant, get_real(d.params, "init_scale"), d.seed);
}

}  // namespace orbitlab::models::detail
