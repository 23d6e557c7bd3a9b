#include "internal.hpp"

#include "orbitlab/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace orbitlab::models::detail {

namespace {

/// Mode energies log(a_i + b_i) from the descending eigenvalues of U^T U and V^T V.
Vector mode_energies(const Matrix& u, const Matrix& v) {
  Vector a = linalg::sym_eig(u.transpose() * u).values.reverse();
  Vector b = linalg::sym_eig(v.transpose() * v).values.reverse();
  return (a + b).array().log();
}

enum class Factor { naive, scalar, matrix };

/// Multi-output least squares Y ~ X W with W = W, P * Q or P V^T.
class Multichannel final : public Model {
 public:
  Multichannel(Matrix x, Matrix y, Matrix x_test, Matrix y_test, Factor f, Index inner)
      : x_(std::move(x)), y_(std::move(y)), x_test_(std::move(x_test)), y_test_(std::move(y_test)), f_(f) {
    d_ = x_.cols();
    c_ = y_.cols();
    k_ = inner;
    switch (f_) {
      case Factor::naive:
        n_ = d_ * c_;
        break;
      case Factor::scalar:
        n_ = 2 * d_ * c_;
        break;
      case Factor::matrix:
        n_ = (d_ + c_) * k_;
        break;
    }
  }

  Index param_dim() const override { return n_; }
  Index num_samples() const override { return x_.rows(); }

  Matrix weights(const Vector& theta) const {
    const Index dc = d_ * c_;
    switch (f_) {
      case Factor::naive:
        return Eigen::Map<const Matrix>(theta.data(), d_, c_);
      case Factor::scalar:
        return Eigen::Map<const Matrix>(theta.data(), d_, c_).cwiseProduct(Eigen::Map<const Matrix>(theta.data() + dc, d_, c_));
      case Factor::matrix:
        return Eigen::Map<const Matrix>(theta.data(), d_, k_) *
               Eigen::Map<const Matrix>(theta.data() + d_ * k_, c_, k_).transpose();
    }
    return {};
  }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    const Index b = static_cast<Index>(batch.size());
    Matrix xb(b, d_);
    Matrix yb(b, c_);
    for (Index i = 0; i < b; ++i) {
      xb.row(i) = x_.row(batch[static_cast<std::size_t>(i)]);
      yb.row(i) = y_.row(batch[static_cast<std::size_t>(i)]);
    }
    const Matrix w = weights(theta);
    const Matrix r = xb * w - yb;
    const double loss = 0.5 * r.squaredNorm() / static_cast<double>(b);
    if (grad) {
      const Matrix gw = xb.transpose() * r / static_cast<double>(b);
      grad->resize(n_);
      const Index dc = d_ * c_;
      switch (f_) {
        case Factor::naive:
          Eigen::Map<Matrix>(grad->data(), d_, c_) = gw;
          break;
        case Factor::scalar:
          Eigen::Map<Matrix>(grad->data(), d_, c_) = gw.cwiseProduct(Eigen::Map<const Matrix>(theta.data() + dc, d_, c_));
          Eigen::Map<Matrix>(grad->data() + dc, d_, c_) = gw.cwiseProduct(Eigen::Map<const Matrix>(theta.data(), d_, c_));
          break;
        case Factor::matrix: {
          const auto p = Eigen::Map<const Matrix>(theta.data(), d_, k_);
          const auto v = Eigen::Map<const Matrix>(theta.data() + d_ * k_, c_, k_);
          Eigen::Map<Matrix>(grad->data(), d_, k_) = gw * v;
          Eigen::Map<Matrix>(grad->data() + d_ * k_, c_, k_) = gw.transpose() * p;
          break;
        }
      }
    }
    return loss;
  }

  NamedValues invariants(const Vector& theta) const override {
    NamedValues out;
    put_matrix(out, "W", weights(theta));
    return out;
  }

  std::vector<std::string> observable_names() const override {
    return {"loss", "train_mse", "test_mse", "effective_rank", "nuclear_norm"};
  }

  double observe(const std::string& name, const Vector& theta) const override {
    if (name == "loss") return loss(theta);
    const Matrix w = weights(theta);
    if (name == "train_mse") return (x_ * w - y_).squaredNorm() / static_cast<double>(y_.size());
    if (name == "test_mse") return (x_test_ * w - y_test_).squaredNorm() / static_cast<double>(y_test_.size());
    const Vector sv = linalg::svd(w).sigma;
    if (name == "nuclear_norm") return sv.sum();
    if (name == "effective_rank") {
      if (sv.size() == 0 || sv(0) <= 0.0) return 0.0;
      return static_cast<double>((sv.array() >= 0.05 * sv(0)).count());
    }
    throw InvalidArgument("unknown observable '" + name + "'");
  }

 private:
  Matrix x_, y_, x_test_, y_test_;
  Factor f_;
  Index d_ = 0, c_ = 0, k_ = 0, n_ = 0;
};

/// Matrix completion with M = U V^T on observed entries.
class Completion final : public Model {
 public:
  Completion(Matrix target, std::vector<std::pair<Index, Index>> observed, Index r)
      : target_(std::move(target)), obs_(std::move(observed)), r_(r) {
    u_ = {0, target_.rows(), r_};
    v_ = {target_.rows() * r_, target_.cols(), r_};
  }

  Index param_dim() const override { return (target_.rows() + target_.cols()) * r_; }
  Index num_samples() const override { return static_cast<Index>(obs_.size()); }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    if (grad) grad->setZero(param_dim());
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (Index s : batch) {
      const auto [i, j] = obs_[static_cast<std::size_t>(s)];
      double pred = 0.0;
      for (Index c = 0; c < r_; ++c) pred += theta(u_.at(i, c)) * theta(v_.at(j, c));
      const double res = pred - target_(i, j);
      loss += 0.5 * res * res;
      if (grad) {
        for (Index c = 0; c < r_; ++c) {
          (*grad)(u_.at(i, c)) += inv * res * theta(v_.at(j, c));
          (*grad)(v_.at(j, c)) += inv * res * theta(u_.at(i, c));
        }
      }
    }
    return loss * inv;
  }

  Matrix product(const Vector& theta) const { return as_matrix(theta, u_) * as_matrix(theta, v_).transpose(); }

  NamedValues invariants(const Vector& theta) const override {
    NamedValues out;
    put_matrix(out, "Z", product(theta));
    return out;
  }

  std::vector<std::string> observable_names() const override {
    std::vector<std::string> names = {"loss", "train_mse", "completion_mse"};
    for (Index c = 0; c < r_; ++c) names.push_back("energy_" + std::to_string(c + 1));
    return names;
  }

  double observe(const std::string& name, const Vector& theta) const override {
    if (name == "loss") return loss(theta);
    if (name == "train_mse") return 2.0 * loss(theta);
    if (name == "completion_mse") return (product(theta) - target_).squaredNorm() / static_cast<double>(target_.size());
    if (name.rfind("energy_", 0) == 0) {
      const Index c = std::stol(name.substr(7)) - 1;
      if (c >= 0 && c < r_) return mode_energies(as_matrix(theta, u_), as_matrix(theta, v_))(c);
    }
    throw InvalidArgument("unknown observable '" + name + "'");
  }

 private:
  Matrix target_;
  std::vector<std::pair<Index, Index>> obs_;
  Index r_;
  symmetry::MatrixBlock u_, v_;
};

}  // namespace

DatasetSpec multichannel_dataset(const json& p, std::uint64_t seed) {
  const Index d = get_count(p, "D");
  const Index c = get_count(p, "C");
  const Index r = get_count(p, "r");
  const Index n = get_count(p, "N");
  const Index n_test = get_count(p, "n_test");
  const std::string variant = get_string(p, "variant");
  if (variant != "naive" && variant != "scalar" && variant != "matrix") {
    throw InvalidArgument("unknown variant '" + variant + "' for multichannel");
  }
  if (r > std::min(d, c)) throw InvalidArgument("multichannel: r exceeds min(D, C)");
  const Index inner = get_count(p, "inner_dim", 0);
  if (inner > std::min(d, c)) throw InvalidArgument("multichannel: inner_dim exceeds min(D, C)");

  Rng rng = stream(seed, kTeacher);
  const Matrix p_true = linalg::random_normal(d, r, rng);
  const Matrix q_true = linalg::random_normal(r, c, rng);
  Matrix w_true = p_true * q_true;
  w_true *= get_real(p, "top_singular_value") / linalg::svd(w_true).sigma(0);

  Rng data_rng = stream(seed, kData);
  const Matrix x = linalg::random_normal(n, d, data_rng);
  Rng noise = stream(seed, kNoise);
  const Matrix y = x * w_true + linalg::random_normal(n, c, noise, std::sqrt(get_real(p, "noise_variance")));
  Rng test = stream(seed, kTest);
  const Matrix x_test = linalg::random_normal(n_test, d, test);

  DatasetSpec data{Kind::multichannel, seed, p, {}};
  data.arrays["W_true"] = w_true;
  data.arrays["X"] = x;
  data.arrays["Y"] = y;
  data.arrays["X_test"] = x_test;
  data.arrays["Y_test"] = x_test * w_true;
  return data;
}

ModelSpec multichannel_model(const DatasetSpec& d) {
  const std::string variant = get_string(d.params, "variant");
  const Matrix& x = d.array("X");
  const Matrix& y = d.array("Y");
  const Index dd = x.cols();
  const Index c = y.cols();
  Index k = get_count(d.params, "inner_dim", 0);
  if (k == 0) k = std::min(dd, c);
  const Factor f = variant == "naive" ? Factor::naive : variant == "scalar" ? Factor::scalar : Factor::matrix;

  ModelSpec spec;
  spec.variant = variant;
  auto model = std::make_shared<Multichannel>(x, y, d.array("X_test"), d.array("Y_test"), f, k);
  spec.init = small_gaussian(model->param_dim(), get_real(d.params, "init_scale"), d.seed);
  switch (f) {
    case Factor::naive:
      spec.generators = {"trivial", {}};
      spec.blocks["W"] = {0, dd, c};
      break;
    case Factor::scalar: {
      std::vector<symmetry::ScalingGroup> groups;
      for (Index i = 0; i < dd * c; ++i) groups.push_back({{i}, {dd * c + i}, 1.0});
      spec.generators = symmetry::scaling_generators("(R>0)^" + std::to_string(dd * c) + " coordinate scaling", groups);
      spec.gauge = symmetry::metric_dual_gauge(spec.generators);
      spec.blocks["P"] = {0, dd, c};
      spec.blocks["Q"] = {dd * c, dd, c};
      break;
    }
    case Factor::matrix:
      spec.blocks["P"] = {0, dd, k};
      spec.blocks["V"] = {dd * k, c, k};
      spec.generators = symmetry::gl_generators(spec.blocks["P"], spec.blocks["V"], true);
      spec.gauge = symmetry::metric_dual_gauge(spec.generators);
      break;
  }
  spec.model = std::move(model);
  return spec;
}

DatasetSpec rank2_dataset(const json& p, std::uint64_t seed) {
  const Index n = get_count(p, "n");
  const Index m = get_count(p, "m");
  const Index r = get_count(p, "r");
  const double s1 = get_real(p, "sigma1");
  const double s2 = get_real(p, "sigma2");
  const double frac = get_real(p, "mask_fraction");
  if (!(s1 > s2 && s2 > 0.0)) throw InvalidArgument("rank2_completion: need sigma1 > sigma2 > 0");
  if (std::min(n, m) < 2 || r < 2) throw InvalidArgument("rank2_completion: dimensions too small for rank 2");
  if (!(frac > 0.0 && frac <= 1.0)) throw InvalidArgument("rank2_completion: mask_fraction must lie in (0, 1]");

  Rng rng = stream(seed, kTeacher);
  const Matrix q = linalg::random_orthonormal(n, 2, rng);
  const Matrix pm = linalg::random_orthonormal(m, 2, rng);
  const Matrix target = q * Vector{{s1, s2}}.asDiagonal() * pm.transpose();

  Rng mask_rng = stream(seed, kMask);
  const Index total = n * m;
  const Index k = static_cast<Index>(std::llround(frac * static_cast<double>(total)));
  std::vector<Index> cells = index_range(0, total);
  for (Index i = 0; i < k; ++i) {
    std::swap(cells[static_cast<std::size_t>(i)],
              cells[static_cast<std::size_t>(i) + mask_rng.below(static_cast<std::uint64_t>(total - i))]);
  }
  cells.resize(static_cast<std::size_t>(k));
  std::sort(cells.begin(), cells.end());
  Matrix observed(k, 2);
  Matrix mask = Matrix::Zero(n, m);
  for (Index s = 0; s < k; ++s) {
    const Index cell = cells[static_cast<std::size_t>(s)];
    observed(s, 0) = static_cast<double>(cell / m);
    observed(s, 1) = static_cast<double>(cell % m);
    mask(cell / m, cell % m) = 1.0;
  }

  DatasetSpec data{Kind::rank2_completion, seed, p, {}};
  data.arrays["M_star"] = target;
  data.arrays["observed"] = observed;
  data.arrays["mask"] = mask;
  return data;
}

ModelSpec rank2_model(const DatasetSpec& d) {
  const Matrix& target = d.array("M_star");
  const Matrix& observed = d.array("observed");
  const Index r = get_count(d.params, "r");
  std::vector<std::pair<Index, Index>> obs;
  for (Index s = 0; s < observed.rows(); ++s) {
    obs.emplace_back(static_cast<Index>(observed(s, 0)), static_cast<Index>(observed(s, 1)));
  }
  ModelSpec spec;
  spec.variant = "factorized";
  auto model = std::make_shared<Completion>(target, std::move(obs), r);
  spec.init = small_gaussian(model->param_dim(), get_real(d.params, "init_scale"), d.seed);
  spec.blocks["U"] = {0, target.rows(), r};
  spec.blocks["V"] = {target.rows() * r, target.cols(), r};
  spec.generators = symmetry::gl_generators(spec.blocks["U"], spec.blocks["V"], true);
  spec.gauge = symmetry::metric_dual_gauge(spec.generators);
  spec.model = std::move(model);
  return spec;
}

}  // namespace orbitlab::models::detail
