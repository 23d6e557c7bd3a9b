#include "internal.hpp"

#include "orbitlab/linalg.hpp"

#include <cmath>

namespace orbitlab::models::detail {

namespace {

/// l(omega) = (r - 1)^2 / 2 with r = |omega|.
class Radial final : public Model {
 public:
  explicit Radial(Index d) : d_(d) {}

  Index param_dim() const override { return d_; }
  Index num_samples() const override { return 1; }

  double evaluate(const Vector& theta, Batch, Vector* grad) const override {
    const double r = theta.norm();
    if (grad) *grad = r > 0.0 ? Vector((r - 1.0) / r * theta) : Vector::Zero(d_);
    return 0.5 * (r - 1.0) * (r - 1.0);
  }

  NamedValues invariants(const Vector& theta) const override { return {{"r", theta.norm()}}; }

  std::vector<std::string> observable_names() const override { return {"loss", "r"}; }

  double observe(const std::string& name, const Vector& theta) const override {
    if (name == "r") return theta.norm();
    if (name == "loss") return 0.5 * (theta.norm() - 1.0) * (theta.norm() - 1.0);
    throw InvalidArgument("unknown observable '" + name + "'");
  }

 private:
  Index d_;
};

/// L(W) = mean ||x - W W^T x||^2 over samples, W in R^{d x r}.
class Pca final : public Model {
 public:
  Pca(Matrix x, Index r) : x_(std::move(x)), d_(x_.cols()), r_(r) {}

  Index param_dim() const override { return d_ * r_; }
  Index num_samples() const override { return x_.rows(); }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    const auto w = Eigen::Map<const Matrix>(theta.data(), d_, r_);
    const Matrix c = w.transpose() * w;
    Matrix g = Matrix::Zero(d_, r_);
    double loss = 0.0;
    for (Index s : batch) {
      const Vector x = x_.row(s).transpose();
      const Vector y = w.transpose() * x;
      loss += (x - w * y).squaredNorm();
      if (grad) g += -4.0 * x * y.transpose() + 2.0 * w * (y * y.transpose()) + 2.0 * x * (c * y).transpose();
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (grad) {
      grad->resize(param_dim());
      Eigen::Map<Matrix>(grad->data(), d_, r_) = g * inv;
    }
    return loss * inv;
  }

  NamedValues invariants(const Vector& theta) const override {
    const auto w = Eigen::Map<const Matrix>(theta.data(), d_, r_);
    NamedValues out;
    put_matrix(out, "P", w * w.transpose());
    return out;
  }

 private:
  Matrix x_;
  Index d_, r_;
};

}  // namespace

DatasetSpec radial_dataset(const json& p, std::uint64_t seed) {
  get_count(p, "d");
  if (!(get_real(p, "init_radius") > 0.0)) throw InvalidArgument("radial: init_radius must be positive");
  return {Kind::radial, seed, p, {}};
}

ModelSpec radial_model(const DatasetSpec& data) {
  const Index d = get_count(data.params, "d");
  ModelSpec spec;
  spec.variant = "radial";
  spec.model = std::make_shared<Radial>(d);
  Rng rng = stream(data.seed, kInit);
  Vector dir = linalg::random_normal(d, rng);
  spec.init = get_real(data.params, "init_radius") * dir / dir.norm();
  spec.blocks["omega"] = {0, d, 1};
  std::vector<symmetry::RotationPlanes> planes;
  for (Index j = 1; j < d; ++j) planes.push_back({{0}, {j}, 1.0});
  spec.generators = symmetry::rotation_generators("SO(" + std::to_string(d) + ") rotations in planes (1, j)", planes);
  if (d >= 2) {
    // Polar angle gauge chi_j = atan2(theta_j, theta_1).
    symmetry::GaugeMap gauge;
    gauge.mode = symmetry::GaugeMode::explicit_map;
    gauge.m = d - 1;
    gauge.chi = [d](const Vector& theta) {
      Vector chi(d - 1);
      for (Index j = 1; j < d; ++j) chi(j - 1) = std::atan2(theta(j), theta(0));
      return chi;
    };
    gauge.grad_chi = [d](const Vector& theta) {
      Matrix g = Matrix::Zero(d - 1, d);
      for (Index j = 1; j < d; ++j) {
        const double rho = theta(0) * theta(0) + theta(j) * theta(j);
        g(j - 1, 0) = -theta(j) / rho;
        g(j - 1, j) = theta(0) / rho;
      }
      return g;
    };
    spec.gauge = std::move(gauge);
  }
  return spec;
}

DatasetSpec pca_dataset(const json& p, std::uint64_t seed) {
  const Index d = get_count(p, "d");
  const Index r = get_count(p, "r");
  const Index n = get_count(p, "n");
  if (r > d) throw InvalidArgument("pca: r exceeds d");
  const auto spectrum = p.at("spectrum").get<std::vector<double>>();
  if (static_cast<Index>(spectrum.size()) != d) throw InvalidArgument("pca: spectrum length must equal d");
  Vector sd(d);
  for (Index i = 0; i < d; ++i) {
    if (spectrum[static_cast<std::size_t>(i)] < 0.0) throw InvalidArgument("pca: negative spectrum entry");
    sd(i) = std::sqrt(spectrum[static_cast<std::size_t>(i)]);
  }
  Rng rng = stream(seed, kData);
  const Matrix basis = linalg::random_orthonormal(d, d, rng);
  const Matrix x = linalg::random_normal(n, d, rng) * sd.asDiagonal() * basis.transpose();
  DatasetSpec data{Kind::pca, seed, p, {}};
  data.arrays["X"] = x;
  data.arrays["basis"] = basis;
  return data;
}

ModelSpec pca_model(const DatasetSpec& data) {
  const Index d = get_count(data.params, "d");
  const Index r = get_count(data.params, "r");
  ModelSpec spec;
  spec.variant = "linear_autoencoder";
  spec.model = std::make_shared<Pca>(data.array("X"), r);
  spec.init = small_gaussian(d * r, get_real(data.params, "init_scale"), data.seed);
  spec.blocks["W"] = {0, d, r};
  std::vector<symmetry::RotationPlanes> planes;
  for (Index i = 0; i < r; ++i) {
    for (Index j = i + 1; j < r; ++j) planes.push_back({index_range(i * d, (i + 1) * d), index_range(j * d, (j + 1) * d), 1.0 / std::sqrt(2.0)});
  }
  spec.generators = symmetry::rotation_generators("O(" + std::to_string(r) + ") right action", planes);
  return spec;
}

}  // namespace orbitlab::models::detail
