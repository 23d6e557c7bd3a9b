#include "internal.hpp"

#include "orbitlab/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace orbitlab::models::detail {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// f(x) = v^T ReLU(W x) with batch-averaged binary cross-entropy on labels +-1.
class TwoLayerRelu final : public Model {
 public:
  TwoLayerRelu(Matrix x, Vector labels, Index width)
      : x_(std::move(x)), y_(std::move(labels)), p_(width), in_(x_.cols()) {}

  Index param_dim() const override { return p_ * (in_ + 1); }
  Index num_samples() const override { return x_.rows(); }

  Matrix w(const Vector& theta) const { return Eigen::Map<const Matrix>(theta.data(), p_, in_); }
  Vector v(const Vector& theta) const { return theta.tail(p_); }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    const Matrix wm = w(theta);
    const Vector vv = v(theta);
    Matrix gw = Matrix::Zero(p_, in_);
    Vector gv = Vector::Zero(p_);
    double loss = 0.0;
    for (Index s : batch) {
      const Vector pre = wm * x_.row(s).transpose();
      const Vector act = pre.cwiseMax(0.0);
      const double f = vv.dot(act);
      const double margin = y_(s) * f;
      loss += softplus(-margin);
      if (!grad) continue;
      const double df = -y_(s) * sigmoid(-margin);
      gv += df * act;
      for (Index j = 0; j < p_; ++j) {
        if (pre(j) > 0.0) gw.row(j) += df * vv(j) * x_.row(s);
      }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (grad) {
      grad->resize(param_dim());
      Eigen::Map<Matrix>(grad->data(), p_, in_) = gw * inv;
      grad->tail(p_) = gv * inv;
    }
    return loss * inv;
  }

  NamedValues invariants(const Vector& theta) const override {
    // Neuron-wise products v_j w_j are invariant under positive rescaling.
    NamedValues out;
    put_matrix(out, "vw", v(theta).asDiagonal() * w(theta));
    return out;
  }

  std::vector<std::string> observable_names() const override {
    return {"loss", "accuracy", "median_balance_ratio", "active_neurons"};
  }

  /// Neurons with positive pre-activation on at least 10% of the training points.
  std::vector<Index> active_neurons(const Vector& theta) const {
    const Matrix pre = x_ * w(theta).transpose();
    std::vector<Index> out;
    for (Index j = 0; j < p_; ++j) {
      const auto positive = (pre.col(j).array() > 0.0).count();
      if (static_cast<double>(positive) >= 0.1 * static_cast<double>(x_.rows())) out.push_back(j);
    }
    return out;
  }

  double observe(const std::string& name, const Vector& theta) const override {
    if (name == "loss") return loss(theta);
    if (name == "accuracy") {
      const Vector f = (x_ * w(theta).transpose()).cwiseMax(0.0) * v(theta);
      return static_cast<double>((f.array() * y_.array() > 0.0).count()) / static_cast<double>(x_.rows());
    }
    const auto active = active_neurons(theta);
    if (name == "active_neurons") return static_cast<double>(active.size());
    if (name == "median_balance_ratio") {
      const Matrix wm = w(theta);
      const Vector vv = v(theta);
      std::vector<double> ratios;
      for (Index j : active) {
        if (std::abs(vv(j)) >= 1e-8) ratios.push_back(wm.row(j).norm() / std::abs(vv(j)));
      }
      if (ratios.empty()) return std::nan("");
      std::sort(ratios.begin(), ratios.end());
      const std::size_t m = ratios.size();
      return m % 2 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
    }
    throw InvalidArgument("unknown observable '" + name + "'");
  }

 private:
  Matrix x_;
  Vector y_;
  Index p_;
  Index in_;
};

}  // namespace

DatasetSpec relu2_dataset(const json& p, std::uint64_t seed) {
  const Index n = get_count(p, "n", 2);
  const double mean = get_real(p, "mean");
  if (!(mean > 0.0)) throw InvalidArgument("relu2: mean must be positive");
  get_count(p, "p");
  Rng rng = stream(seed, kData);
  Matrix x(n, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double label = i % 2 == 0 ? 1.0 : -1.0;
    // Points falling on the wrong side of x1 + x2 = 0 are redrawn so the set stays linearly separable.
    do {
      x(i, 0) = label * mean + rng.normal();
      x(i, 1) = label * mean + rng.normal();
    } while (label * (x(i, 0) + x(i, 1)) <= 0.5);
    y(i) = label;
  }
  DatasetSpec data{Kind::relu2, seed, p, {}};
  data.arrays["X"] = x;
  data.arrays["labels"] = y;
  return data;
}

ModelSpec relu2_model(const DatasetSpec& d) {
  const Index width = get_count(d.params, "p");
  const Vector labels = Eigen::Map<const Vector>(d.array("labels").data(), d.array("labels").size());
  auto model = std::make_shared<TwoLayerRelu>(d.array("X"), labels, width);
  ModelSpec spec;
  spec.variant = "two_layer";
  spec.init = small_gaussian(model->param_dim(), get_real(d.params, "init_scale"), d.seed);
  spec.blocks["W"] = {0, width, 2};
  spec.blocks["v"] = {2 * width, width, 1};
  std::vector<symmetry::ScalingGroup> groups;
  for (Index j = 0; j < width; ++j) groups.push_back({{j, width + j}, {2 * width + j}, 1.0});
  spec.generators = symmetry::scaling_generators("(R>0)^" + std::to_string(width) + " neuron rescaling", groups);
  spec.gauge = symmetry::metric_dual_gauge(spec.generators);
  spec.model = std::move(model);
  return spec;
}

}  // namespace orbitlab::models::detail
