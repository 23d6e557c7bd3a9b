#include "internal.hpp"

#include "orbitlab/linalg.hpp"

#include <cmath>

namespace orbitlab::models::detail {

namespace {

Vector circular_conv(const Vector& w, const Vector& x) {
  const Index n = w.size();
  Vector z = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) z(i) += w(k) * x((i - k + n) % n);
  }
  return z;
}

/// (C(a)^T b)_k = sum_i a_{(i-k) mod N} b_i.
Vector circular_corr(const Vector& a, const Vector& b) {
  const Index n = a.size();
  Vector out = Vector::Zero(n);
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < n; ++i) out(k) += a((i - k + n) % n) * b(i);
  }
  return out;
}

/// f(x) = v^T (w_L * ... * w_1 * x) with circular convolutions and squared loss.
class DeepCirculant final : public Model {
 public:
  DeepCirculant(Matrix x, Vector y, Index depth) : x_(std::move(x)), y_(std::move(y)), depth_(depth), n_(x_.cols()) {}

  Index param_dim() const override { return (depth_ + 1) * n_; }
  Index num_samples() const override { return x_.rows(); }

  Vector filter(const Vector& theta, Index l) const { return theta.segment(l * n_, n_); }
  Vector readout(const Vector& theta) const { return theta.tail(n_); }

  double predict(const Vector& theta, const Vector& x, std::vector<Vector>* layers) const {
    Vector z = x;
    if (layers) layers->assign(1, z);
    for (Index l = 0; l < depth_; ++l) {
      z = circular_conv(filter(theta, l), z);
      if (layers) layers->push_back(z);
    }
    return readout(theta).dot(z);
  }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    if (grad) grad->setZero(param_dim());
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::vector<Vector> layers;
    for (Index s : batch) {
      const double f = predict(theta, x_.row(s).transpose(), grad ? &layers : nullptr);
      const double r = f - y_(s);
      loss += 0.5 * r * r;
      if (!grad) continue;
      grad->tail(n_) += inv * r * layers.back();
      Vector a = readout(theta);
      for (Index l = depth_ - 1; l >= 0; --l) {
        grad->segment(l * n_, n_) += inv * r * circular_corr(layers[static_cast<std::size_t>(l)], a);
        a = circular_corr(filter(theta, l), a);
      }
    }
    return loss * inv;
  }

  NamedValues invariants(const Vector& theta) const override {
    // c(k) = conj(v_hat(k)) prod_l w_hat_l(k).
    NamedValues out;
    for (Index k = 0; k <= n_ / 2; ++k) {
      auto [vr, vi] = dft_coefficient(readout(theta), k);
      double cr = vr;
      double ci = -vi;
      for (Index l = 0; l < depth_; ++l) {
        auto [wr, wi] = dft_coefficient(filter(theta, l), k);
        const double nr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = nr;
      }
      out[indexed("c_re", k)] = cr;
      out[indexed("c_im", k)] = ci;
    }
    return out;
  }

 private:
  Matrix x_;
  Vector y_;
  Index depth_;
  Index n_;
};

}  // namespace

DatasetSpec circulant_dataset(Kind kind, const json& p, std::uint64_t seed) {
  const Index n = get_count(p, "N", 2);
  const Index samples = get_count(p, "n");
  const Index depth = kind == Kind::circulant_deep ? get_count(p, "depth") : 1;
  Rng teacher = stream(seed, kTeacher);
  Vector theta_star = linalg::random_normal((depth + 1) * n, teacher, 1.0 / std::sqrt(static_cast<double>(n)));
  Rng rng = stream(seed, kData);
  const Matrix x = linalg::random_normal(samples, n, rng);
  const DeepCirculant probe(Matrix(0, n), Vector(0), depth);
  Vector y(samples);
  for (Index s = 0; s < samples; ++s) y(s) = probe.predict(theta_star, x.row(s).transpose(), nullptr);
  DatasetSpec data{kind, seed, p, {}};
  data.arrays["theta_star"] = theta_star;
  data.arrays["X"] = x;
  data.arrays["y"] = y;
  return data;
}

ModelSpec circulant_model(const DatasetSpec& d) {
  const Index n = get_count(d.params, "N", 2);
  const Index depth = d.kind == Kind::circulant_deep ? get_count(d.params, "depth") : 1;
  const Vector y = Eigen::Map<const Vector>(d.array("y").data(), d.array("y").size());
  auto model = std::make_shared<DeepCirculant>(d.array("X"), y, depth);
  ModelSpec spec;
  spec.variant = depth == 1 ? "two_layer" : "depth_" + std::to_string(depth);
  spec.init = small_gaussian(model->param_dim(), get_real(d.params, "init_scale"), d.seed);
  std::vector<symmetry::ProjectorScaling> scalings;
  for (Index l = 0; l < depth; ++l) {
    spec.blocks["w" + std::to_string(l + 1)] = {l * n, n, 1};
    for (Index k = 0; k <= n / 2; ++k) scalings.push_back({l * n, depth * n, frequency_projector(n, k)});
  }
  spec.blocks["v"] = {depth * n, n, 1};
  spec.generators = symmetry::projector_generators("per-frequency scaling", std::move(scalings));
  spec.gauge = symmetry::metric_dual_gauge(spec.generators);
  spec.model = std::move(model);
  return spec;
}

}  // namespace orbitlab::models::detail
