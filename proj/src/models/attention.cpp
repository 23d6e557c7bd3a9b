#include "internal.hpp"

#include "orbitlab/linalg.hpp"

#include <cmath>

namespace orbitlab::models::detail {

namespace {

struct AttentionWeights {
  Matrix wq, wk, wv, wot;  // d_model x d_head each; wot = W_O^T
};

/// Single-head scaled dot-product self-attention h(x) = softmax(x W_Q (x W_K)^T / sqrt(d_head)) x W_V W_O
/// fitted to teacher outputs with loss 1/2 ||h(x) - y||_F^2 per sequence.
class Attention final : public Model {
 public:
  Attention(Matrix x, Matrix y, Matrix x_test, Matrix y_test, Index len, Index d_model, Index d_head)
      : x_(std::move(x)), y_(std::move(y)), x_test_(std::move(x_test)), y_test_(std::move(y_test)),
        len_(len), dm_(d_model), dh_(d_head) {
    q_ = {0, dm_, dh_};
    k_ = {dm_ * dh_, dm_, dh_};
    v_ = {2 * dm_ * dh_, dm_, dh_};
    o_ = {3 * dm_ * dh_, dm_, dh_};
  }

  Index param_dim() const override { return 4 * dm_ * dh_; }
  Index num_samples() const override { return x_.rows() / len_; }

  AttentionWeights unpack(const Vector& theta) const {
    return {as_matrix(theta, q_), as_matrix(theta, k_), as_matrix(theta, v_), as_matrix(theta, o_)};
  }

  Matrix forward(const AttentionWeights& w, const Matrix& x) const {
    const Matrix q = x * w.wq;
    const Matrix k = x * w.wk;
    const Matrix a = softmax_rows(q * k.transpose() / std::sqrt(static_cast<double>(dh_)));
    return a * (x * w.wv) * w.wot.transpose();
  }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    const AttentionWeights w = unpack(theta);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
    Matrix gq = Matrix::Zero(dm_, dh_), gk = gq, gv = gq, go = gq;
    double loss = 0.0;
    for (Index s : batch) {
      const Matrix x = x_.middleRows(s * len_, len_);
      const Matrix q = x * w.wq;
      const Matrix k = x * w.wk;
      const Matrix v = x * w.wv;
      const Matrix a = softmax_rows(q * k.transpose() * scale);
      const Matrix z = a * v;
      const Matrix r = z * w.wot.transpose() - y_.middleRows(s * len_, len_);
      loss += 0.5 * r.squaredNorm();
      if (!grad) continue;
      go.noalias() += r.transpose() * z;
      const Matrix dz = r * w.wot;
      const Matrix da = dz * v.transpose();
      gv.noalias() += x.transpose() * (a.transpose() * dz);
      Matrix ds = a.cwiseProduct(da);
      const Vector rows = ds.rowwise().sum();
      ds -= a.cwiseProduct(rows.replicate(1, len_));
      gq.noalias() += x.transpose() * (ds * k) * scale;
      gk.noalias() += x.transpose() * (ds.transpose() * q) * scale;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (grad) {
      grad->resize(param_dim());
      write_block(*grad, q_, gq * inv);
      write_block(*grad, k_, gk * inv);
      write_block(*grad, v_, gv * inv);
      write_block(*grad, o_, go * inv);
    }
    return loss * inv;
  }

  NamedValues invariants(const Vector& theta) const override {
    const AttentionWeights w = unpack(theta);
    NamedValues out;
    put_matrix(out, "QK", w.wq * w.wk.transpose());
    put_matrix(out, "VO", w.wv * w.wot.transpose());
    return out;
  }

  std::vector<std::string> observable_names() const override {
    return {"loss", "mse", "test_mse", "qk_gap_ratio", "qk_max_gap"};
  }

  double observe(const std::string& name, const Vector& theta) const override {
    if (name == "loss") return loss(theta);
    if (name == "mse") return mse(theta, x_, y_);
    if (name == "test_mse") return mse(theta, x_test_, y_test_);
    const AttentionWeights w = unpack(theta);
    const Vector qn = w.wq.colwise().norm();
    const Vector kn = w.wk.colwise().norm();
    const double gap = (qn - kn).cwiseAbs().maxCoeff();
    if (name == "qk_max_gap") return gap;
    if (name == "qk_gap_ratio") return gap / qn.mean();
    throw InvalidArgument("unknown observable '" + name + "'");
  }

  double mse(const Vector& theta, const Matrix& x, const Matrix& y) const {
    if (x.rows() == 0) return 0.0;
    const AttentionWeights w = unpack(theta);
    double total = 0.0;
    for (Index s = 0; s < x.rows() / len_; ++s) {
      total += (forward(w, x.middleRows(s * len_, len_)) - y.middleRows(s * len_, len_)).squaredNorm();
    }
    return total / static_cast<double>(y.size());
  }

  static Matrix softmax_rows(const Matrix& s) {
    Matrix a = s;
    for (Index i = 0; i < a.rows(); ++i) {
      const double top = a.row(i).maxCoeff();
      a.row(i) = (a.row(i).array() - top).exp();
      a.row(i) /= a.row(i).sum();
    }
    return a;
  }

 private:
  Matrix x_, y_, x_test_, y_test_;
  Index len_, dm_, dh_;
  symmetry::MatrixBlock q_, k_, v_, o_;
};

AttentionWeights kaiming_weights(Index dm, Index dh, double scale, std::uint64_t seed) {
  const Rng root(seed);
  return {kaiming_like_init(dm, dh, scale, root.split(11).engine()()),
          kaiming_like_init(dm, dh, scale, root.split(12).engine()()),
          kaiming_like_init(dm, dh, scale, root.split(13).engine()()),
          kaiming_like_init(dh, dm, scale, root.split(14).engine()()).transpose()};
}

Matrix teacher_outputs(const Attention& teacher, const AttentionWeights& w, const Matrix& x, Index len) {
  Matrix y(x.rows(), x.cols());
  for (Index s = 0; s < x.rows() / len; ++s) y.middleRows(s * len, len) = teacher.forward(w, x.middleRows(s * len, len));
  return y;
}

}  // namespace

DatasetSpec attention_dataset(const json& p, std::uint64_t seed) {
  const Index len = get_count(p, "L");
  const Index dm = get_count(p, "d_model");
  const Index dh = get_count(p, "d_head");
  const Index n = get_count(p, "n_train");
  const Index n_test = get_count(p, "n_test", 0);
  const double teacher_scale = get_real(p, "teacher_variance_scale");
  if (teacher_scale < 0.0 || get_real(p, "student_variance_scale") < 0.0) {
    throw InvalidArgument("attention_ts: variance scales must be nonnegative");
  }
  const AttentionWeights w = kaiming_weights(dm, dh, teacher_scale, stream(seed, kTeacher).engine()());
  Rng rng = stream(seed, kData);
  const Matrix x = linalg::random_normal(n * len, dm, rng);
  Rng test = stream(seed, kTest);
  const Matrix x_test = linalg::random_normal(n_test * len, dm, test);
  const Attention probe(Matrix(len, dm), Matrix(len, dm), Matrix(), Matrix(), len, dm, dh);

  DatasetSpec data{Kind::attention_ts, seed, p, {}};
  data.arrays["teacher_WQ"] = w.wq;
  data.arrays["teacher_WK"] = w.wk;
  data.arrays["teacher_WV"] = w.wv;
  data.arrays["teacher_WO"] = w.wot.transpose();
  data.arrays["X"] = x;
  data.arrays["Y"] = teacher_outputs(probe, w, x, len);
  data.arrays["X_test"] = x_test;
  data.arrays["Y_test"] = teacher_outputs(probe, w, x_test, len);
  return data;
}

ModelSpec attention_model(const DatasetSpec& d) {
  const Index len = get_count(d.params, "L");
  const Index dm = get_count(d.params, "d_model");
  const Index dh = get_count(d.params, "d_head");
  auto model = std::make_shared<Attention>(d.array("X"), d.array("Y"), d.array("X_test"), d.array("Y_test"), len, dm, dh);
  ModelSpec spec;
  spec.variant = "single_head";
  spec.blocks["WQ"] = {0, dm, dh};
  spec.blocks["WK"] = {dm * dh, dm, dh};
  spec.blocks["WV"] = {2 * dm * dh, dm, dh};
  spec.blocks["WO_T"] = {3 * dm * dh, dm, dh};
  const AttentionWeights w =
      kaiming_weights(dm, dh, get_real(d.params, "student_variance_scale"), stream(d.seed, kInit).engine()());
  spec.init.resize(model->param_dim());
  write_block(spec.init, spec.blocks["WQ"], w.wq);
  write_block(spec.init, spec.blocks["WK"], w.wk);
  write_block(spec.init, spec.blocks["WV"], w.wv);
  write_block(spec.init, spec.blocks["WO_T"], w.wot);
  auto qk = symmetry::gl_generators(spec.blocks["WQ"], spec.blocks["WK"], true);
  auto vo = symmetry::gl_generators(spec.blocks["WV"], spec.blocks["WO_T"], true);
  spec.generators = concat("GL(" + std::to_string(dh) + ") diagonal subalgebra on (W_Q, W_K) and (W_V, W_O)", {qk, vo});
  spec.gauge = symmetry::metric_dual_gauge(spec.generators);
  spec.model = std::move(model);
  return spec;
}

}  // namespace orbitlab::models::detail
