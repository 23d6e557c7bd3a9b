#include "internal.hpp"

#include "orbitlab/linalg.hpp"

namespace orbitlab::models::detail {

namespace {

struct Entry {
  Index a, b, c;
};

std::vector<Entry> all_entries(Index n1, Index n2, Index n3) {
  std::vector<Entry> out;
  for (Index a = 0; a < n1; ++a) {
    for (Index b = 0; b < n2; ++b) {
      for (Index c = 0; c < n3; ++c) out.push_back({a, b, c});
    }
  }
  return out;
}

/// Rank-1 CP model T = u (x) v (x) w fitted entrywise.
class CpRank1 final : public Model {
 public:
  CpRank1(Vector target, Index d1, Index d2, Index d3)
      : t_(std::move(target)), d1_(d1), d2_(d2), d3_(d3), entries_(all_entries(d1, d2, d3)) {}

  Index param_dim() const override { return d1_ + d2_ + d3_; }
  Index num_samples() const override { return static_cast<Index>(entries_.size()); }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    if (grad) grad->setZero(param_dim());
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (Index s : batch) {
      const Entry e = entries_[static_cast<std::size_t>(s)];
      const double u = theta(e.a), v = theta(d1_ + e.b), w = theta(d1_ + d2_ + e.c);
      const double r = u * v * w - t_(s);
      loss += 0.5 * r * r;
      if (grad) {
        (*grad)(e.a) += inv * r * v * w;
        (*grad)(d1_ + e.b) += inv * r * u * w;
        (*grad)(d1_ + d2_ + e.c) += inv * r * u * v;
      }
    }
    return loss * inv;
  }

  NamedValues invariants(const Vector& theta) const override {
    NamedValues out;
    const Vector u = theta.head(d1_), v = theta.segment(d1_, d2_), w = theta.tail(d3_);
    for (std::size_t s = 0; s < entries_.size(); ++s) {
      const Entry e = entries_[s];
      out[indexed("T", static_cast<Index>(s))] = u(e.a) * v(e.b) * w(e.c);
    }
    out["S"] = u.squaredNorm() * v.squaredNorm() * w.squaredNorm();
    return out;
  }

 private:
  Vector t_;
  Index d1_, d2_, d3_;
  std::vector<Entry> entries_;
};

/// Three-core tensor train T_abc = sum_ij G1[a,i] G2[i,b,j] G3[j,c]. G2 is stored
/// transposed as V[(b + n2 j), i] so the first bond carries the (U, V) GL(r1) action.
class TensorTrain3 final : public Model {
 public:
  TensorTrain3(Vector target, Index n1, Index n2, Index n3, Index r1, Index r2)
      : t_(std::move(target)), n1_(n1), n2_(n2), n3_(n3), r1_(r1), r2_(r2), entries_(all_entries(n1, n2, n3)) {
    g1_ = {0, n1_, r1_};
    v_ = {n1_ * r1_, n2_ * r2_, r1_};
    g3_ = {n1_ * r1_ + n2_ * r2_ * r1_, r2_, n3_};
  }

  Index param_dim() const override { return n1_ * r1_ + n2_ * r2_ * r1_ + r2_ * n3_; }
  Index num_samples() const override { return static_cast<Index>(entries_.size()); }

  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    if (grad) grad->setZero(param_dim());
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (Index s : batch) {
      const Entry e = entries_[static_cast<std::size_t>(s)];
      const double r = value(theta, e) - t_(s);
      loss += 0.5 * r * r;
      if (!grad) continue;
      for (Index i = 0; i < r1_; ++i) {
        for (Index j = 0; j < r2_; ++j) {
          const double g1 = theta(g1_.at(e.a, i));
          const double g2 = theta(v_.at(e.b + n2_ * j, i));
          const double g3 = theta(g3_.at(j, e.c));
          (*grad)(g1_.at(e.a, i)) += inv * r * g2 * g3;
          (*grad)(v_.at(e.b + n2_ * j, i)) += inv * r * g1 * g3;
          (*grad)(g3_.at(j, e.c)) += inv * r * g1 * g2;
        }
      }
    }
    return loss * inv;
  }

  double value(const Vector& theta, const Entry& e) const {
    double out = 0.0;
    for (Index i = 0; i < r1_; ++i) {
      for (Index j = 0; j < r2_; ++j) {
        out += theta(g1_.at(e.a, i)) * theta(v_.at(e.b + n2_ * j, i)) * theta(g3_.at(j, e.c));
      }
    }
    return out;
  }

  NamedValues invariants(const Vector& theta) const override {
    NamedValues out;
    for (std::size_t s = 0; s < entries_.size(); ++s) out[indexed("T", static_cast<Index>(s))] = value(theta, entries_[s]);
    return out;
  }

  Vector contract(const Vector& theta) const {
    Vector out(num_samples());
    for (std::size_t s = 0; s < entries_.size(); ++s) out(static_cast<Index>(s)) = value(theta, entries_[s]);
    return out;
  }

  symmetry::MatrixBlock g1_, v_, g3_;

 private:
  Vector t_;
  Index n1_, n2_, n3_, r1_, r2_;
  std::vector<Entry> entries_;
};

}  // namespace

DatasetSpec cp_dataset(const json& p, std::uint64_t seed) {
  const Index d1 = get_count(p, "d1"), d2 = get_count(p, "d2"), d3 = get_count(p, "d3");
  Rng rng = stream(seed, kTeacher);
  const Vector u = linalg::random_normal(d1, rng), v = linalg::random_normal(d2, rng), w = linalg::random_normal(d3, rng);
  Vector t(d1 * d2 * d3);
  Index s = 0;
  for (Index a = 0; a < d1; ++a) {
    for (Index b = 0; b < d2; ++b) {
      for (Index c = 0; c < d3; ++c) t(s++) = u(a) * v(b) * w(c);
    }
  }
  DatasetSpec data{Kind::cp_rank1, seed, p, {}};
  data.arrays["T_star"] = t;
  return data;
}

ModelSpec cp_model(const DatasetSpec& d) {
  const Index d1 = get_count(d.params, "d1"), d2 = get_count(d.params, "d2"), d3 = get_count(d.params, "d3");
  const Vector t = Eigen::Map<const Vector>(d.array("T_star").data(), d.array("T_star").size());
  auto model = std::make_shared<CpRank1>(t, d1, d2, d3);
  ModelSpec spec;
  spec.variant = "rank1";
  spec.init = small_gaussian(model->param_dim(), get_real(d.params, "init_scale"), d.seed);
  spec.blocks["u"] = {0, d1, 1};
  spec.blocks["v"] = {d1, d2, 1};
  spec.blocks["w"] = {d1 + d2, d3, 1};
  const auto w_idx = index_range(d1 + d2, d1 + d2 + d3);
  spec.generators = symmetry::scaling_generators(
      "CP scaling (abc = 1)", {{index_range(0, d1), w_idx, 1.0}, {index_range(d1, d1 + d2), w_idx, 1.0}});
  spec.gauge = symmetry::metric_dual_gauge(spec.generators);
  spec.model = std::move(model);
  return spec;
}

DatasetSpec tt_dataset(const json& p, std::uint64_t seed) {
  const Index n1 = get_count(p, "n1"), n2 = get_count(p, "n2"), n3 = get_count(p, "n3");
  const Index r1 = get_count(p, "r1"), r2 = get_count(p, "r2");
  const TensorTrain3 probe(Vector(0), n1, n2, n3, r1, r2);
  Rng rng = stream(seed, kTeacher);
  const Vector theta_star = linalg::random_normal(probe.param_dim(), rng);
  DatasetSpec data{Kind::tt3, seed, p, {}};
  data.arrays["theta_star"] = theta_star;
  data.arrays["T_star"] = probe.contract(theta_star);
  return data;
}

ModelSpec tt_model(const DatasetSpec& d) {
  const Index n1 = get_count(d.params, "n1"), n2 = get_count(d.params, "n2"), n3 = get_count(d.params, "n3");
  const Index r1 = get_count(d.params, "r1"), r2 = get_count(d.params, "r2");
  const Vector t = Eigen::Map<const Vector>(d.array("T_star").data(), d.array("T_star").size());
  auto model = std::make_shared<TensorTrain3>(t, n1, n2, n3, r1, r2);
  ModelSpec spec;
  spec.variant = "three_core";
  spec.init = small_gaussian(model->param_dim(), get_real(d.params, "init_scale"), d.seed);
  spec.blocks["G1"] = model->g1_;
  spec.blocks["G2_T"] = model->v_;
  spec.blocks["G3"] = model->g3_;
  spec.generators = symmetry::gl_generators(model->g1_, model->v_, true);
  spec.generators.label = "GL(" + std::to_string(r1) + ") first-bond diagonal subalgebra";
  spec.gauge = symmetry::metric_dual_gauge(spec.generators);
  spec.model = std::move(model);
  return spec;
}

}  // namespace orbitlab::models::detail
