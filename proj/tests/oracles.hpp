#pragma once

#include "orbitlab/model.hpp"
#include "orbitlab/models.hpp"
#include "orbitlab/rng.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

namespace orbitlab::test {

/// Central finite-difference gradient of the full-batch loss.
inline Vector fd_gradient(const Model& model, const Vector& theta) {
  Vector g(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(theta(i)));
    Vector plus = theta, minus = theta;
    plus(i) += h;
    minus(i) -= h;
    g(i) = (model.loss(plus) - model.loss(minus)) / (2.0 * h);
  }
  return g;
}

/// Central finite-difference Jacobian of a vector map, rows = outputs.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& theta) {
  const Index m = f(theta).size();
  Matrix j(m, theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(theta(i)));
    Vector plus = theta, minus = theta;
    plus(i) += h;
    minus(i) -= h;
    j.col(i) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return j;
}

inline Vector gaussian(Index n, Rng& rng, double sd = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = sd * rng.normal();
  return v;
}

struct Catalog {
  models::Kind kind;
  nlohmann::json params;
};

/// Every model kind and variant at test-friendly sizes.
inline std::vector<Catalog> catalog() {
  using models::Kind;
  return {
      {Kind::radial, {{"d", 10}}},
      {Kind::fourier_sparse, {{"variant", "naive"}, {"D", 16}, {"n_test", 50}}},
      {Kind::fourier_sparse, {{"variant", "pq"}, {"D", 16}, {"n_test", 50}}},
      {Kind::tv_recon, {{"variant", "naive"}, {"d", 40}, {"m", 15}}},
      {Kind::tv_recon, {{"variant", "biased"}, {"d", 40}, {"m", 15}}},
      {Kind::multichannel, {{"variant", "naive"}, {"D", 6}, {"C", 5}, {"N", 20}, {"n_test", 20}}},
      {Kind::multichannel, {{"variant", "scalar"}, {"D", 6}, {"C", 5}, {"N", 20}, {"n_test", 20}}},
      {Kind::multichannel, {{"variant", "matrix"}, {"D", 6}, {"C", 5}, {"N", 20}, {"n_test", 20}}},
      {Kind::rank2_completion, {{"n", 8}, {"m", 7}}},
      {Kind::attention_ts, {{"L", 4}, {"d_model", 6}, {"d_head", 3}, {"n_train", 6}, {"n_test", 2}}},
      {Kind::relu2, {{"p", 6}, {"n", 30}}},
      {Kind::circulant2, {{"N", 8}, {"n", 12}}},
      {Kind::circulant_deep, {{"N", 8}, {"depth", 3}, {"n", 12}}},
      {Kind::cp_rank1, {{"d1", 3}, {"d2", 4}, {"d3", 2}}},
      {Kind::tt3, {{"n1", 3}, {"n2", 3}, {"n3", 3}}},
      {Kind::block_group, {{"variant", "vanilla"}, {"d", 20}, {"G", 4}, {"active_groups", 2}, {"n", 10}, {"n_test", 10}}},
      {Kind::block_group, {{"variant", "factorized"}, {"d", 20}, {"G", 4}, {"active_groups", 2}, {"n", 10}, {"n_test", 10}}},
      {Kind::l1_hadamard, {{"variant", "vanilla"}, {"d", 20}, {"n", 10}, {"n_test", 10}}},
      {Kind::l1_hadamard, {{"variant", "factorized"}, {"d", 20}, {"n", 10}, {"n_test", 10}}},
      {Kind::pca, {{"d", 4}, {"r", 3}, {"spectrum", {4.0, 3.0, 2.0, 1.0}}, {"n", 30}}},
  };
}

/// Random evaluation point at unit scale (kept away from ReLU kinks by construction of the data).
inline Vector random_point(const models::ModelSpec& spec, Rng& rng) {
  return gaussian(spec.param_dim, rng, 0.8);
}


// --- brute-force minimizers -------------------------------------------------

struct GridMin {
  double argmin = 0.0;
  double value = 0.0;
};

/// Exhaustive scan of f over lo, lo + step, ..., hi (points where f is not finite are skipped).
inline GridMin grid_minimize(const std::function<double(double)>& f, double lo, double hi, double step) {
  GridMin best{lo, INFINITY};
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= count; ++k) {
    const double x = lo + static_cast<double>(k) * step;
    const double y = f(x);
    if (std::isfinite(y) && y < best.value) best = {x, y};
  }
  return best;
}

/// Golden-section search of a unimodal f on [lo, hi].
inline double golden_minimize(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// min of u^2 + (z/u)^2 on the grid u in [-5, 5] with step 1e-3.
inline GridMin scalar_factorization_grid(double z) {
  return grid_minimize([z](double u) { return u == 0.0 ? INFINITY : u * u + (z / u) * (z / u); }, -5.0, 5.0, 1e-3);
}

/// Random invertible r x r matrix with condition number at most `max_cond`.
inline Matrix random_conditioned(Index r, Rng& rng, double max_cond) {
  for (;;) {
    Matrix a(r, r);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    const Eigen::JacobiSVD<Matrix> svd(a);
    const Vector s = svd.singularValues();
    if (s(s.size() - 1) > 0.0 && s(0) / s(s.size() - 1) <= max_cond) return a;
  }
}

/// Smallest |U R|^2 + |V R^{-T}|^2 found over `draws` random orbit points.
inline double orbit_search_min_cost(const Matrix& u, const Matrix& v, Rng& rng, int draws = 2000) {
  double best = INFINITY;
  for (int k = 0; k < draws; ++k) {
    const Matrix r = random_conditioned(u.cols(), rng, 100.0);
    const Matrix rit = r.inverse().transpose();
    best = std::min(best, (u * r).squaredNorm() + (v * rit).squaredNorm());
  }
  return best;
}

/// Minimizes xy + xz + yz subject to xyz = s by gradient descent in log coordinates,
/// where the objective e^{a+b} + s e^{-a} + s e^{-b} is convex. Returns (x, y, z, objective).
inline std::array<double, 4> cp_constrained_min(double s, double a0, double b0) {
  auto f = [s](double a, double b) { return std::exp(a + b) + s * std::exp(-a) + s * std::exp(-b); };
  double a = a0, b = b0;
  for (int it = 0; it < 20000; ++it) {
    const double ga = std::exp(a + b) - s * std::exp(-a);
    const double gb = std::exp(a + b) - s * std::exp(-b);
    if (std::hypot(ga, gb) < 1e-13) break;
    double step = 1.0;
    const double f0 = f(a, b);
    while (step > 1e-20 && f(a - step * ga, b - step * gb) > f0 - 0.5 * step * (ga * ga + gb * gb)) step *= 0.5;
    a -= step * ga;
    b -= step * gb;
  }
  const double x = std::exp(a), y = std::exp(b), z = s / (x * y);
  return {x, y, z, x * y + x * z + y * z};
}

/// Orbit and stabilizer sizes of neuron permutations acting on (W1 rows, W2 columns),
/// by explicit enumeration of all m! permutations.
inline std::pair<std::uint64_t, std::uint64_t> enumerate_permutation_orbit(const Matrix& w1, const Matrix& w2) {
  const Index m = w1.rows();
  std::vector<Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<std::pair<Matrix, Matrix>> seen;
  std::uint64_t stabilizer = 0;
  do {
    Matrix p1(w1.rows(), w1.cols()), p2(w2.rows(), w2.cols());
    for (Index i = 0; i < m; ++i) {
      p1.row(i) = w1.row(perm[static_cast<std::size_t>(i)]);
      p2.col(i) = w2.col(perm[static_cast<std::size_t>(i)]);
    }
    if (p1 == w1 && p2 == w2) ++stabilizer;
    const bool known = std::any_of(seen.begin(), seen.end(), [&](const auto& e) { return e.first == p1 && e.second == p2; });
    if (!known) seen.emplace_back(p1, p2);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {seen.size(), stabilizer};
}

/// Neuron weights with the given multiplicity pattern (identical copies per cluster), shuffled.
inline std::pair<Matrix, Matrix> neurons_with_multiplicities(const std::vector<Index>& mult, Index in, Index out, Rng& rng) {
  Index m = 0;
  for (Index k : mult) m += k;
  std::vector<Index> owner;
  for (std::size_t c = 0; c < mult.size(); ++c) owner.insert(owner.end(), static_cast<std::size_t>(mult[c]), static_cast<Index>(c));
  std::shuffle(owner.begin(), owner.end(), rng.engine());
  Matrix protos1(static_cast<Index>(mult.size()), in), protos2(out, static_cast<Index>(mult.size()));
  for (Index i = 0; i < protos1.size(); ++i) protos1.data()[i] = rng.normal();
  for (Index i = 0; i < protos2.size(); ++i) protos2.data()[i] = rng.normal();
  Matrix w1(m, in), w2(out, m);
  for (Index i = 0; i < m; ++i) {
    w1.row(i) = protos1.row(owner[static_cast<std::size_t>(i)]);
    w2.col(i) = protos2.col(owner[static_cast<std::size_t>(i)]);
  }
  return {w1, w2};
}

// --- small models ------------------------------------------------------------

/// L = sum_i theta_i^2 / 2 on a single sample.
class Quadratic : public Model {
 public:
  explicit Quadratic(Index n) : n_(n) {}
  Index param_dim() const override { return n_; }
  Index num_samples() const override { return 1; }
  double evaluate(const Vector& theta, Batch, Vector* grad) const override {
    if (grad) *grad = theta;
    return 0.5 * theta.squaredNorm();
  }
  NamedValues invariants(const Vector&) const override { return {}; }

 private:
  Index n_;
};

/// Squared loss (y - theta^T x)^2 / 2 averaged over rows of X.
class LinearRegression : public Model {
 public:
  LinearRegression(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {}
  Index param_dim() const override { return x_.cols(); }
  Index num_samples() const override { return x_.rows(); }
  double evaluate(const Vector& theta, Batch batch, Vector* grad) const override {
    double total = 0.0;
    if (grad) grad->setZero(theta.size());
    for (const Index i : batch) {
      const double r = x_.row(i).dot(theta) - y_(i);
      total += 0.5 * r * r;
      if (grad) *grad += r * x_.row(i).transpose();
    }
    const double n = static_cast<double>(batch.size());
    if (grad) *grad /= n;
    return total / n;
  }
  NamedValues invariants(const Vector&) const override { return {}; }

 private:
  Matrix x_;
  Vector y_;
};

}  // namespace orbitlab::test
