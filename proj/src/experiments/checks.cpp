#include "internal.hpp"

#include "orbitlab/linalg.hpp"
#include "orbitlab/reductions.hpp"
#include "orbitlab/rng.hpp"
#include "orbitlab/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

namespace orbitlab::expcli::detail {

namespace {

using models::Kind;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Entry {
  Kind kind;
  json params;
};

/// Every kind and variant at small sizes.
std::vector<Entry> catalog() {
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

std::string name_of(const Entry& e) {
  std::string n = models::to_string(e.kind);
  if (e.params.contains("variant")) n += "/" + e.params["variant"].get<std::string>();
  return n;
}

Vector random_point(Index n, Rng& rng) { return linalg::random_normal(n, rng, 0.8); }

Vector fd_gradient(const Model& model, const Vector& theta) {
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

std::string sci(double x) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << x;
  return s.str();
}

CriterionResult result(int id, std::string title, bool passed, std::string detail) {
  return {id, std::move(title), passed, std::move(detail), 0.0};
}

/// Grid scan of f followed by golden-section refinement around the best cell.
double scan_minimum(const std::function<double(double)>& f, double lo, double hi, double step) {
  double best_x = lo, best = kInf;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= count; ++k) {
    const double x = lo + static_cast<double>(k) * step;
    const double y = f(x);
    if (std::isfinite(y) && y < best) best = y, best_x = x;
  }
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
  double c = b - g * (b - a), d = a + g * (b - a);
  for (int i = 0; i < 200; ++i) {
    if (f(c) < f(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return std::min(best, f(0.5 * (a + b)));
}

/// |U A|^2 + |V A^-T|^2 minimized over A: random orbit draws, then descent
/// along the group, A <- A (I - t A^T grad), from the best draw.
double orbit_descent_min_cost(const Matrix& u, const Matrix& v, Rng& rng) {
  const Index r = u.cols();
  auto cost = [&](const Matrix& a) { return (u * a).squaredNorm() + (v * a.inverse().transpose()).squaredNorm(); };
  Matrix best_a = Matrix::Identity(r, r);
  double best = cost(best_a);
  for (int k = 0; k < 500; ++k) {
    Matrix a = linalg::random_normal(r, r, rng);
    if (linalg::condition_number(a) > 100.0) continue;
    const double c = cost(a);
    if (c < best) best = c, best_a = a;
  }
  const Matrix uu = u.transpose() * u, vv = v.transpose() * v;
  const Matrix eye = Matrix::Identity(r, r);
  Matrix a = best_a;
  double f = best;
  for (int it = 0; it < 20000; ++it) {
    const Matrix ai = a.inverse();
    const Matrix dir = a.transpose() * (2.0 * uu * a - 2.0 * ai.transpose() * ai * vv * ai.transpose());
    const double gn = dir.squaredNorm();
    if (gn < 1e-28) break;
    double step = 1.0 / std::max(1.0, std::sqrt(gn));
    while (step > 1e-16 && !(cost(a * (eye - step * dir)) <= f - 0.25 * step * gn)) step *= 0.5;
    if (step <= 1e-16) break;
    a = a * (eye - step * dir);
    f = cost(a);
  }
  return std::min(best, f);
}

}  // namespace

CriterionResult check_gram_relation(double tol_scale) {
  std::vector<std::pair<std::string, models::ModelSpec>> pool;
  for (const auto& e : catalog()) {
    auto [spec, data] = models::build_model(e.kind, e.params, 10);
    if (spec.gauge && spec.gauge->mode == symmetry::GaugeMode::explicit_map) pool.emplace_back(name_of(e), spec);
  }
  double worst = 0.0;
  std::string worst_model;
  int points = 0;
  Rng rng(2002);
  for (int k = 0; k < 100; ++k) {
    const auto& [name, spec] = pool[static_cast<std::size_t>(k) % pool.size()];
    const Vector theta = random_point(spec.param_dim, rng);
    const auto cg = symmetry::constraint_gram(theta, spec.generators, *spec.gauge);
    const double d = cg.relative_discrepancy.value_or(kInf);
    if (!(d <= worst)) worst = d, worst_model = name;
    ++points;
  }
  const bool ok = pool.size() >= 4 && worst < 1e-8 * tol_scale;
  return result(2, "Gram relation G = M H^-1 M^T", ok,
                std::to_string(points) + " points over " + std::to_string(pool.size()) + " models, max rel " +
                    sci(worst) + (worst_model.empty() ? "" : " (" + worst_model + ")"));
}

CriterionResult check_gradients(double tol_scale) {
  double worst = 0.0;
  std::string worst_model;
  const auto entries = catalog();
  for (const auto& e : entries) {
    auto [spec, data] = models::build_model(e.kind, e.params, 7);
    Rng rng(11, static_cast<std::uint64_t>(e.kind));
    for (int trial = 0; trial < 10; ++trial) {
      const Vector theta = random_point(spec.param_dim, rng);
      const Vector fd = fd_gradient(*spec.model, theta);
      const double rel = (spec.model->gradient(theta) - fd).norm() / std::max(1e-8, fd.norm());
      if (!(rel <= worst)) worst = rel, worst_model = name_of(e);
    }
  }
  return result(3, "finite-difference gradients", worst < 1e-5 * tol_scale,
                std::to_string(entries.size()) + " models x 10 points, max rel " + sci(worst) +
                    (worst_model.empty() ? "" : " (" + worst_model + ")"));
}

CriterionResult check_invariance(double tol_scale) {
  double inv = 0.0, drift = 0.0;
  std::size_t pairs = 0;
  for (const auto& e : catalog()) {
    auto [spec, data] = models::build_model(e.kind, e.params, 3);
    pairs += static_cast<std::size_t>(spec.generators.m());
    if (spec.generators.m() == 0) continue;
    Rng rng(5, static_cast<std::uint64_t>(e.kind));
    for (int trial = 0; trial < 20; ++trial) {
      const Vector theta = random_point(spec.param_dim, rng);
      // Positive group elements only: for ReLU neurons this is alpha = exp(t) > 0.
      const double t = rng.uniform(-1.0, 1.0);
      inv = std::max(inv, symmetry::check_invariance(*spec.model, spec.generators, theta, t));
      drift = std::max(drift, symmetry::check_drift_orthogonality(*spec.model, spec.generators, theta));
    }
  }
  const bool ok = inv < 1e-10 * tol_scale && drift < 1e-8 * tol_scale;
  return result(4, "invariance and drift orthogonality", ok,
                std::to_string(pairs) + " (model, generator) pairs x 20 points, invariance " + sci(inv) + ", drift " +
                    sci(drift));
}

CriterionResult check_oracle_equivalences(double tol_scale) {
  using namespace reductions;
  const double tol = 1e-6 * tol_scale;
  std::vector<std::string> bad;
  double worst = 0.0;
  auto note = [&](const std::string& what, double err) {
    worst = std::max(worst, err);
    if (!(err < tol)) bad.push_back(what + " " + sci(err));
  };

  for (double z : {0.5, 1.0, 4.0, -2.0, 7.5}) {
    const double grid = scan_minimum([z](double u) { return u == 0.0 ? kInf : u * u + (z / u) * (z / u); }, -5.0, 5.0, 1e-3);
    note("balanced_scalar", std::abs(grid - balanced_scalar(z).cost));
  }

  Rng rng(1313);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix z = linalg::random_normal(4, 2, rng) * linalg::random_normal(2, 3, rng);
    const auto f = balanced_matrix(z, 2);
    const Matrix r = linalg::random_normal(2, 2, rng);
    const double found = orbit_descent_min_cost(f.u_star * r, f.v_star * r.inverse().transpose(), rng);
    note("balanced_matrix", std::abs(found - f.cost));
  }

  for (double s : {1.0, 8.0, 27.0, 0.3}) {
    const double x = cp_balance(s, 3).squared_norm;
    const auto obj = [s](double a, double b) { return std::exp(a + b) + s * std::exp(-a) + s * std::exp(-b); };
    for (int start = 0; start < 5; ++start) {
      double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
      for (int it = 0; it < 20000; ++it) {
        const double ga = std::exp(a + b) - s * std::exp(-a);
        const double gb = std::exp(a + b) - s * std::exp(-b);
        if (std::hypot(ga, gb) < 1e-13) break;
        double step = 1.0;
        const double f0 = obj(a, b);
        while (step > 1e-20 && obj(a - step * ga, b - step * gb) > f0 - 0.5 * step * (ga * ga + gb * gb)) step *= 0.5;
        a -= step * ga;
        b -= step * gb;
      }
      note("cp_balance", std::abs(obj(a, b) - 3.0 * x * x));
    }
  }

  for (double c : {0.5, 1.0, 2.0, 5.0}) {
    for (int l : {1, 2, 3, 4}) {
      const double big_c = c * c;
      const auto f = [&](double t) { return std::pow(t, l) + big_c * l / t; };
      const double grid = scan_minimum(f, 1e-3, 10.0, 1e-3);
      note("deep_conv_balance", std::abs(grid - f(deep_conv_balance(c, l, true).squared_magnitude)));
    }
  }

  for (int trial = 0; trial < 5; ++trial) {
    const Vector w = linalg::random_normal(1 + static_cast<Index>(rng.below(5)), rng);
    const double w2 = w.squaredNorm();
    const double grid = scan_minimum([w2](double s) { return s * s + w2 / (s * s); }, 1e-3, 10.0, 1e-3);
    note("block_balance", std::abs(grid - block_balance(w).value));
  }

  std::string detail = "max |oracle - closed form| " + sci(worst);
  for (const auto& b : bad) detail += "; " + b;
  return result(13, "reductions match brute-force oracles", bad.empty(), detail);
}

CriterionResult check_tt_balancing(double tol_scale) {
  Rng rng(1414);
  double residual = 0.0, invariance = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Index n1 = 2 + static_cast<Index>(rng.below(5));
    const Index r = 1 + static_cast<Index>(rng.below(std::min<Index>(n1, 3)));
    const Index m = r + static_cast<Index>(rng.below(8));
    const Matrix u1 = linalg::random_normal(n1, r, rng);
    const Matrix u2 = linalg::random_normal(r, m, rng);
    const auto b = reductions::tt_balance(u1, u2);
    const Matrix t = u1 * u2;
    residual = std::max(residual, b.residual_after);
    invariance = std::max(invariance, (u1 * b.a * (b.a.inverse() * u2) - t).norm() / t.norm());
  }
  const bool ok = residual < 1e-10 * tol_scale && invariance < 1e-12 * tol_scale;
  return result(14, "TT bond balancing", ok,
                "50 core pairs, residual " + sci(residual) + ", relative tensor change " + sci(invariance));
}

CriterionResult check_pca_stationarity(double tol_scale) {
  Rng rng(1515);
  double residual = 0.0;
  bool kappa_zero_exact = true, interior = true;
  for (int k = 0; k < 100; ++k) {
    const Index r = 2 + static_cast<Index>(rng.below(5));
    Vector s(r);
    for (Index i = 0; i < r; ++i) s(i) = rng.uniform(0.5, 5.0);
    const Vector ones = reductions::pca_lambda_solve(s, 0.0);
    kappa_zero_exact = kappa_zero_exact && (ones.array() == 1.0).all();
    const double kappa = rng.uniform(1e-6, 0.04);
    const Vector lambda = reductions::pca_lambda_solve(s, kappa);
    residual = std::max(residual, reductions::pca_stationarity_residual(s, kappa, lambda));
    interior = interior && (lambda.array() > 0.0).all() && (lambda.array() < 1.0).all();
  }
  const bool ok = residual < 1e-10 * tol_scale && kappa_zero_exact && interior;
  return result(15, "PCA stationarity", ok,
                "100 instances, residual " + sci(residual) + (kappa_zero_exact ? ", kappa=0 exact" : ", kappa=0 NOT exact") +
                    (interior ? ", roots in (0,1)" : ", root outside (0,1)"));
}

CriterionResult check_orbit_counting(double) {
  Rng rng(1616);
  int checked = 0, enumerated = 0;
  std::string failure;
  for (int trial = 0; trial < 60 && failure.empty(); ++trial) {
    const Index m = 1 + static_cast<Index>(rng.below(8));
    std::vector<Index> owner;
    for (Index left = m, c = 0; left > 0; ++c) {
      const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(left)));
      owner.insert(owner.end(), static_cast<std::size_t>(k), c);
      left -= k;
    }
    std::shuffle(owner.begin(), owner.end(), rng.engine());
    const Matrix protos1 = linalg::random_normal(m, 2, rng), protos2 = linalg::random_normal(2, m, rng);
    Matrix w1(m, 2), w2(2, m);
    for (Index i = 0; i < m; ++i) {
      w1.row(i) = protos1.row(owner[static_cast<std::size_t>(i)]);
      w2.col(i) = protos2.col(owner[static_cast<std::size_t>(i)]);
    }
    const auto count = reductions::discrete_orbit_size(w1, w2);
    if (count.orbit_size * count.stabilizer_size != reductions::factorial(static_cast<int>(m))) {
      failure = "orbit x stabilizer != m! at m = " + std::to_string(m);
    }
    ++checked;
    if (m > 5) continue;
    std::vector<Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::vector<std::pair<Matrix, Matrix>> seen;
    std::uint64_t stabilizer = 0;
    do {
      Matrix p1(m, 2), p2(2, m);
      for (Index i = 0; i < m; ++i) {
        p1.row(i) = w1.row(perm[static_cast<std::size_t>(i)]);
        p2.col(i) = w2.col(perm[static_cast<std::size_t>(i)]);
      }
      if (p1 == w1 && p2 == w2) ++stabilizer;
      if (std::none_of(seen.begin(), seen.end(), [&](const auto& e) { return e.first == p1 && e.second == p2; })) {
        seen.emplace_back(p1, p2);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (seen.size() != count.orbit_size || stabilizer != count.stabilizer_size) {
      failure = "enumeration mismatch at m = " + std::to_string(m);
    }
    ++enumerated;
  }
  return result(16, "discrete orbit counting", failure.empty(),
                failure.empty() ? std::to_string(checked) + " patterns (m <= 8), " + std::to_string(enumerated) +
                                      " enumerated exhaustively (m <= 5)"
                                : failure);
}

}  // namespace orbitlab::expcli::detail
