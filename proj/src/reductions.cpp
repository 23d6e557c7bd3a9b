#include "orbitlab/reductions.hpp"

#include "orbitlab/errors.hpp"
#include "orbitlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace orbitlab::reductions {

Spectrum::Spectrum(Vector values) : values_(std::move(values)) {
  for (Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_(i)) || values_(i) < 0.0) {
      throw InvalidArgument("spectrum values must be finite and nonnegative");
    }
    if (i > 0 && values_(i) > values_(i - 1)) throw InvalidArgument("spectrum must be sorted descending");
  }
}

Spectrum Spectrum::from_unsorted(Vector values) {
  std::sort(values.data(), values.data() + values.size(), std::greater<>());
  return Spectrum(std::move(values));
}

ScalarBalance balanced_scalar(double z) {
  const double u = std::sqrt(std::abs(z));
  const double v = z < 0.0 ? -u : u;
  return {u, v, u * u + v * v};
}

Vector apply_feature_operator(const Vector& w, FeatureOperator op) {
  switch (op) {
    case FeatureOperator::identity:
      return w;
    case FeatureOperator::forward_difference:
      if (w.size() < 2) throw InvalidArgument("forward difference needs at least two entries");
      return w.tail(w.size() - 1) - w.head(w.size() - 1);
  }
  return w;
}

namespace {

ReducedBias log_features(const Vector& features) {
  ReducedBias out;
  double sum = 0.0;
  for (Index i = 0; i < features.size(); ++i) {
    if (features(i) == 0.0) {
      out.singular_indices.push_back(i);
    } else {
      sum += std::log(std::abs(features(i)));
    }
  }
  if (out.singular_indices.empty()) out.value = sum;
  return out;
}

}  // namespace

ReducedBias reduced_scalar_bias(const Vector& w, FeatureOperator op) {
  return log_features(apply_feature_operator(w, op));
}

ReducedBias reduced_scalar_bias(const Vector& w, const Matrix& a) {
  if (a.cols() != w.size()) throw InvalidArgument("feature operator has wrong column count");
  return log_features(a * w);
}

BalancedFactorization balanced_matrix(const Matrix& z, Index r) {
  const auto svd = linalg::svd(z);
  const Index rank = linalg::numerical_rank(svd.sigma, 1e-10);
  if (r < rank) {
    throw InvalidArgument("rank bound " + std::to_string(r) + " below numerical rank " + std::to_string(rank));
  }
  BalancedFactorization out;
  out.u_star = Matrix::Zero(z.rows(), r);
  out.v_star = Matrix::Zero(z.cols(), r);
  const Vector root = svd.sigma.head(rank).cwiseSqrt();
  out.u_star.leftCols(rank) = svd.u.leftCols(rank) * root.asDiagonal();
  out.v_star.leftCols(rank) = svd.v.leftCols(rank) * root.asDiagonal();
  out.nuclear_norm = svd.sigma.head(rank).sum();
  out.cost = out.u_star.squaredNorm() + out.v_star.squaredNorm();
  return out;
}

double gl_logdet_full(const Spectrum& sigma) {
  double sum = 0.0;
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] <= 0.0) throw InvalidArgument("gl_logdet_full requires positive singular values");
    for (Index j = 0; j < sigma.size(); ++j) sum += std::log(sigma[i] + sigma[j]);
  }
  return sum;
}

GammaFamily gl_det_gamma_family(const Spectrum& sigma, double gamma) {
  if (sigma.size() < 2) throw InvalidArgument("gamma family needs r >= 2");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  GammaFamily out;
  out.a = sigma.values();
  out.b = sigma.values();
  const double g2 = gamma * gamma;
  out.a(0) = sigma[0] * g2;
  out.a(1) = sigma[1] / g2;
  out.b(0) = sigma[0] / g2;
  out.b(1) = sigma[1] * g2;
  out.product = 1.0;
  for (Index i = 0; i < out.a.size(); ++i) {
    for (Index j = 0; j < out.b.size(); ++j) out.product *= out.a(i) + out.b(j);
  }
  out.lambda12 = (sigma[0] + sigma[1]) * g2;
  return out;
}

LayerBalance deep_conv_balance(double c_mag, int layers, bool with_readout) {
  if (layers < 1) throw InvalidArgument("deep_conv_balance needs L >= 1");
  if (c_mag < 0.0) throw InvalidArgument("magnitude must be nonnegative");
  const double factors = with_readout ? layers + 1.0 : static_cast<double>(layers);
  const double magnitude = std::pow(c_mag, 1.0 / factors);
  return {magnitude, magnitude * magnitude};
}

ModeBalance cp_balance(double s, int order) {
  if (!(s > 0.0)) throw InvalidArgument("cp_balance requires S > 0");
  if (order < 2) throw InvalidArgument("cp_balance requires order >= 2");
  const double sq = std::pow(s, 1.0 / order);
  return {sq, std::sqrt(sq)};
}

namespace {

double bond_residual(const Matrix& u1, const Matrix& u2) {
  return (u1.transpose() * u1 - u2 * u2.transpose()).norm();
}

}  // namespace

TtBalance tt_balance(const Matrix& u1, const Matrix& u2) {
  if (u1.cols() != u2.rows()) throw InvalidArgument("tt_balance: bond dimensions differ");
  const Matrix c1 = u1.transpose() * u1;
  const Matrix c2 = u2 * u2.transpose();
  Matrix half, inv_half, inner;
  try {
    half = linalg::spd_power(c1, 0.5, 1e-12);
    inv_half = linalg::spd_power(c1, -0.5, 1e-12);
    inner = linalg::spd_power(half * c2 * half, 0.25, 1e-12);
  } catch (const NumericalFailure&) {
    throw InvalidArgument("tt_balance: core Gram matrices must be positive definite");
  }
  TtBalance out;
  out.a = inv_half * inner;
  out.residual_before = bond_residual(u1, u2);
  out.residual_after = bond_residual(u1 * out.a, out.a.lu().solve(u2));
  return out;
}

namespace {

struct PcaLayout {
  std::vector<Index> active;
  Index pinned = 0;
  bool include_pinned = false;
};

PcaLayout pca_layout(const Vector& s, double kappa) {
  PcaLayout layout;
  for (Index i = 0; i < s.size(); ++i) {
    if (kappa > 0.0 && s(i) == 0.0) {
      ++layout.pinned;
    } else {
      layout.active.push_back(i);
    }
  }
  layout.include_pinned = layout.active.size() < 2;
  return layout;
}

// Stationarity residual and Jacobian restricted to the active coordinates.
Vector pca_system(const Vector& s, double kappa, const Vector& lambda, const PcaLayout& layout, Matrix* jac) {
  const Index k = static_cast<Index>(layout.active.size());
  Vector f(k);
  if (jac) jac->setZero(k, k);
  for (Index a = 0; a < k; ++a) {
    const Index i = layout.active[a];
    double sum = 0.0, dsum = 0.0;
    for (Index b = 0; b < k; ++b) {
      if (b == a) continue;
      const double inv = 1.0 / (lambda(i) + lambda(layout.active[b]));
      sum += inv;
      dsum += inv * inv;
      if (jac) (*jac)(a, b) = -kappa * inv * inv;
    }
    if (layout.include_pinned && layout.pinned > 0) {
      sum += static_cast<double>(layout.pinned) / lambda(i);
      dsum += static_cast<double>(layout.pinned) / (lambda(i) * lambda(i));
    }
    f(a) = 2.0 * (lambda(i) - 1.0) * s(i) + kappa * sum;
    if (jac) (*jac)(a, a) = 2.0 * s(i) - kappa * dsum;
  }
  return f;
}

}  // namespace

Vector pca_lambda_solve(const Vector& s, double kappa) {
  if (s.size() < 1) throw InvalidArgument("pca_lambda_solve needs r >= 1");
  if (kappa < 0.0 || (s.array() < 0.0).any()) throw InvalidArgument("pca_lambda_solve needs s, kappa >= 0");
  Vector lambda = Vector::Ones(s.size());
  if (kappa == 0.0) return lambda;
  const PcaLayout layout = pca_layout(s, kappa);
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) == 0.0) lambda(i) = 0.0;
  }
  if (layout.active.empty()) return lambda;

  Matrix jac;
  Vector f = pca_system(s, kappa, lambda, layout, &jac);
  double res = f.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < 200; ++iter) {
    if (res < 1e-13) return lambda;
    const Vector step = jac.fullPivLu().solve(f);
    double damp = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, damp *= 0.5) {
      Vector trial = lambda;
      bool positive = true;
      for (Index a = 0; a < step.size(); ++a) {
        const Index i = layout.active[static_cast<std::size_t>(a)];
        trial(i) -= damp * step(a);
        positive = positive && trial(i) > 0.0;
      }
      if (!positive) continue;
      Matrix trial_jac;
      const Vector trial_f = pca_system(s, kappa, trial, layout, &trial_jac);
      const double trial_res = trial_f.lpNorm<Eigen::Infinity>();
      if (std::isfinite(trial_res) && trial_res < res) {
        lambda = trial;
        f = trial_f;
        jac = trial_jac;
        res = trial_res;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (res < 1e-10) return lambda;
  throw NumericalFailure("pca_lambda_solve: Newton did not converge, residual " + std::to_string(res));
}

double pca_stationarity_residual(const Vector& s, double kappa, const Vector& lambda) {
  const PcaLayout layout = pca_layout(s, kappa);
  if (layout.active.empty()) return 0.0;
  return pca_system(s, kappa, lambda, layout, nullptr).lpNorm<Eigen::Infinity>();
}

BlockBalance block_balance(const Vector& w_g) {
  const double norm = w_g.norm();
  if (norm == 0.0) return {0.0, 0.0, true};
  return {std::sqrt(norm), 2.0 * norm, false};
}

std::uint64_t factorial(int m) {
  if (m < 0 || m > 20) throw InvalidArgument("factorial argument out of range");
  std::uint64_t out = 1;
  for (int k = 2; k <= m; ++k) out *= static_cast<std::uint64_t>(k);
  return out;
}

OrbitCount discrete_orbit_size(const Matrix& w1, const Matrix& w2, double tol) {
  const Index m = w1.rows();
  if (w2.cols() != m) throw InvalidArgument("discrete_orbit_size: W2 must have one column per row of W1");
  if (m > 20) throw InvalidArgument("discrete_orbit_size supports at most 20 neurons");
  std::vector<Index> representative;
  OrbitCount out;
  out.multiplicities.clear();
  for (Index i = 0; i < m; ++i) {
    bool placed = false;
    for (std::size_t c = 0; c < representative.size(); ++c) {
      const Index r = representative[c];
      const double gap = std::max((w1.row(i) - w1.row(r)).lpNorm<Eigen::Infinity>(),
                                  (w2.col(i) - w2.col(r)).lpNorm<Eigen::Infinity>());
      if (gap <= tol) {
        ++out.multiplicities[c];
        placed = true;
        break;
      }
    }
    if (!placed) {
      representative.push_back(i);
      out.multiplicities.push_back(1);
    }
  }
  out.stabilizer_size = 1;
  for (const Index k : out.multiplicities) out.stabilizer_size *= factorial(static_cast<int>(k));
  out.orbit_size = factorial(static_cast<int>(m)) / out.stabilizer_size;
  return out;
}

double homogeneity_balance_ratio(double k) {
  if (!(k > 0.0)) throw InvalidArgument("homogeneity degree must be positive");
  return std::pow(k, 1.5);
}

}  // namespace orbitlab::reductions
