#pragma once

#include "orbitlab/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace orbitlab::reductions {

/// Nonnegative values sorted descending.
class Spectrum {
 public:
  Spectrum() = default;
  /// Throws InvalidArgument when a value is negative, non-finite or out of order.
  explicit Spectrum(Vector values);
  /// Sorts descending and validates.
  static Spectrum from_unsorted(Vector values);

  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_(i); }

 private:
  Vector values_;
};

struct ScalarBalance {
  double u = 0.0;
  double v = 0.0;
  double cost = 0.0;
};
/// Minimum of u^2 + v^2 subject to u v = z.
ScalarBalance balanced_scalar(double z);

enum class FeatureOperator { identity, forward_difference };

struct ReducedBias {
  std::optional<double> value;          // empty when some feature vanishes
  std::vector<Index> singular_indices;  // features with (A w)_i == 0

  bool singular() const { return !value.has_value(); }
};
/// sum_i log |(A w)_i|.
ReducedBias reduced_scalar_bias(const Vector& w, FeatureOperator op);
ReducedBias reduced_scalar_bias(const Vector& w, const Matrix& a);
Vector apply_feature_operator(const Vector& w, FeatureOperator op);

struct BalancedFactorization {
  Matrix u_star;
  Matrix v_star;
  double cost = 0.0;          // |U|_F^2 + |V|_F^2
  double nuclear_norm = 0.0;
};
/// U* = P Sigma^{1/2}, V* = Q Sigma^{1/2}, padded with zero columns up to r.
BalancedFactorization balanced_matrix(const Matrix& z, Index r);

/// sum_{i,j} log(sigma_i + sigma_j).
double gl_logdet_full(const Spectrum& sigma);

struct GammaFamily {
  double product = 0.0;   // prod_{i,j} (a_i + b_j)
  double lambda12 = 0.0;  // (sigma_1 + sigma_2) gamma^2
  Vector a;
  Vector b;
};
GammaFamily gl_det_gamma_family(const Spectrum& sigma, double gamma);

struct LayerBalance {
  double magnitude = 0.0;          // per-layer |w_l(omega)|
  double squared_magnitude = 0.0;  // t = |w_l(omega)|^2, minimizer of t^L + C L / t
};
LayerBalance deep_conv_balance(double c_mag, int layers, bool with_readout);

struct ModeBalance {
  double squared_norm = 0.0;
  double norm = 0.0;
};
ModeBalance cp_balance(double s, int order);

struct TtBalance {
  Matrix a;
  double residual_before = 0.0;
  double residual_after = 0.0;
};
/// Bond transformation for U1 (n1 x r) and U2 (r x m) that equalizes
/// (U1 A)^T (U1 A) and (A^{-1} U2)(A^{-1} U2)^T.
TtBalance tt_balance(const Matrix& u1, const Matrix& u2);

/// Root of 2 (lambda_i - 1) s_i + kappa sum_{j != i} 1 / (lambda_i + lambda_j) = 0.
/// Coordinates with s_i = 0 and kappa > 0 are pinned to 0.
Vector pca_lambda_solve(const Vector& s, double kappa);
/// Max-norm residual of the system solved by pca_lambda_solve, under the same pinning rule.
double pca_stationarity_residual(const Vector& s, double kappa, const Vector& lambda);

struct BlockBalance {
  double s_star = 0.0;
  double value = 0.0;
  bool boundary = false;
};
/// min over s of s^2 + |w_g|^2 / s^2.
BlockBalance block_balance(const Vector& w_g);

struct OrbitCount {
  std::uint64_t orbit_size = 1;
  std::uint64_t stabilizer_size = 1;
  std::vector<Index> multiplicities;  // cluster sizes, in order of first appearance
};
/// Neuron i is (row i of W1, column i of W2); neurons equal within `tol`
/// in max-norm are grouped together. Requires m <= 20.
OrbitCount discrete_orbit_size(const Matrix& w1, const Matrix& w2, double tol = 1e-12);

/// |w_j| / |v_j| at the gauge minimum for a degree-k homogeneous activation.
double homogeneity_balance_ratio(double k);

std::uint64_t factorial(int m);

}  // namespace orbitlab::reductions
