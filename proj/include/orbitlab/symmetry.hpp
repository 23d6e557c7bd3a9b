#pragma once

#include "orbitlab/model.hpp"
#include "orbitlab/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace orbitlab::symmetry {

/// One basis element a of the Lie algebra, seen through its action on
/// parameter space.
struct Generator {
  /// Fundamental vector field xi_a(theta) = d/dt exp(t a) . theta at t = 0.
  std::function<Vector(const Vector&)> field;
  /// Finite action exp(t a) . theta; empty when the family provides none.
  std::function<Vector(const Vector&, double)> flow;
};

struct GeneratorSet {
  std::string label;
  std::vector<Generator> generators;

  Index m() const { return static_cast<Index>(generators.size()); }
  bool has_action() const;
  /// n x m matrix whose columns are the fundamental vector fields.
  Matrix tangents(const Vector& theta) const;
  Vector act(const Vector& theta, Index a, double t) const;
};

enum class GaugeMode { explicit_map, balanced, unit_fp };

struct GaugeMap {
  GaugeMode mode = GaugeMode::balanced;
  Index m = 0;
  std::function<Vector(const Vector&)> chi;        // theta -> R^m
  std::function<Matrix(const Vector&)> grad_chi;   // theta -> m x n, rows are grad chi^i
};

// --- generator builders -----------------------------------------------------

/// Coordinate scaling: exp(t) on `up`, exp(-power * t) on `down`.
struct ScalingGroup {
  std::vector<Index> up;
  std::vector<Index> down;
  double down_power = 1.0;
};
GeneratorSet scaling_generators(std::string label, std::vector<ScalingGroup> groups);

/// Simultaneous rotation of coordinate pairs (first[k], second[k]) at angular rate `rate`:
/// xi = rate * (-theta_second on first, +theta_first on second).
struct RotationPlanes {
  std::vector<Index> first;
  std::vector<Index> second;
  double rate = 1.0;
};
GeneratorSet rotation_generators(std::string label, std::vector<RotationPlanes> planes);

/// Column-major block of a parameter vector holding a rows x cols matrix.
struct MatrixBlock {
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index at(Index i, Index j) const { return offset + j * rows + i; }
};

/// GL(r) acting as (U, V) -> (U A, V A^{-T}). With `diagonal_only` the set is the
/// commuting subalgebra of diagonal generators E_ii; otherwise all E_ij.
GeneratorSet gl_generators(const MatrixBlock& u, const MatrixBlock& v, bool diagonal_only);

/// Scaling of the range of a symmetric projector P: exp(t) on P.up-block,
/// exp(-t) on P.down-block.
struct ProjectorScaling {
  Index up_offset = 0;
  Index down_offset = 0;
  Matrix projector;  // k x k, symmetric idempotent
};
GeneratorSet projector_generators(std::string label, std::vector<ProjectorScaling> scalings);

/// Gauge chi_a = 1/2 <theta, xi_a(theta)> for generators whose fields are
/// symmetric linear maps; then grad chi_a = xi_a and M = H on the slice.
GaugeMap metric_dual_gauge(const GeneratorSet& gens);

// --- geometry ---------------------------------------------------------------

/// H_ab = <xi_a, xi_b>.
Matrix orbit_gram(const Vector& theta, const GeneratorSet& gens);

/// M_ia = <grad chi^i, xi_a>; H for balanced mode, identity for unit_fp.
Matrix fp_matrix(const Vector& theta, const GeneratorSet& gens, const GaugeMap& gauge);

struct ConstraintGram {
  Matrix g;                       // M H^-1 M^T
  Matrix h;
  Matrix m;
  std::optional<Matrix> direct;   // <grad chi^i, grad chi^j>, explicit mode only
  std::optional<double> relative_discrepancy;
};

/// Constraint Gram matrix through the orbit Gram relation; in explicit mode
/// also the direct form and their relative Frobenius discrepancy.
ConstraintGram constraint_gram(const Vector& theta, const GeneratorSet& gens, const GaugeMap& gauge);

/// log det of a symmetric positive definite matrix as a sum of log eigenvalues.
/// Throws OrbitDegenerate carrying the offending eigenvalue.
double logdet_spd(const Matrix& a, double rel_cutoff = 1e-12);

/// (sigma^2 / 2 beta) log det G_chi with G = H (balanced) or H^-1 (unit_fp).
double gauge_correction(const Vector& theta, const GeneratorSet& gens, GaugeMode mode,
                        double sigma, double beta);
/// Same for an explicit gauge map, G = M H^-1 M^T.
double gauge_correction(const Vector& theta, const GeneratorSet& gens, const GaugeMap& gauge,
                        double sigma, double beta);

/// max_a |L(exp(t a) theta) - L(theta)| / (1 + |L(theta)|).
double check_invariance(const Model& model, const GeneratorSet& gens, const Vector& theta, double t);

/// max_a |<grad L, xi_a>| / (|grad L| |xi_a| + 1e-30).
double check_drift_orthogonality(const Model& model, const GeneratorSet& gens, const Vector& theta);

}  // namespace orbitlab::symmetry
