#pragma once

#include "orbitlab/rng.hpp"
#include "orbitlab/types.hpp"

namespace orbitlab::linalg {

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
struct SymEig {
  Vector values;
  Matrix vectors;
};
SymEig sym_eig(const Matrix& a);

/// Raises an SPD matrix to a real power through its eigen-decomposition.
/// Throws NumericalFailure when an eigenvalue is below `rel_cutoff * max`.
Matrix spd_power(const Matrix& a, double power, double rel_cutoff = 1e-12);

/// Compact SVD with singular values descending and the sign of each left
/// singular vector fixed so its largest-magnitude entry is positive.
struct Svd {
  Matrix u;       // m x k
  Vector sigma;   // k, descending
  Matrix v;       // n x k
};
Svd svd(const Matrix& a);

/// Numerical rank at a relative singular-value cutoff.
Index numerical_rank(const Vector& sigma_desc, double rel_cutoff = 1e-10);

Matrix random_normal(Index rows, Index cols, Rng& rng, double stddev = 1.0);
Vector random_normal(Index n, Rng& rng, double stddev = 1.0);

/// Random matrix with orthonormal columns (QR of a Gaussian matrix).
Matrix random_orthonormal(Index rows, Index cols, Rng& rng);

double condition_number(const Matrix& a);

}  // namespace orbitlab::linalg
