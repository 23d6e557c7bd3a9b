#include "orbitlab/linalg.hpp"

#include "orbitlab/errors.hpp"

#include <cmath>

namespace orbitlab::linalg {

SymEig sym_eig(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()));
  if (solver.info() != Eigen::Success) throw NumericalFailure("symmetric eigen-decomposition failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix spd_power(const Matrix& a, double power, double rel_cutoff) {
  const SymEig eig = sym_eig(a);
  const double top = eig.values.size() > 0 ? eig.values.maxCoeff() : 0.0;
  if (eig.values.size() > 0 && (top <= 0.0 || eig.values.minCoeff() <= rel_cutoff * top)) {
    throw NumericalFailure("matrix is not positive definite (min eigenvalue " +
                           std::to_string(eig.values.minCoeff()) + ")");
  }
  const Vector powered = eig.values.array().pow(power);
  return eig.vectors * powered.asDiagonal() * eig.vectors.transpose();
}

Svd svd(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Svd out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  for (Index k = 0; k < out.u.cols(); ++k) {
    Index arg = 0;
    out.u.col(k).cwiseAbs().maxCoeff(&arg);
    if (out.u(arg, k) < 0.0) {
      out.u.col(k) *= -1.0;
      out.v.col(k) *= -1.0;
    }
  }
  return out;
}

Index numerical_rank(const Vector& sigma_desc, double rel_cutoff) {
  if (sigma_desc.size() == 0 || sigma_desc(0) <= 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < sigma_desc.size(); ++i) {
    if (sigma_desc(i) > rel_cutoff * sigma_desc(0)) ++rank;
  }
  return rank;
}

Matrix random_normal(Index rows, Index cols, Rng& rng, double stddev) {
  Matrix m(rows, cols);
  // Column-major fill keeps the draw order fixed for a given shape.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = stddev * rng.normal();
  return m;
}

Vector random_normal(Index n, Rng& rng, double stddev) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = stddev * rng.normal();
  return v;
}

Matrix random_orthonormal(Index rows, Index cols, Rng& rng) {
  const Matrix g = random_normal(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  // Fix the sign ambiguity of QR so the result is a function of the draw.
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index k = 0; k < cols; ++k)
    if (r(k, k) < 0.0) q.col(k) *= -1.0;
  return q;
}

double condition_number(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> solver(a);
  const Vector& s = solver.singularValues();
  if (s.size() == 0) return 1.0;
  const double lo = s(s.size() - 1);
  return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

}  // namespace orbitlab::linalg
