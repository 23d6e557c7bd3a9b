#include "orbitlab/symmetry.hpp"

#include "orbitlab/errors.hpp"
#include "orbitlab/linalg.hpp"

#include <cmath>
#include <algorithm>
#include <memory>
#include <utility>

namespace orbitlab::symmetry {

namespace {

void require_length(const Vector& v, Index n, const char* what) {
  if (v.size() != n) {
    throw InvalidArgument(std::string(what) + ": length " + std::to_string(v.size()) +
                          ", expected " + std::to_string(n));
  }
}

/// Inverse of a symmetric PSD matrix with the orbit-degeneracy cutoff.
Matrix inverse_orbit_gram(const Matrix& h) {
  const linalg::SymEig eig = linalg::sym_eig(h);
  const double top = eig.values.size() ? eig.values.maxCoeff() : 0.0;
  const double low = eig.values.size() ? eig.values.minCoeff() : 0.0;
  if (top <= 0.0 || low <= 1e-12 * top) {
    throw OrbitDegenerate("orbit-degenerate point: orbit Gram matrix is singular", low);
  }
  return eig.vectors * eig.values.cwiseInverse().asDiagonal() * eig.vectors.transpose();
}

}  // namespace

bool GeneratorSet::has_action() const {
  if (generators.empty()) return false;
  for (const auto& g : generators) {
    if (!g.flow) return false;
  }
  return true;
}

Matrix GeneratorSet::tangents(const Vector& theta) const {
  Matrix xi(theta.size(), m());
  for (Index a = 0; a < m(); ++a) {
    Vector col = generators[static_cast<std::size_t>(a)].field(theta);
    require_length(col, theta.size(), "generator field");
    xi.col(a) = col;
  }
  return xi;
}

Vector GeneratorSet::act(const Vector& theta, Index a, double t) const {
  if (a < 0 || a >= m()) throw InvalidArgument("generator index out of range");
  const auto& g = generators[static_cast<std::size_t>(a)];
  if (!g.flow) throw UnsupportedOperation("generator set '" + label + "' has no finite group action");
  return g.flow(theta, t);
}

GeneratorSet scaling_generators(std::string label, std::vector<ScalingGroup> groups) {
  GeneratorSet set{std::move(label), {}};
  for (auto& group : groups) {
    auto shared = std::make_shared<const ScalingGroup>(std::move(group));
    Generator g;
    g.field = [shared](const Vector& theta) {
      Vector xi = Vector::Zero(theta.size());
      for (Index i : shared->up) xi(i) += theta(i);
      for (Index i : shared->down) xi(i) -= shared->down_power * theta(i);
      return xi;
    };
    g.flow = [shared](const Vector& theta, double t) {
      Vector out = theta;
      const double up = std::exp(t);
      const double down = std::exp(-shared->down_power * t);
      for (Index i : shared->up) out(i) *= up;
      for (Index i : shared->down) out(i) *= down;
      return out;
    };
    set.generators.push_back(std::move(g));
  }
  return set;
}

GeneratorSet rotation_generators(std::string label, std::vector<RotationPlanes> planes) {
  GeneratorSet set{std::move(label), {}};
  for (auto& plane : planes) {
    if (plane.first.size() != plane.second.size()) throw InvalidArgument("rotation planes: unpaired indices");
    auto shared = std::make_shared<const RotationPlanes>(std::move(plane));
    Generator g;
    g.field = [shared](const Vector& theta) {
      Vector xi = Vector::Zero(theta.size());
      for (std::size_t k = 0; k < shared->first.size(); ++k) {
        const Index a = shared->first[k];
        const Index b = shared->second[k];
        xi(a) -= shared->rate * theta(b);
        xi(b) += shared->rate * theta(a);
      }
      return xi;
    };
    g.flow = [shared](const Vector& theta, double t) {
      Vector out = theta;
      const double c = std::cos(shared->rate * t);
      const double s = std::sin(shared->rate * t);
      for (std::size_t k = 0; k < shared->first.size(); ++k) {
        const Index a = shared->first[k];
        const Index b = shared->second[k];
        out(a) = c * theta(a) - s * theta(b);
        out(b) = s * theta(a) + c * theta(b);
      }
      return out;
    };
    set.generators.push_back(std::move(g));
  }
  return set;
}

GeneratorSet gl_generators(const MatrixBlock& u, const MatrixBlock& v, bool diagonal_only) {
  if (u.cols != v.cols) throw InvalidArgument("gl_generators: U and V must share the column count");
  const Index r = u.cols;
  GeneratorSet set;
  set.label = diagonal_only ? "GL(" + std::to_string(r) + ") diagonal subalgebra"
                            : "GL(" + std::to_string(r) + ")";
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < r; ++j) {
      if (diagonal_only && i != j) continue;
      Generator g;
      // E_ij acts as U -> U E_ij (column j receives column i) and V -> -V E_ji.
      g.field = [u, v, i, j](const Vector& theta) {
        Vector xi = Vector::Zero(theta.size());
        for (Index k = 0; k < u.rows; ++k) xi(u.at(k, j)) += theta(u.at(k, i));
        for (Index k = 0; k < v.rows; ++k) xi(v.at(k, i)) -= theta(v.at(k, j));
        return xi;
      };
      g.flow = [u, v, i, j](const Vector& theta, double t) {
        Vector out = theta;
        if (i == j) {
          const double up = std::exp(t);
          const double down = std::exp(-t);
          for (Index k = 0; k < u.rows; ++k) out(u.at(k, i)) *= up;
          for (Index k = 0; k < v.rows; ++k) out(v.at(k, i)) *= down;
        } else {
          for (Index k = 0; k < u.rows; ++k) out(u.at(k, j)) += t * theta(u.at(k, i));
          for (Index k = 0; k < v.rows; ++k) out(v.at(k, i)) -= t * theta(v.at(k, j));
        }
        return out;
      };
      set.generators.push_back(std::move(g));
    }
  }
  return set;
}

GeneratorSet projector_generators(std::string label, std::vector<ProjectorScaling> scalings) {
  GeneratorSet set{std::move(label), {}};
  for (auto& scaling : scalings) {
    auto shared = std::make_shared<const ProjectorScaling>(std::move(scaling));
    Generator g;
    g.field = [shared](const Vector& theta) {
      const Index k = shared->projector.rows();
      Vector xi = Vector::Zero(theta.size());
      xi.segment(shared->up_offset, k) += shared->projector * theta.segment(shared->up_offset, k);
      xi.segment(shared->down_offset, k) -= shared->projector * theta.segment(shared->down_offset, k);
      return xi;
    };
    g.flow = [shared](const Vector& theta, double t) {
      const Index k = shared->projector.rows();
      Vector out = theta;
      out.segment(shared->up_offset, k) +=
          std::expm1(t) * (shared->projector * theta.segment(shared->up_offset, k));
      out.segment(shared->down_offset, k) +=
          std::expm1(-t) * (shared->projector * theta.segment(shared->down_offset, k));
      return out;
    };
    set.generators.push_back(std::move(g));
  }
  return set;
}

GaugeMap metric_dual_gauge(const GeneratorSet& gens) {
  GaugeMap gauge;
  gauge.mode = GaugeMode::explicit_map;
  gauge.m = gens.m();
  gauge.chi = [gens](const Vector& theta) {
    Vector chi(gens.m());
    for (Index a = 0; a < gens.m(); ++a) {
      chi(a) = 0.5 * theta.dot(gens.generators[static_cast<std::size_t>(a)].field(theta));
    }
    return chi;
  };
  gauge.grad_chi = [gens](const Vector& theta) -> Matrix { return gens.tangents(theta).transpose(); };
  return gauge;
}

Matrix orbit_gram(const Vector& theta, const GeneratorSet& gens) {
  const Matrix xi = gens.tangents(theta);
  Matrix h = xi.transpose() * xi;
  return 0.5 * (h + h.transpose());
}

Matrix fp_matrix(const Vector& theta, const GeneratorSet& gens, const GaugeMap& gauge) {
  switch (gauge.mode) {
    case GaugeMode::balanced:
      return orbit_gram(theta, gens);
    case GaugeMode::unit_fp:
      return Matrix::Identity(gens.m(), gens.m());
    case GaugeMode::explicit_map:
      break;
  }
  if (gauge.m != gens.m()) {
    throw InvalidArgument("fp_matrix: gauge has " + std::to_string(gauge.m) + " constraints but " +
                          std::to_string(gens.m()) + " generators");
  }
  const Matrix grad = gauge.grad_chi(theta);
  if (grad.rows() != gauge.m || grad.cols() != theta.size()) {
    throw InvalidArgument("fp_matrix: grad_chi has wrong shape");
  }
  return grad * gens.tangents(theta);
}

ConstraintGram constraint_gram(const Vector& theta, const GeneratorSet& gens, const GaugeMap& gauge) {
  ConstraintGram out;
  out.h = orbit_gram(theta, gens);
  const Matrix h_inv = inverse_orbit_gram(out.h);
  out.m = fp_matrix(theta, gens, gauge);
  if (gauge.mode == GaugeMode::explicit_map) {
    const Vector sv = linalg::svd(out.m).sigma;
    if (sv.size() == 0 || sv(0) <= 0.0 || sv(sv.size() - 1) <= 1e-12 * sv(0)) {
      throw NonTransversalGauge("non-transversal gauge: Faddeev-Popov matrix is singular");
    }
  }
  out.g = out.m * h_inv * out.m.transpose();
  out.g = 0.5 * (out.g + out.g.transpose());
  if (gauge.mode == GaugeMode::explicit_map) {
    const Matrix grad = gauge.grad_chi(theta);
    Matrix direct = grad * grad.transpose();
    const double scale = direct.norm();
    out.relative_discrepancy = (direct - out.g).norm() / (scale > 0.0 ? scale : 1.0);
    out.direct = std::move(direct);
  }
  return out;
}

double logdet_spd(const Matrix& a, double rel_cutoff) {
  const linalg::SymEig eig = linalg::sym_eig(a);
  if (eig.values.size() == 0) return 0.0;
  const double top = eig.values.maxCoeff();
  const double low = eig.values.minCoeff();
  if (top <= 0.0 || low <= rel_cutoff * top) {
    throw OrbitDegenerate("orbit-degenerate point: log det of a singular matrix", low);
  }
  return eig.values.array().log().sum();
}

double gauge_correction(const Vector& theta, const GeneratorSet& gens, GaugeMode mode, double sigma,
                        double beta) {
  if (mode == GaugeMode::explicit_map) {
    throw InvalidArgument("gauge_correction: explicit mode needs a gauge map");
  }
  if (beta <= 0.0) throw InvalidArgument("gauge_correction: beta must be positive");
  const double logdet_h = logdet_spd(orbit_gram(theta, gens));
  const double prefactor = sigma * sigma / (2.0 * beta);
  return mode == GaugeMode::balanced ? prefactor * logdet_h : -prefactor * logdet_h;
}

double gauge_correction(const Vector& theta, const GeneratorSet& gens, const GaugeMap& gauge, double sigma,
                        double beta) {
  if (gauge.mode != GaugeMode::explicit_map) return gauge_correction(theta, gens, gauge.mode, sigma, beta);
  if (beta <= 0.0) throw InvalidArgument("gauge_correction: beta must be positive");
  return sigma * sigma / (2.0 * beta) * logdet_spd(constraint_gram(theta, gens, gauge).g);
}

double check_invariance(const Model& model, const GeneratorSet& gens, const Vector& theta, double t) {
  if (!gens.has_action()) {
    throw UnsupportedOperation("generator set '" + gens.label + "' has no finite group action");
  }
  const double base = model.loss(theta);
  double worst = 0.0;
  for (Index a = 0; a < gens.m(); ++a) {
    const double moved = model.loss(gens.act(theta, a, t));
    worst = std::max(worst, std::abs(moved - base) / (1.0 + std::abs(base)));
  }
  return worst;
}

double check_drift_orthogonality(const Model& model, const GeneratorSet& gens, const Vector& theta) {
  const Vector grad = model.gradient(theta);
  const Matrix xi = gens.tangents(theta);
  double worst = 0.0;
  for (Index a = 0; a < xi.cols(); ++a) {
    const double num = std::abs(grad.dot(xi.col(a)));
    worst = std::max(worst, num / (grad.norm() * xi.col(a).norm() + 1e-30));
  }
  return worst;
}

}  // namespace orbitlab::symmetry
