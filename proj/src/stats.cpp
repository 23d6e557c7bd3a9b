#include "orbitlab/stats.hpp"

#include "orbitlab/errors.hpp"
#include "orbitlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace orbitlab::stats {

namespace {

void write_two_columns(const std::filesystem::path& path, const std::vector<double>& x,
                       const std::vector<double>& y) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17) << "x,density\n";
  for (std::size_t i = 0; i < x.size(); ++i) out << x[i] << ',' << y[i] << '\n';
}

}  // namespace

void Histogram::write_csv(const std::filesystem::path& path) const {
  std::vector<double> centers(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) centers[k] = center(k);
  write_two_columns(path, centers, density);
}

double DensityCurve::integral() const {
  double total = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) total += 0.5 * (values[k] + values[k - 1]) * (grid[k] - grid[k - 1]);
  return total;
}

double DensityCurve::cdf(double x) const {
  if (grid.empty() || x <= grid.front()) return 0.0;
  const double total = integral();
  double acc = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double h = grid[k] - grid[k - 1];
    if (x < grid[k]) {
      const double s = x - grid[k - 1];
      const double slope = (values[k] - values[k - 1]) / h;
      acc += values[k - 1] * s + 0.5 * slope * s * s;
      return acc / total;
    }
    acc += 0.5 * (values[k] + values[k - 1]) * h;
  }
  return 1.0;
}

void DensityCurve::write_csv(const std::filesystem::path& path) const { write_two_columns(path, grid, values); }

Histogram empirical_density(const std::vector<double>& samples, int bins) {
  if (samples.size() < 1000) throw InvalidArgument("empirical_density needs at least 1000 samples");
  if (bins < 10) throw InvalidArgument("empirical_density needs at least 10 bins");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw InvalidArgument("empirical_density: samples span a zero-width range");
  Histogram h;
  h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) h.bin_edges[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / bins;
  h.bin_edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const double x : samples) {
    auto k = static_cast<std::size_t>((x - lo) / (hi - lo) * bins);
    if (k >= h.counts.size()) k = h.counts.size() - 1;
    ++h.counts[k];
  }
  h.density.resize(h.counts.size());
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < h.counts.size(); ++k) h.density[k] = static_cast<double>(h.counts[k]) / (n * h.bin_width(k));
  return h;
}

double radial_log_weight(int d, double beta, double r, bool corrected) {
  const double loss = 0.5 * (r - 1.0) * (r - 1.0);
  return (corrected ? (d - 1) * std::log(r) : 0.0) - beta * loss;
}

DensityCurve radial_theory_density(int d, double beta, const std::vector<double>& grid, bool corrected) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] > 0.0) || (k > 0 && !(grid[k] > grid[k - 1]))) {
      throw InvalidArgument("radial_theory_density: grid must be positive and strictly increasing");
    }
  }
  DensityCurve c;
  c.grid = grid;
  c.label = corrected ? "gauge" : "naive";
  c.values.resize(grid.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    c.values[k] = radial_log_weight(d, beta, grid[k], corrected);
    peak = std::max(peak, c.values[k]);
  }
  for (double& v : c.values) v = std::exp(v - peak);
  const double z = c.integral();
  for (double& v : c.values) v /= z;
  return c;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return out;
}

double ks_distance(std::vector<double> samples, const DensityCurve& curve) {
  if (samples.size() < 1000) throw InvalidArgument("ks_distance needs at least 1000 samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  // Walk the grid once alongside the sorted samples.
  const double total = curve.integral();
  std::size_t k = 1;
  double acc = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    double f;
    if (curve.grid.empty() || x <= curve.grid.front()) {
      f = 0.0;
    } else {
      while (k < curve.grid.size() && x >= curve.grid[k]) {
        acc += 0.5 * (curve.values[k] + curve.values[k - 1]) * (curve.grid[k] - curve.grid[k - 1]);
        ++k;
      }
      if (k >= curve.grid.size()) {
        f = 1.0;
      } else {
        const double h = curve.grid[k] - curve.grid[k - 1];
        const double s = x - curve.grid[k - 1];
        const double slope = (curve.values[k] - curve.values[k - 1]) / h;
        f = (acc + curve.values[k - 1] * s + 0.5 * slope * s * s) / total;
      }
    }
    worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return std::min(worst, 1.0);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  return m % 2 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

namespace {

std::string indexed(const std::string& name, Index i) { return name + "[" + std::to_string(i) + "]"; }

NamedValues relu_balance(const models::ModelSpec& spec, const Vector& theta) {
  const Matrix w = spec.block_matrix(theta, "W");
  const Vector v = spec.block(theta, "v");
  NamedValues out;
  std::vector<double> ratios;
  Index excluded = 0;
  for (Index j = 0; j < v.size(); ++j) {
    if (std::abs(v(j)) < 1e-8) {
      ++excluded;
      continue;
    }
    const double rho = w.row(j).norm() / std::abs(v(j));
    out[indexed("rho", j)] = rho;
    ratios.push_back(rho);
  }
  out["excluded_neurons"] = static_cast<double>(excluded);
  out["median_balance_ratio"] = median(ratios);
  return out;
}

NamedValues attention_balance(const models::ModelSpec& spec, const Vector& theta) {
  const Vector qn = spec.block_matrix(theta, "WQ").colwise().norm();
  const Vector kn = spec.block_matrix(theta, "WK").colwise().norm();
  NamedValues out;
  for (Index i = 0; i < qn.size(); ++i) out[indexed("qk_gap", i)] = std::abs(qn(i) - kn(i));
  const double gap = (qn - kn).cwiseAbs().maxCoeff();
  out["qk_max_gap"] = gap;
  out["qk_gap_ratio"] = gap / qn.mean();
  const Vector vn = spec.block_matrix(theta, "WV").colwise().norm();
  const Vector on = spec.block_matrix(theta, "WO_T").colwise().norm();
  out["vo_max_gap"] = (vn - on).cwiseAbs().maxCoeff();
  return out;
}

NamedValues circulant_balance(const models::ModelSpec& spec, const Vector& theta) {
  const Vector v = spec.block(theta, "v");
  const Index n = v.size();
  NamedValues out;
  double worst = 0.0;
  for (int layer = 1; spec.blocks.count("w" + std::to_string(layer)); ++layer) {
    const Vector w = spec.block(theta, "w" + std::to_string(layer));
    const std::string prefix = spec.blocks.count("w2") ? "gap_w" + std::to_string(layer) : "gap";
    for (Index k = 0; k <= n / 2; ++k) {
      const auto [wr, wi] = models::dft_coefficient(w, k);
      const auto [vr, vi] = models::dft_coefficient(v, k);
      const double gap = std::abs(std::hypot(wr, wi) - std::hypot(vr, vi));
      out[indexed(prefix, k)] = gap;
      worst = std::max(worst, gap);
    }
  }
  out["max_gap"] = worst;
  return out;
}

}  // namespace

NamedValues balance_metrics(const models::ModelSpec& spec, const Vector& theta) {
  if (theta.size() != spec.param_dim) throw InvalidArgument("balance_metrics: theta does not match the model layout");
  switch (spec.kind) {
    case models::Kind::relu2:
      return relu_balance(spec, theta);
    case models::Kind::attention_ts:
      return attention_balance(spec, theta);
    case models::Kind::circulant2:
    case models::Kind::circulant_deep:
      return circulant_balance(spec, theta);
    default:
      throw InvalidArgument("balance_metrics: no balance law for kind " + models::to_string(spec.kind));
  }
}

NamedValues deep_fc_balance(const std::vector<Matrix>& layers) {
  NamedValues out;
  double worst = 0.0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    if (layers[l].rows() != layers[l + 1].cols()) throw InvalidArgument("deep_fc_balance: layer shapes do not chain");
    for (Index i = 0; i < layers[l].rows(); ++i) {
      const double in = layers[l].row(i).norm();
      const double outgoing = layers[l + 1].col(i).norm();
      const std::string key = "layer" + std::to_string(l + 1) + "[" + std::to_string(i) + "]";
      out["in_norm_" + key] = in;
      out["out_norm_" + key] = outgoing;
      worst = std::max(worst, std::abs(in - outgoing));
    }
  }
  out["max_gap"] = worst;
  return out;
}

ModeEnergies gauge_energy_modes(const Matrix& u, const Matrix& v) {
  if (u.cols() != v.cols()) throw InvalidArgument("gauge_energy_modes: U and V must share their column count");
  const Vector a = linalg::sym_eig(u.transpose() * u).values.reverse();
  const Vector b = linalg::sym_eig(v.transpose() * v).values.reverse();
  ModeEnergies out;
  out.energies.resize(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    const double sum = std::max(a(i), 0.0) + std::max(b(i), 0.0);
    if (sum <= 0.0) {
      out.singular.push_back(i);
      out.energies(i) = std::nan("");
    } else {
      out.energies(i) = std::log(sum);
    }
  }
  return out;
}

NamedValues NormSummary::to_named() const {
  NamedValues out{{"l1", l1}, {"l2", l2}, {"nuclear_norm", nuclear}};
  for (Index i = 0; i < spectrum.size(); ++i) out[indexed("sigma", i)] = spectrum(i);
  if (!group_norms.empty()) {
    out["group_norm_sum"] = group_norm_sum;
    out["active_groups"] = static_cast<double>(active_groups);
    out["active_fraction"] = static_cast<double>(active_groups) / static_cast<double>(group_norms.size());
  }
  return out;
}

NormSummary norms_and_spectra(const Matrix& w, const std::optional<std::vector<std::vector<Index>>>& groups,
                              double group_threshold) {
  NormSummary s;
  s.l1 = w.cwiseAbs().sum();
  s.l2 = w.norm();
  s.spectrum = linalg::svd(w).sigma;
  s.nuclear = s.spectrum.sum();
  if (groups) {
    const Eigen::Map<const Vector> flat(w.data(), w.size());
    for (const auto& group : *groups) {
      double sq = 0.0;
      for (const Index i : group) {
        if (i < 0 || i >= flat.size()) throw InvalidArgument("norms_and_spectra: group index out of range");
        sq += flat(i) * flat(i);
      }
      const double norm = std::sqrt(sq);
      s.group_norms.push_back(norm);
      s.group_norm_sum += norm;
      s.active_groups += norm > group_threshold;
    }
  }
  return s;
}

Index effective_rank(const Vector& spectrum_desc, double rel_cutoff) {
  if (spectrum_desc.size() == 0 || spectrum_desc(0) <= 0.0) return 0;
  return (spectrum_desc.array() >= rel_cutoff * spectrum_desc(0)).count();
}

double total_variation(const Vector& theta) {
  if (theta.size() < 2) throw InvalidArgument("total_variation needs at least two entries");
  return (theta.tail(theta.size() - 1) - theta.head(theta.size() - 1)).cwiseAbs().sum();
}

}  // namespace orbitlab::stats
