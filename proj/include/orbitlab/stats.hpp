#pragma once

#include "orbitlab/models.hpp"
#include "orbitlab/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace orbitlab::stats {

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<std::int64_t> counts;
  std::vector<double> density;

  double bin_width(std::size_t k) const { return bin_edges[k + 1] - bin_edges[k]; }
  double center(std::size_t k) const { return 0.5 * (bin_edges[k] + bin_edges[k + 1]); }
  /// Two-column CSV (x, density) at bin centers.
  void write_csv(const std::filesystem::path& path) const;
};

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> values;
  std::string label;

  /// Trapezoid integral of the density on its grid.
  double integral() const;
  /// CDF of the piecewise-linear density; 0 left of the grid, 1 right of it.
  double cdf(double x) const;
  void write_csv(const std::filesystem::path& path) const;
};

inline constexpr int kDefaultBins = 80;

/// Equal-width histogram over [min, max] normalized to unit area.
Histogram empirical_density(const std::vector<double>& samples, int bins = kDefaultBins);

/// Log of the unnormalized stationary radial density:
/// (d-1) log r - beta (r-1)^2 / 2, or without the r^{d-1} factor when not corrected.
double radial_log_weight(int d, double beta, double r, bool corrected);

/// Radial density on `grid`, normalized by trapezoid quadrature.
DensityCurve radial_theory_density(int d, double beta, const std::vector<double>& grid, bool corrected);

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Sup distance between the sample ECDF and the curve's CDF.
double ks_distance(std::vector<double> samples, const DensityCurve& curve);

/// Per-kind balance diagnostics. Supports relu2, attention_ts, circulant2, circulant_deep.
NamedValues balance_metrics(const models::ModelSpec& spec, const Vector& theta);

/// Per hidden unit of a deep fully connected network with weights W_l (out x in):
/// incoming norm |row i of W_l| against outgoing norm |column i of W_{l+1}|.
NamedValues deep_fc_balance(const std::vector<Matrix>& layers);

struct ModeEnergies {
  Vector energies;                  // log(a_i + b_i), NaN where singular
  std::vector<Index> singular;      // modes with a_i + b_i == 0
};
ModeEnergies gauge_energy_modes(const Matrix& u, const Matrix& v);

struct NormSummary {
  double l1 = 0.0;
  double l2 = 0.0;
  double nuclear = 0.0;
  Vector spectrum;
  std::vector<double> group_norms;
  double group_norm_sum = 0.0;
  Index active_groups = 0;

  NamedValues to_named() const;
};
NormSummary norms_and_spectra(const Matrix& w,
                              const std::optional<std::vector<std::vector<Index>>>& groups = std::nullopt,
                              double group_threshold = 0.2);

/// Number of singular values at least `rel_cutoff` times the largest.
Index effective_rank(const Vector& spectrum_desc, double rel_cutoff = 0.05);

double total_variation(const Vector& theta);

double median(std::vector<double> values);

}  // namespace orbitlab::stats
