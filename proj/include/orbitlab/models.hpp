#pragma once

#include "orbitlab/model.hpp"
#include "orbitlab/symmetry.hpp"
#include "orbitlab/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace orbitlab::models {

enum class Kind {
  radial,
  fourier_sparse,
  tv_recon,
  multichannel,
  rank2_completion,
  attention_ts,
  relu2,
  circulant2,
  circulant_deep,
  cp_rank1,
  tt3,
  block_group,
  l1_hadamard,
  pca,
};

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);
const std::vector<Kind>& all_kinds();

/// Synthetic data for one model kind. `params` holds the fully resolved
/// parameters (defaults filled in), `arrays` the generated data.
struct DatasetSpec {
  Kind kind = Kind::radial;
  std::uint64_t seed = 0;
  nlohmann::json params;
  std::map<std::string, Matrix> arrays;

  const Matrix& array(const std::string& name) const;

  /// Writes one CSV per array plus dataset.json with kind, seed, params and shapes.
  void export_to(const std::filesystem::path& dir) const;
  static DatasetSpec import_from(const std::filesystem::path& dir);
};

struct ModelSpec {
  Kind kind = Kind::radial;
  std::string variant;
  Index param_dim = 0;
  Vector init;
  std::shared_ptr<const Model> model;
  symmetry::GeneratorSet generators;
  std::optional<symmetry::GaugeMap> gauge;
  /// Named parameter blocks (column-major matrices) of the theta layout.
  std::map<std::string, symmetry::MatrixBlock> blocks;

  Vector block(const Vector& theta, const std::string& name) const;
  Matrix block_matrix(const Vector& theta, const std::string& name) const;
};

/// Defaults for `kind`, the keys accepted by make_dataset / build_model.
nlohmann::json default_params(Kind kind);

/// Overlays `params` on the defaults; unknown keys and bad values are errors.
nlohmann::json resolve_params(Kind kind, const nlohmann::json& params);

DatasetSpec make_dataset(Kind kind, const nlohmann::json& params, std::uint64_t seed);

/// Model, generators and seeded initial state for a dataset.
ModelSpec model_from_dataset(const DatasetSpec& data);

std::pair<ModelSpec, DatasetSpec> build_model(Kind kind, const nlohmann::json& params, std::uint64_t seed);

NamedValues eval_invariants(const ModelSpec& spec, const Vector& theta);

/// Zero-mean Gaussian fan_in x fan_out matrix (inputs multiply from the left,
/// x W) with variance variance_scale * 2 / fan_in.
Matrix kaiming_like_init(Index fan_in, Index fan_out, double variance_scale, std::uint64_t seed);

// --- building blocks shared by several kinds --------------------------------

/// Circulant matrix with first column c: (C c)_{n,k} = c_{(n-k) mod N}, so C(w) x = w * x.
Matrix circulant(const Vector& c);

/// Orthogonal projector onto the real Fourier subspace of frequency k (cos and
/// sin of 2 pi k n / N); rank 1 for k = 0 and k = N/2, rank 2 otherwise.
Matrix frequency_projector(Index n, Index k);

/// Complex DFT coefficient sum_n x_n exp(-2 pi i k n / N), returned as (re, im).
std::pair<double, double> dft_coefficient(const Vector& x, Index k);

/// Lower-triangular cumulative-sum operator mapping g (d-1) to omega_i = sum_{k<i} g_k.
Matrix cumulative_sum_operator(Index d);

}  // namespace orbitlab::models
