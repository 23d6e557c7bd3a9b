#pragma once

#include "orbitlab/errors.hpp"
#include "orbitlab/models.hpp"
#include "orbitlab/rng.hpp"

#include <string>
#include <vector>

namespace orbitlab::models::detail {

using nlohmann::json;

/// Independent stream for one purpose (data, noise, init, ...) of a seed.
inline Rng stream(std::uint64_t seed, std::uint64_t purpose) { return Rng(seed).split(purpose); }

enum Purpose : std::uint64_t { kData = 1, kTeacher = 2, kNoise = 3, kTest = 4, kInit = 5, kMask = 6 };

double get_real(const json& p, const char* key);
Index get_count(const json& p, const char* key, Index min_value = 1);
std::string get_string(const json& p, const char* key);

std::vector<Index> index_range(Index begin, Index end);

std::string indexed(const std::string& name, Index i);
std::string indexed(const std::string& name, Index i, Index j);
void put_vector(NamedValues& out, const std::string& name, const Vector& v);
void put_matrix(NamedValues& out, const std::string& name, const Matrix& m);

/// Column-major view of a block of theta as a matrix copy.
Matrix as_matrix(const Vector& theta, const symmetry::MatrixBlock& b);
void write_block(Vector& theta, const symmetry::MatrixBlock& b, const Matrix& m);

/// Concatenates the generators of several sets under one label.
symmetry::GeneratorSet concat(std::string label, const std::vector<symmetry::GeneratorSet>& sets);

/// Near-balanced small Gaussian initialization.
Vector small_gaussian(Index n, double scale, std::uint64_t seed);

// Per-family dataset generators and model constructors.
DatasetSpec radial_dataset(const json& p, std::uint64_t seed);
ModelSpec radial_model(const DatasetSpec& d);
DatasetSpec pca_dataset(const json& p, std::uint64_t seed);
ModelSpec pca_model(const DatasetSpec& d);
DatasetSpec fourier_dataset(const json& p, std::uint64_t seed);
ModelSpec fourier_model(const DatasetSpec& d);
DatasetSpec tv_dataset(const json& p, std::uint64_t seed);
ModelSpec tv_model(const DatasetSpec& d);
DatasetSpec l1_dataset(const json& p, std::uint64_t seed);
ModelSpec l1_model(const DatasetSpec& d);
DatasetSpec block_dataset(const json& p, std::uint64_t seed);
ModelSpec block_model(const DatasetSpec& d);
DatasetSpec multichannel_dataset(const json& p, std::uint64_t seed);
ModelSpec multichannel_model(const DatasetSpec& d);
DatasetSpec rank2_dataset(const json& p, std::uint64_t seed);
ModelSpec rank2_model(const DatasetSpec& d);
DatasetSpec attention_dataset(const json& p, std::uint64_t seed);
ModelSpec attention_model(const DatasetSpec& d);
DatasetSpec relu2_dataset(const json& p, std::uint64_t seed);
ModelSpec relu2_model(const DatasetSpec& d);
DatasetSpec circulant_dataset(Kind kind, const json& p, std::uint64_t seed);
ModelSpec circulant_model(const DatasetSpec& d);
DatasetSpec cp_dataset(const json& p, std::uint64_t seed);
ModelSpec cp_model(const DatasetSpec& d);
DatasetSpec tt_dataset(const json& p, std::uint64_t seed);
ModelSpec tt_model(const DatasetSpec& d);

}  // namespace orbitlab::models::detail
