#pragma once

#include "orbitlab/model.hpp"
#include "orbitlab/rng.hpp"
#include "orbitlab/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace orbitlab::dynamics {

enum class NoiseMode { langevin, minibatch, minibatch_plus_langevin };

std::string to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& name);

struct DynamicsConfig {
  double eta = 1e-3;
  double beta = 10.0;
  double noise_scale = 1.0;
  std::int64_t total_steps = 1000;
  double burn_in_fraction = 0.1;
  std::int64_t thinning = 1;
  std::uint64_t seed = 0;
  NoiseMode noise_mode = NoiseMode::langevin;
  /// Mini-batch size for the minibatch modes; 0 means the full dataset.
  Index batch_size = 0;
  /// Overrides burn_in_fraction when set.
  std::optional<std::int64_t> burn_in_steps;
  bool record_snapshots = true;

  void validate() const;
  std::int64_t burn_in() const;
  /// floor((total_steps - burn_in) / thinning).
  std::int64_t expected_records() const;
  /// Standard deviation of the injected Gaussian increment, sigma * sqrt(2 eta / beta).
  double diffusion() const;
};

struct Trajectory {
  std::vector<Vector> snapshots;
  std::vector<std::int64_t> step_indices;
  std::vector<std::string> observable_names;
  std::map<std::string, std::vector<double>> observables;
  Vector final_theta;

  /// One row per recorded step: step, observables..., then p0.. when requested.
  void write_csv(const std::filesystem::path& path, bool include_parameters) const;
  static Trajectory read_csv(const std::filesystem::path& path);
};

/// theta - eta * grad + sigma sqrt(2 eta / beta) xi. Throws SimulationError on a
/// non-finite gradient, tagged with `step`.
Vector langevin_step(const Vector& theta, const Vector& grad, const DynamicsConfig& config, Rng& rng,
                     std::int64_t step = 0);

/// theta - eta * grad l(theta; batch), plus the Langevin increment unless the
/// mode is plain minibatch.
Vector sgd_step(const Vector& theta, const Model& model, Batch batch, const DynamicsConfig& config, Rng& rng,
                std::int64_t step = 0);

/// Cycles through epoch-wise shuffled mini-batches of a dataset.
class BatchSampler {
 public:
  BatchSampler(Index num_samples, Index batch_size, Rng rng);
  Batch next();

 private:
  void reshuffle();
  Index batch_size_;
  Index cursor_;
  std::vector<Index> order_;
  Rng rng_;
};

/// Runs total_steps steps from `init`, discarding burn-in and recording every
/// `thinning`-th state. Full-batch gradients in langevin mode; mini-batches otherwise.
Trajectory simulate(const Model& model, const Vector& init, const DynamicsConfig& config,
                    const std::vector<std::string>& observables = {"loss"});

/// Independent chains; chain c uses the seed stream (config.seed, c). The result
/// does not depend on how many worker threads are used.
std::vector<Trajectory> simulate_chains(const Model& model, const std::vector<Vector>& inits,
                                        const DynamicsConfig& config,
                                        const std::vector<std::string>& observables, unsigned workers = 0);

}  // namespace orbitlab::dynamics
