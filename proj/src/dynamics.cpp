#include "orbitlab/dynamics.hpp"

#include "orbitlab/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace orbitlab::dynamics {

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::langevin:
      return "langevin";
    case NoiseMode::minibatch:
      return "minibatch";
    case NoiseMode::minibatch_plus_langevin:
      return "minibatch_plus_langevin";
  }
  return "langevin";
}

NoiseMode noise_mode_from_string(const std::string& name) {
  if (name == "langevin") return NoiseMode::langevin;
  if (name == "minibatch") return NoiseMode::minibatch;
  if (name == "minibatch_plus_langevin") return NoiseMode::minibatch_plus_langevin;
  throw InvalidArgument("unknown noise mode '" + name + "'");
}

void DynamicsConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw InvalidArgument("noise_scale must be nonnegative");
  if (total_steps < 1) throw InvalidArgument("total_steps must be at least 1");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) throw InvalidArgument("burn_in_fraction must lie in [0,1)");
  if (thinning < 1) throw InvalidArgument("thinning must be at least 1");
  if (batch_size < 0) throw InvalidArgument("batch_size must be nonnegative");
  if (burn_in_steps && (*burn_in_steps < 0 || *burn_in_steps > total_steps)) {
    throw InvalidArgument("burn_in_steps must lie in [0, total_steps]");
  }
}

std::int64_t DynamicsConfig::burn_in() const {
  if (burn_in_steps) return *burn_in_steps;
  return static_cast<std::int64_t>(std::floor(burn_in_fraction * static_cast<double>(total_steps)));
}

std::int64_t DynamicsConfig::expected_records() const { return (total_steps - burn_in()) / thinning; }

double DynamicsConfig::diffusion() const { return noise_scale * std::sqrt(2.0 * eta / beta); }

namespace {

void check_finite_gradient(const Vector& grad, std::int64_t step) {
  if (!grad.allFinite()) throw SimulationError("non-finite gradient", step);
}

void add_noise(Vector& theta, double scale, Rng& rng) {
  if (scale == 0.0) return;
  for (Index i = 0; i < theta.size(); ++i) theta(i) += scale * rng.normal();
}

}  // namespace

Vector langevin_step(const Vector& theta, const Vector& grad, const DynamicsConfig& config, Rng& rng,
                     std::int64_t step) {
  if (grad.size() != theta.size()) throw InvalidArgument("langevin_step: gradient length mismatch");
  check_finite_gradient(grad, step);
  Vector out = theta - config.eta * grad;
  add_noise(out, config.diffusion(), rng);
  return out;
}

Vector sgd_step(const Vector& theta, const Model& model, Batch batch, const DynamicsConfig& config, Rng& rng,
                std::int64_t step) {
  if (batch.empty()) throw InvalidArgument("sgd_step: empty batch");
  for (Index i : batch) {
    if (i < 0 || i >= model.num_samples()) throw InvalidArgument("sgd_step: batch index out of range");
  }
  Vector grad(theta.size());
  model.evaluate(theta, batch, &grad);
  check_finite_gradient(grad, step);
  Vector out = theta - config.eta * grad;
  if (config.noise_mode != NoiseMode::minibatch) add_noise(out, config.diffusion(), rng);
  return out;
}

BatchSampler::BatchSampler(Index num_samples, Index batch_size, Rng rng)
    : batch_size_(batch_size <= 0 || batch_size > num_samples ? num_samples : batch_size),
      cursor_(0),
      order_(static_cast<std::size_t>(num_samples)),
      rng_(std::move(rng)) {
  if (num_samples < 1) throw InvalidArgument("BatchSampler: empty dataset");
  std::iota(order_.begin(), order_.end(), Index{0});
  if (batch_size_ < num_samples) reshuffle();
}

void BatchSampler::reshuffle() {
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng_.below(i)]);
  }
}

Batch BatchSampler::next() {
  const Index n = static_cast<Index>(order_.size());
  if (batch_size_ == n) return Batch(order_.data(), order_.size());
  if (cursor_ + batch_size_ > n) {
    reshuffle();
    cursor_ = 0;
  }
  Batch out(order_.data() + cursor_, static_cast<std::size_t>(batch_size_));
  cursor_ += batch_size_;
  return out;
}

namespace {

Trajectory simulate_stream(const Model& model, const Vector& init, const DynamicsConfig& config,
                           const std::vector<std::string>& observables, Rng noise_rng, Rng batch_rng) {
  config.validate();
  if (init.size() != model.param_dim()) throw InvalidArgument("simulate: initial state has wrong dimension");
  const auto known = model.observable_names();
  for (const auto& name : observables) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw InvalidArgument("simulate: observable '" + name + "' is not registered by the model");
    }
  }

  Trajectory traj;
  traj.observable_names = observables;
  for (const auto& name : observables) traj.observables[name].reserve(static_cast<std::size_t>(config.expected_records()));
  if (config.record_snapshots) traj.snapshots.reserve(static_cast<std::size_t>(config.expected_records()));

  const bool full_batch = config.noise_mode == NoiseMode::langevin;
  BatchSampler sampler(model.num_samples(), full_batch ? 0 : config.batch_size, std::move(batch_rng));
  const double diffusion = config.noise_mode == NoiseMode::minibatch ? 0.0 : config.diffusion();
  const std::int64_t burn = config.burn_in();

  Vector theta = init;
  Vector grad(theta.size());
  for (std::int64_t step = 1; step <= config.total_steps; ++step) {
    const Batch batch = sampler.next();
    const double batch_loss = model.evaluate(theta, batch, &grad);
    if (!std::isfinite(batch_loss) || std::abs(batch_loss) > 1e12) {
      throw SimulationError("loss divergence (|L| = " + std::to_string(batch_loss) + ")", step);
    }
    check_finite_gradient(grad, step);
    theta.noalias() -= config.eta * grad;
    add_noise(theta, diffusion, noise_rng);

    if (step > burn && (step - burn) % config.thinning == 0) {
      traj.step_indices.push_back(step);
      if (config.record_snapshots) traj.snapshots.push_back(theta);
      for (const auto& name : observables) {
        const double value = model.observe(name, theta);
        if (name == "loss" && !std::isfinite(value)) throw SimulationError("non-finite loss", step);
        traj.observables[name].push_back(value);
      }
    }
  }
  traj.final_theta = theta;
  return traj;
}

}  // namespace

Trajectory simulate(const Model& model, const Vector& init, const DynamicsConfig& config,
                    const std::vector<std::string>& observables) {
  const Rng root(config.seed);
  return simulate_stream(model, init, config, observables, root.split(0), root.split(1));
}

std::vector<Trajectory> simulate_chains(const Model& model, const std::vector<Vector>& inits,
                                        const DynamicsConfig& config,
                                        const std::vector<std::string>& observables, unsigned workers) {
  std::vector<Trajectory> out(inits.size());
  if (inits.empty()) return out;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(inits.size()));

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(inits.size());
  auto worker = [&]() {
    for (std::size_t c = next++; c < inits.size(); c = next++) {
      try {
        const Rng chain_root = Rng(config.seed).split(100 + c);
        out[c] = simulate_stream(model, inits[c], config, observables, chain_root.split(0), chain_root.split(1));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void Trajectory::write_csv(const std::filesystem::path& path, bool include_parameters) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "step";
  for (const auto& name : observable_names) out << ',' << name;
  const Index n = include_parameters && !snapshots.empty() ? snapshots.front().size() : 0;
  for (Index i = 0; i < n; ++i) out << ",p" << i;
  out << '\n';
  for (std::size_t k = 0; k < step_indices.size(); ++k) {
    out << step_indices[k];
    for (const auto& name : observable_names) out << ',' << observables.at(name)[k];
    for (Index i = 0; i < n; ++i) out << ',' << snapshots[k](i);
    out << '\n';
  }
}

Trajectory Trajectory::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("empty trajectory file " + path.string());
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header.front() != "step") throw Error("trajectory file lacks a step column");
  Trajectory traj;
  std::size_t n_params = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].size() > 1 && header[c][0] == 'p' &&
        std::all_of(header[c].begin() + 1, header[c].end(), [](char ch) { return std::isdigit(ch); })) {
      ++n_params;
    } else {
      traj.observable_names.push_back(header[c]);
      traj.observables[header[c]];
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    traj.step_indices.push_back(std::stoll(cell));
    for (const auto& name : traj.observable_names) {
      std::getline(ss, cell, ',');
      traj.observables[name].push_back(std::stod(cell));
    }
    if (n_params > 0) {
      Vector p(static_cast<Index>(n_params));
      for (std::size_t i = 0; i < n_params; ++i) {
        std::getline(ss, cell, ',');
        p(static_cast<Index>(i)) = std::stod(cell);
      }
      traj.snapshots.push_back(std::move(p));
    }
  }
  if (!traj.snapshots.empty()) traj.final_theta = traj.snapshots.back();
  return traj;
}

}  // namespace orbitlab::dynamics
