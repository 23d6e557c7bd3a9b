#include "orbitlab/model.hpp"

#include "orbitlab/errors.hpp"

#include <numeric>

namespace orbitlab {

double Model::observe(const std::string& name, const Vector& theta) const {
  if (name == "loss") return loss(theta);
  throw InvalidArgument("unknown observable '" + name + "'");
}

const std::vector<Index>& Model::all_samples() const {
  if (static_cast<Index>(all_.size()) != num_samples()) {
    all_.resize(static_cast<std::size_t>(num_samples()));
    std::iota(all_.begin(), all_.end(), Index{0});
  }
  return all_;
}

double Model::loss(const Vector& theta) const { return evaluate(theta, all_samples(), nullptr); }

Vector Model::gradient(const Vector& theta) const {
  Vector g(param_dim());
  evaluate(theta, all_samples(), &g);
  return g;
}

}  // namespace orbitlab
