#pragma once

#include "orbitlab/types.hpp"

#include <string>
#include <vector>

namespace orbitlab {

/// A parameterized loss over a finite dataset. The loss is the mean of
/// per-sample losses over the batch; models without data expose one sample.
class Model {
 public:
  virtual ~Model() = default;

  virtual Index param_dim() const = 0;
  virtual Index num_samples() const = 0;

  /// Mean loss over `batch`; writes the gradient into `grad` when non-null.
  virtual double evaluate(const Vector& theta, Batch batch, Vector* grad) const = 0;

  /// Orbit invariants of the predictor (e.g. w = u*v, Z = U V^T, r = |theta|).
  virtual NamedValues invariants(const Vector& theta) const = 0;

  /// Names accepted by `observe`. Always contains "loss".
  virtual std::vector<std::string> observable_names() const { return {"loss"}; }
  virtual double observe(const std::string& name, const Vector& theta) const;

  double loss(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;
  const std::vector<Index>& all_samples() const;

 private:
  mutable std::vector<Index> all_;
};

}  // namespace orbitlab
