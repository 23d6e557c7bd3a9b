#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace orbitlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a parameter, key or dimension is invalid.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not provided by this model or generator set.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// The orbit Gram matrix is singular (the group action is not free here).
class OrbitDegenerate : public Error {
 public:
  OrbitDegenerate(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Gauge map does not cut the orbits transversally (singular Faddeev-Popov matrix).
class NonTransversalGauge : public Error {
 public:
  using Error::Error;
};

/// A simulation step produced a non-finite gradient or a diverging loss.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, std::int64_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace orbitlab
