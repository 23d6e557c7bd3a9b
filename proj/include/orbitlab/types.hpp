#pragma once

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>

namespace orbitlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Indices of the samples that make up one mini-batch.
using Batch = std::span<const Index>;

/// Named scalar results (metrics, invariants, targets).
using NamedValues = std::map<std::string, double>;

}  // namespace orbitlab
