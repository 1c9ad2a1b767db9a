#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hypoflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bad shapes, ranges or unknown names. CLI exit code 1.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A structural hypothesis (spanning, nondegenerate noise) fails. CLI exit code 2.
struct HypothesisViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Too many singular/exploded paths, non-finite results. CLI exit code 3.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Monte Carlo run settings shared by the probes.
struct McConfig {
  double T = 1.0;
  int n_steps = 1000;
  int n_paths = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
};

}  // namespace hypoflow
