#pragma once

#include "rapnet/tensor.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace rapnet {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<MatrixXd> m;
  std::vector<MatrixXd> v;

  AdamState() = default;
  AdamState(double learning_rate, std::span<Parameter* const> params);
};

/// theta -= lr * mhat / (sqrt(vhat) + eps), reading each parameter's grad.
/// Throws NumericalError naming the first parameter with a non-finite
/// gradient; no parameter is modified in that case.
void adam_step(AdamState& state, std::span<Parameter* const> params);

}  // namespace rapnet
