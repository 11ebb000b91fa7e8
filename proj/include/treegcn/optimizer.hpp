#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treegcn/tensor.hpp"

namespace treegcn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  bool empty() const noexcept { return first_moment.empty(); }
};

// Bias-corrected Adam update, in place:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// An empty state is initialised with zero moments.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, OptimizerState& state,
               const AdamConfig& config);

}  // namespace treegcn
