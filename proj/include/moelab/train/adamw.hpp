#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moelab/autodiff/tensor.hpp"

namespace moelab::train {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t step = 0;
};

// A parameter the optimizer updates. Missing gradients count as zero.
struct OptimTarget {
  ad::Tensor* value = nullptr;
  bool decay = true;
  std::string name;
};

// One AdamW update with decoupled weight decay:
//   theta <- theta (1 - lr wd) - lr mhat / (sqrt(vhat) + eps)
// Throws NumericError naming the parameter when a gradient is not finite.
void adamw_step(std::span<const OptimTarget> params, AdamState& state, double lr, double weight_decay,
                const AdamParams& hyper = {});

}  // namespace moelab::train
