#pragma once

#include <vector>

#include "sgdd/tensor.hpp"

namespace sgdd {

// Standard bias-corrected Adam over a list of parameter tensors.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;

  static AdamState init(const std::vector<Tensor*>& params);
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// In-place update. `grads` must align with `params` in count and shape.
void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace sgdd
