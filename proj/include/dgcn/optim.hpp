#pragma once

#include <vector>

#include "dgcn/tensor.hpp"

namespace dgcn {

struct AdamConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long decay_interval = 300000;
  double decay_factor = 0.5;
};

// Moment buffers are allocated on first step and stay parallel to the
// parameter list; callers must pass the same tensors in the same order.
struct AdamState {
  AdamConfig cfg;
  long step = 0;
  std::vector<std::vector<double>> m, v;

  explicit AdamState(AdamConfig c = {}) : cfg(c) {}
};

double effective_lr(const AdamConfig& cfg, long step);

// One update from the gradients currently held in each tensor's grad buffer.
void adam_step(const std::vector<Tensor*>& params, AdamState& state);

}  // namespace dgcn
