#pragma once

#include <span>
#include <vector>

#include "difflab/model.hpp"

namespace difflab {

// Adam with fixed β1 = 0.9, β2 = 0.999, ε = 1e-8 and bias correction.
struct AdamState {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long long step = 0;
};

// One update in place. grads[i] matches params[i] in shape. Moments are
// allocated on the first call.
void adam_step(std::span<NamedTensor> params, std::span<const Tensor> grads, double lr, AdamState& state);

}  // namespace difflab
