#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "convmamba/tensor.hpp"

namespace convmamba {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

// One bias-corrected Adam update of every parameter. The state is sized on
// the first call; later calls must pass the same parameter shapes.
void AdamStep(std::span<Tensor* const> params, std::span<const Tensor> grads,
              AdamState& state, const AdamConfig& config);

}  // namespace convmamba
