// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_ADAM_HPP
#define BEAMCAST_ADAM_HPP

#include <cstdint>
#include <vector>

#include "beamcast/tensor.hpp"

namespace beamcast {

// Adam with bias correction folded into the step size, as in the original
// formulation: a_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t),
// p <- p - a_t * m / (sqrt(v) + eps).
struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  // Moment buffers, one per parameter, sized on the first step.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Applies one update to every parameter in `params` (all must carry populated
// gradients), increments the step counter and zeroes the gradients. The list
// must keep the same order and shapes across calls.
void adam_step(std::vector<Tensor>& params, AdamState& state);

// Single-parameter update against externally held moment buffers; `step` is
// the 1-based step this update belongs to. Zeroes the gradient afterwards.
void adam_update_param(Tensor& p, std::vector<double>& m, std::vector<double>& v,
                       const AdamState& hyper, std::int64_t step);

}  // namespace beamcast

#endif  // BEAMCAST_ADAM_HPP
