// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_METRICS_HPP
#define BEAMCAST_METRICS_HPP

#include <span>
#include <vector>

#include "beamcast/tensor.hpp"

namespace beamcast {

inline constexpr double kProbFloor = 1e-12;

// L_B = -(1/M) sum_i P_i log(max(P_hat_i, 1e-12)); the 1/M factor runs over
// the codebook size, as written. Batched inputs [B, M] average the per-sample
// losses. `truth` must be one-hot rows; `pred` rows must sum to 1 within 1e-6
// (contract error otherwise). Differentiable in `pred`.
Tensor cross_entropy(const Tensor& truth, const Tensor& pred);

// Indices of the k largest entries, ties broken toward the lower index.
std::vector<int> topk_indices(std::span<const double> probs, int k);

// Fraction of samples whose true index (Top-1 of the one-hot row) appears in
// the Top-K of the prediction row.
double topk_accuracy(const std::vector<std::vector<double>>& truths,
                     const std::vector<std::vector<double>>& preds, int k);

}  // namespace beamcast

#endif  // BEAMCAST_METRICS_HPP
