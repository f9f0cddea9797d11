// SPDX-License-Identifier: Apache-2.0

#include "beamcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "beamcast/errors.hpp"
#include "beamcast/ops.hpp"

namespace beamcast {

Tensor cross_entropy(const Tensor& truth, const Tensor& pred) {
  if (truth.shape() != pred.shape()) {
    throw DimensionError("cross_entropy: shapes disagree, " + shape_str(truth.shape()) + " vs " +
                         shape_str(pred.shape()));
  }
  if (pred.rank() < 1 || pred.rank() > 2) {
    throw DimensionError("cross_entropy: expected [M] or [B, M]");
  }
  const std::int64_t m = pred.dim(-1);
  const std::int64_t rows = pred.numel() / m;
  for (std::int64_t r = 0; r < rows; ++r) {
    double psum = 0.0, tsum = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      psum += pred.data()[r * m + i];
      const double tv = truth.data()[r * m + i];
      if (tv != 0.0 && tv != 1.0) throw ContractError("cross_entropy: truth must be one-hot");
      tsum += tv;
    }
    if (std::abs(psum - 1.0) > 1e-6) {
      throw ContractError("cross_entropy: prediction row does not sum to 1");
    }
    if (tsum != 1.0) throw ContractError("cross_entropy: truth row must have exactly one 1");
  }
  // mean over rows of -(1/M) sum_i P_i log(P_hat_i)
  const double factor = -1.0 / (static_cast<double>(m) * static_cast<double>(rows));
  return scale(sum(mul(log_clamped(pred, kProbFloor), truth)), factor);
}

std::vector<int> topk_indices(std::span<const double> probs, int k) {
  const auto m = static_cast<int>(probs.size());
  if (k < 1 || k > m) throw ContractError("topk: K must lie in [1, M]");
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]) {
      return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
    }
    return a < b;  // ties to the lowest index
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

double topk_accuracy(const std::vector<std::vector<double>>& truths,
                     const std::vector<std::vector<double>>& preds, int k) {
  if (truths.size() != preds.size() || truths.empty()) {
    throw ContractError("topk_accuracy: need equal, non-empty sample lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int true_idx = topk_indices(truths[i], 1)[0];
    const std::vector<int> top = topk_indices(preds[i], k);
    if (std::find(top.begin(), top.end(), true_idx) != top.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

}  // namespace beamcast
