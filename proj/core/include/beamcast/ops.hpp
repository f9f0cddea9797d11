// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_OPS_HPP
#define BEAMCAST_OPS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "beamcast/rng.hpp"
#include "beamcast/tape.hpp"
#include "beamcast/tensor.hpp"

namespace beamcast {

// Differentiable tensor operations. Every op records a node on the active
// tape when one of its inputs requires a gradient; with no active tape the
// result is a plain value (evaluation mode).
//
// Broadcast rule for add/mul: the second operand either matches the first
// exactly or its shape is a trailing suffix of the first (bias vectors,
// attention masks). Gradients for the broadcast operand sum over the leading
// dimensions.

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor sigmoid(const Tensor& x);
Tensor swish(const Tensor& x);
Tensor relu(const Tensor& x);
// ln(max(x, floor)); zero gradient where the clamp is active.
Tensor log_clamped(const Tensor& x, double floor);

// Matrix product on the last two axes. `b` is either rank-2 (shared across
// all leading batch dimensions of `a`) or has the same leading dimensions.
Tensor matmul(const Tensor& a, const Tensor& b);
// a [.., m, k] times b [.., n, k] transposed -> [.., m, n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// Row-vector convention: x [.., in], w [out, in] -> [.., out].
Tensor linear(const Tensor& x, const Tensor& w);

Tensor sum(const Tensor& x);                  // -> [1]
Tensor mean_axis(const Tensor& x, int axis);  // removes `axis`
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor concat(const Tensor& a, const Tensor& b, int axis);

// Softmax over the last axis, computed with max subtraction.
Tensor softmax_rows(const Tensor& x);
// y = gain * x / sqrt(mean(x^2) + eps) over the last axis; no mean removal.
Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps = 1e-6);
// (swish(x @ w_gate) * (x @ w_up)) @ w_down with w_gate, w_up [d, h], w_down [h, d].
Tensor swiglu(const Tensor& x, const Tensor& w_gate, const Tensor& w_up, const Tensor& w_down);
// Rotates coordinate pairs (x_{2i}, x_{2i+1}) of the last axis by
// pos * base^(-2i/d); `pos` is the index along the second-to-last axis, or an
// explicit per-row position list.
Tensor rope_apply(const Tensor& x, double base);
Tensor rope_apply(const Tensor& x, double base, std::span<const std::int64_t> positions);
// table [V, d], ids in [0, V) -> [ids.size(), d].
Tensor embedding(const Tensor& table, std::span<const int> ids);
// Inverted dropout with a seeded mask; callers skip this op at evaluation.
Tensor dropout(const Tensor& x, double p, Rng& rng);
// x [B, Cin, H, W], w [Cout, Cin, kh, kw], bias [Cout] (may be undefined).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
// x [B, C] or [B, C, H, W]; running stats are updated in place (training) and
// live outside the autodiff graph.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var,
                  double momentum, double eps, bool training);

}  // namespace beamcast

#endif  // BEAMCAST_OPS_HPP
