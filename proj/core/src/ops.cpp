// SPDX-License-Identifier: Apache-2.0
//
// Elementwise, reduction, shape and matrix-product operations.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "beamcast/errors.hpp"
#include "beamcast/ops.hpp"
#include "op_common.hpp"

namespace beamcast {

using detail::record;
using detail::tracing;

namespace {

// Validates the add/mul broadcast contract and returns the number of copies
// of `b` tiled along the leading dimensions of `a` (1 = same shape).
std::int64_t broadcast_outer(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size()) {
    throw DimensionError(std::string(op) + ": second operand rank exceeds first, " +
                         shape_str(sa) + " vs " + shape_str(sb));
  }
  const std::size_t off = sa.size() - sb.size();
  for (std::size_t i = 0; i < sb.size(); ++i) {
    if (sa[off + i] != sb[i]) {
      throw DimensionError(std::string(op) + ": shape " + shape_str(sb) +
                           " is not a suffix of " + shape_str(sa));
    }
  }
  return a.numel() / b.numel();
}

}  // namespace

namespace detail {

void add_matmul_nn(double* c, const double* a, const double* b,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void add_matmul_nt(double* c, const double* a, const double* b,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

void add_matmul_tn(double* c, const double* a, const double* b,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace detail

Tensor add(const Tensor& a, const Tensor& b) {
  const std::int64_t outer = broadcast_outer(a, b, "add");
  const std::int64_t nb = b.numel();
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < nb; ++i) po[o * nb + i] = pa[o * nb + i] + pb[i];
  }
  if (tracing(a) || tracing(b)) {
    record(out, [a = a, b = b, out = out, outer, nb]() mutable {
      const auto u = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::int64_t i = 0; i < a.numel(); ++i) ga[i] += u[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t i = 0; i < nb; ++i) gb[i] += u[o * nb + i];
        }
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::int64_t outer = broadcast_outer(a, b, "mul");
  const std::int64_t nb = b.numel();
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < nb; ++i) po[o * nb + i] = pa[o * nb + i] * pb[i];
  }
  if (tracing(a) || tracing(b)) {
    record(out, [a = a, b = b, out = out, outer, nb]() mutable {
      const auto u = out.grad();
      const double* pa2 = a.data();
      const double* pb2 = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t i = 0; i < nb; ++i) ga[o * nb + i] += u[o * nb + i] * pb2[i];
        }
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t i = 0; i < nb; ++i) gb[i] += u[o * nb + i] * pa2[o * nb + i];
        }
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) po[i] = c * px[i];
  if (tracing(x)) {
    record(out, [x = x, out = out, c]() mutable {
      const auto u = out.grad();
      auto gx = x.grad();
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += c * u[i];
    });
  }
  return out;
}

namespace {

inline double sigmoid_stable(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) po[i] = sigmoid_stable(px[i]);
  if (tracing(x)) {
    record(out, [x = x, out = out]() mutable {
      const auto u = out.grad();
      const double* y = out.data();
      auto gx = x.grad();
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += u[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

Tensor swish(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) po[i] = px[i] * sigmoid_stable(px[i]);
  if (tracing(x)) {
    record(out, [x = x, out = out]() mutable {
      const auto u = out.grad();
      const double* px2 = x.data();
      auto gx = x.grad();
      for (std::int64_t i = 0; i < x.numel(); ++i) {
        const double s = sigmoid_stable(px2[i]);
        gx[i] += u[i] * s * (1.0 + px2[i] * (1.0 - s));
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  if (tracing(x)) {
    record(out, [x = x, out = out]() mutable {
      const auto u = out.grad();
      const double* px2 = x.data();
      auto gx = x.grad();
      for (std::int64_t i = 0; i < x.numel(); ++i) {
        if (px2[i] > 0.0) gx[i] += u[i];
      }
    });
  }
  return out;
}

Tensor log_clamped(const Tensor& x, double floor) {
  if (floor <= 0.0) throw ContractError("log_clamped: floor must be positive");
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) po[i] = std::log(std::max(px[i], floor));
  if (tracing(x)) {
    record(out, [x = x, out = out, floor]() mutable {
      const auto u = out.grad();
      const double* px2 = x.data();
      auto gx = x.grad();
      for (std::int64_t i = 0; i < x.numel(); ++i) {
        if (px2[i] > floor) gx[i] += u[i] / px2[i];
      }
    });
  }
  return out;
}

namespace {

struct MatmulDims {
  std::int64_t batch;  // leading dims of a
  std::int64_t m, k, n;
  bool b_broadcast;  // b is rank-2, shared across batches
};

MatmulDims matmul_dims(const Tensor& a, const Tensor& b, std::int64_t b_rows,
                       std::int64_t b_cols_axis, const char* op) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError(std::string(op) + ": operands must have rank >= 2");
  }
  MatmulDims d{};
  d.m = a.dim(-2);
  d.k = a.dim(-1);
  d.batch = a.numel() / (d.m * d.k);
  if (b.rank() == 2) {
    d.b_broadcast = true;
  } else if (b.rank() == a.rank()) {
    for (int i = 0; i < a.rank() - 2; ++i) {
      if (a.dim(i) != b.dim(i)) {
        throw DimensionError(std::string(op) + ": batch dims disagree, " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
      }
    }
    d.b_broadcast = false;
  } else {
    throw DimensionError(std::string(op) + ": second operand rank must be 2 or match first");
  }
  if (b.dim(static_cast<int>(b_rows)) != d.k) {
    throw DimensionError(std::string(op) + ": inner dimensions disagree, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  d.n = b.dim(static_cast<int>(b_cols_axis));
  return d;
}

Shape matmul_out_shape(const Tensor& a, std::int64_t n) {
  Shape s = a.shape();
  s.back() = n;
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  // b is [k, n] (rank 2) or [.., k, n].
  const MatmulDims d = matmul_dims(a, b, -2, -1, "matmul");
  Tensor out(matmul_out_shape(a, d.n));
  const std::int64_t a_step = d.m * d.k;
  const std::int64_t b_step = d.b_broadcast ? 0 : d.k * d.n;
  const std::int64_t o_step = d.m * d.n;
  for (std::int64_t s = 0; s < d.batch; ++s) {
    detail::add_matmul_nn(out.data() + s * o_step, a.data() + s * a_step,
                          b.data() + s * b_step, d.m, d.k, d.n);
  }
  if (tracing(a) || tracing(b)) {
    record(out, [a = a, b = b, out = out, d, a_step, b_step, o_step]() mutable {
      const double* u = out.grad().data();
      if (a.requires_grad()) {
        double* ga = a.grad().data();
        for (std::int64_t s = 0; s < d.batch; ++s) {
          // dA = dC * B^T
          detail::add_matmul_nt(ga + s * a_step, u + s * o_step, b.data() + s * b_step,
                                d.m, d.n, d.k);
        }
      }
      if (b.requires_grad()) {
        double* gb = b.grad().data();
        for (std::int64_t s = 0; s < d.batch; ++s) {
          // dB = A^T * dC (accumulates across batches when b is broadcast)
          detail::add_matmul_tn(gb + s * b_step, a.data() + s * a_step, u + s * o_step,
                                d.k, d.m, d.n);
        }
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  // b is [n, k] (rank 2) or [.., n, k].
  const MatmulDims d = matmul_dims(a, b, -1, -2, "matmul_nt");
  Tensor out(matmul_out_shape(a, d.n));
  const std::int64_t a_step = d.m * d.k;
  const std::int64_t b_step = d.b_broadcast ? 0 : d.n * d.k;
  const std::int64_t o_step = d.m * d.n;
  for (std::int64_t s = 0; s < d.batch; ++s) {
    detail::add_matmul_nt(out.data() + s * o_step, a.data() + s * a_step,
                          b.data() + s * b_step, d.m, d.k, d.n);
  }
  if (tracing(a) || tracing(b)) {
    record(out, [a = a, b = b, out = out, d, a_step, b_step, o_step]() mutable {
      const double* u = out.grad().data();
      if (a.requires_grad()) {
        double* ga = a.grad().data();
        for (std::int64_t s = 0; s < d.batch; ++s) {
          // dA = dC * B
          detail::add_matmul_nn(ga + s * a_step, u + s * o_step, b.data() + s * b_step,
                                d.m, d.n, d.k);
        }
      }
      if (b.requires_grad()) {
        double* gb = b.grad().data();
        for (std::int64_t s = 0; s < d.batch; ++s) {
          // dB = dC^T * A
          detail::add_matmul_tn(gb + s * b_step, u + s * o_step, a.data() + s * a_step,
                                d.n, d.m, d.k);
        }
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2) throw DimensionError("linear: weight must be rank 2 [out, in]");
  return matmul_nt(x, w);
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  const double* px = x.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) acc += px[i];
  Tensor out = Tensor::scalar(acc);
  if (tracing(x)) {
    record(out, [x = x, out = out]() mutable {
      const double u = out.grad()[0];
      auto gx = x.grad();
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += u;
    });
  }
  return out;
}

Tensor mean_axis(const Tensor& x, int axis) {
  if (axis < 0) axis += x.rank();
  if (axis < 0 || axis >= x.rank()) throw DimensionError("mean_axis: axis out of range");
  const Shape& s = x.shape();
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<std::size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= s[static_cast<std::size_t>(i)];
  const std::int64_t n = s[static_cast<std::size_t>(axis)];
  Shape out_shape;
  for (int i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(s[static_cast<std::size_t>(i)]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  const double* px = x.data();
  double* po = out.data();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t j = 0; j < n; ++j) {
      const double* row = px + (o * n + j) * inner;
      double* dst = po + o * inner;
      for (std::int64_t i = 0; i < inner; ++i) dst[i] += row[i] * inv_n;
    }
  }
  if (tracing(x)) {
    record(out, [x = x, out = out, outer, n, inner, inv_n]() mutable {
      const double* u = out.grad().data();
      double* gx = x.grad().data();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t j = 0; j < n; ++j) {
          double* row = gx + (o * n + j) * inner;
          const double* src = u + o * inner;
          for (std::int64_t i = 0; i < inner; ++i) row[i] += src[i] * inv_n;
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (!tracing(x)) return x.reshaped_view(std::move(shape));
  // A storage-sharing view would alias the gradient buffer; copy instead.
  Tensor out(std::move(shape), std::vector<double>(x.data(), x.data() + x.numel()));
  record(out, [x = x, out = out]() mutable {
    const auto u = out.grad();
    auto gx = x.grad();
    for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += u[i];
  });
  return out;
}

namespace {

// dst[out_idx] (+)= src[in_idx] with out axis i reading input axis perm[i].
template <bool Accumulate>
void permute_raw(double* dst, const double* src, const Shape& in_shape,
                 const std::vector<int>& perm) {
  const int r = static_cast<int>(in_shape.size());
  std::vector<std::int64_t> in_strides(static_cast<std::size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i) {
    in_strides[static_cast<std::size_t>(i)] =
        in_strides[static_cast<std::size_t>(i + 1)] * in_shape[static_cast<std::size_t>(i + 1)];
  }
  Shape out_shape(static_cast<std::size_t>(r));
  std::vector<std::int64_t> step(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    out_shape[static_cast<std::size_t>(i)] = in_shape[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    step[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  std::vector<std::int64_t> counter(static_cast<std::size_t>(r), 0);
  const std::int64_t total = shape_numel(in_shape);
  std::int64_t src_off = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    if constexpr (Accumulate) {
      dst[src_off] += src[o];  // used in reverse direction
    } else {
      dst[o] = src[src_off];
    }
    for (int i = r - 1; i >= 0; --i) {
      auto ui = static_cast<std::size_t>(i);
      src_off += step[ui];
      if (++counter[ui] < out_shape[ui]) break;
      src_off -= step[ui] * out_shape[ui];
      counter[ui] = 0;
    }
  }
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != x.rank()) {
    throw DimensionError("permute: permutation length must equal rank");
  }
  std::vector<bool> seen(perm.size(), false);
  for (int p : perm) {
    if (p < 0 || p >= x.rank() || seen[static_cast<std::size_t>(p)]) {
      throw DimensionError("permute: invalid permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out_shape[i] = x.dim(perm[i]);
  }
  Tensor out(out_shape);
  permute_raw<false>(out.data(), x.data(), x.shape(), perm);
  if (tracing(x)) {
    record(out, [x = x, out = out, perm]() mutable {
      // Walk output order again, accumulating into the permuted source slots.
      permute_raw<true>(x.grad().data(), out.grad().data(), x.shape(), perm);
    });
  }
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  if (a.rank() != b.rank()) throw DimensionError("concat: rank mismatch");
  if (axis < 0) axis += a.rank();
  if (axis < 0 || axis >= a.rank()) throw DimensionError("concat: axis out of range");
  for (int i = 0; i < a.rank(); ++i) {
    if (i != axis && a.dim(i) != b.dim(i)) {
      throw DimensionError("concat: shapes disagree outside axis, " + shape_str(a.shape()) +
                           " vs " + shape_str(b.shape()));
    }
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] += b.dim(axis);
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::int64_t a_block = a.dim(axis) * inner;
  const std::int64_t b_block = b.dim(axis) * inner;
  Tensor out(out_shape);
  double* po = out.data();
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(pa + o * a_block, a_block, po + o * (a_block + b_block));
    std::copy_n(pb + o * b_block, b_block, po + o * (a_block + b_block) + a_block);
  }
  if (tracing(a) || tracing(b)) {
    record(out, [a = a, b = b, out = out, outer, a_block, b_block]() mutable {
      const double* u = out.grad().data();
      if (a.requires_grad()) {
        double* ga = a.grad().data();
        for (std::int64_t o = 0; o < outer; ++o) {
          const double* src = u + o * (a_block + b_block);
          for (std::int64_t i = 0; i < a_block; ++i) ga[o * a_block + i] += src[i];
        }
      }
      if (b.requires_grad()) {
        double* gb = b.grad().data();
        for (std::int64_t o = 0; o < outer; ++o) {
          const double* src = u + o * (a_block + b_block) + a_block;
          for (std::int64_t i = 0; i < b_block; ++i) gb[o * b_block + i] += src[i];
        }
      }
    });
  }
  return out;
}

}  // namespace beamcast
