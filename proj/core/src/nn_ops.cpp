// SPDX-License-Identifier: Apache-2.0
//
// softmax, rms_norm, swiglu, rope, embedding, dropout, conv2d, batch_norm.

#include <algorithm>
#include <cmath>

#include "beamcast/errors.hpp"
#include "beamcast/ops.hpp"
#include "op_common.hpp"

namespace beamcast {

using detail::record;
using detail::tracing;

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() < 1) throw DimensionError("softmax_rows: rank must be >= 1");
  const std::int64_t n = x.dim(-1);
  const std::int64_t rows = x.numel() / n;
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* row = px + r * n;
    double* dst = po + r * n;
    double mx = row[0];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      dst[i] = std::exp(row[i] - mx);
      s += dst[i];
    }
    const double inv = 1.0 / s;
    for (std::int64_t i = 0; i < n; ++i) dst[i] *= inv;
  }
  if (tracing(x)) {
    record(out, [x = x, out = out, rows, n]() mutable {
      const double* u = out.grad().data();
      const double* y = out.data();
      double* gx = x.grad().data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* ur = u + r * n;
        const double* yr = y + r * n;
        double* gr = gx + r * n;
        double dot = 0.0;
        for (std::int64_t i = 0; i < n; ++i) dot += ur[i] * yr[i];
        for (std::int64_t i = 0; i < n; ++i) gr[i] += yr[i] * (ur[i] - dot);
      }
    });
  }
  return out;
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps) {
  if (gain.rank() != 1 || gain.dim(0) != x.dim(-1)) {
    throw DimensionError("rms_norm: gain must be rank 1 with length " + std::to_string(x.dim(-1)));
  }
  const std::int64_t n = x.dim(-1);
  const std::int64_t rows = x.numel() / n;
  Tensor out(x.shape());
  std::vector<double> inv_rms(static_cast<std::size_t>(rows));
  const double* px = x.data();
  const double* pg = gain.data();
  double* po = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* row = px + r * n;
    double ss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) ss += row[i] * row[i];
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(n) + eps);
    inv_rms[static_cast<std::size_t>(r)] = inv;
    double* dst = po + r * n;
    for (std::int64_t i = 0; i < n; ++i) dst[i] = pg[i] * row[i] * inv;
  }
  if (tracing(x) || tracing(gain)) {
    record(out, [x = x, gain = gain, out = out, inv_rms = std::move(inv_rms), rows, n]() mutable {
      const double* u = out.grad().data();
      const double* px2 = x.data();
      const double* pg2 = gain.data();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* ur = u + r * n;
        const double* row = px2 + r * n;
        const double inv = inv_rms[static_cast<std::size_t>(r)];
        if (x.requires_grad()) {
          double* gx = x.grad().data() + r * n;
          double dot = 0.0;
          for (std::int64_t i = 0; i < n; ++i) dot += ur[i] * pg2[i] * row[i];
          const double c = dot * inv * inv * inv * inv_n;
          for (std::int64_t i = 0; i < n; ++i) gx[i] += ur[i] * pg2[i] * inv - row[i] * c;
        }
        if (gain.requires_grad()) {
          double* gg = gain.grad().data();
          for (std::int64_t i = 0; i < n; ++i) gg[i] += ur[i] * row[i] * inv;
        }
      }
    });
  }
  return out;
}

Tensor swiglu(const Tensor& x, const Tensor& w_gate, const Tensor& w_up, const Tensor& w_down) {
  if (w_gate.rank() != 2 || w_up.rank() != 2 || w_down.rank() != 2) {
    throw DimensionError("swiglu: weights must be rank 2");
  }
  if (w_gate.dim(0) != x.dim(-1) || w_up.dim(0) != x.dim(-1) ||
      w_gate.dim(1) != w_down.dim(0) || w_up.dim(1) != w_gate.dim(1) ||
      w_down.dim(1) != x.dim(-1)) {
    throw DimensionError("swiglu: weight shapes disagree with input");
  }
  return matmul(mul(swish(matmul(x, w_gate)), matmul(x, w_up)), w_down);
}

Tensor rope_apply(const Tensor& x, double base) {
  if (x.rank() < 2) throw DimensionError("rope_apply: rank must be >= 2");
  const std::int64_t t = x.dim(-2);
  std::vector<std::int64_t> pos(static_cast<std::size_t>(t));
  for (std::int64_t i = 0; i < t; ++i) pos[static_cast<std::size_t>(i)] = i;
  return rope_apply(x, base, pos);
}

Tensor rope_apply(const Tensor& x, double base, std::span<const std::int64_t> positions) {
  if (x.rank() < 2) throw DimensionError("rope_apply: rank must be >= 2");
  const std::int64_t d = x.dim(-1);
  const std::int64_t t = x.dim(-2);
  if (d % 2 != 0) throw ConfigError("rope_apply: head dimension must be even");
  if (static_cast<std::int64_t>(positions.size()) != t) {
    throw DimensionError("rope_apply: positions length must equal sequence length");
  }
  const std::int64_t half = d / 2;
  // Rotation table, shared by every leading batch index.
  std::vector<double> cs(static_cast<std::size_t>(t * half));
  std::vector<double> sn(static_cast<std::size_t>(t * half));
  for (std::int64_t p = 0; p < t; ++p) {
    const auto fp = static_cast<double>(positions[static_cast<std::size_t>(p)]);
    for (std::int64_t i = 0; i < half; ++i) {
      const double angle = fp * std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      cs[static_cast<std::size_t>(p * half + i)] = std::cos(angle);
      sn[static_cast<std::size_t>(p * half + i)] = std::sin(angle);
    }
  }
  const std::int64_t batch = x.numel() / (t * d);
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t s = 0; s < batch; ++s) {
    for (std::int64_t p = 0; p < t; ++p) {
      const double* row = px + (s * t + p) * d;
      double* dst = po + (s * t + p) * d;
      const double* c = cs.data() + p * half;
      const double* sv = sn.data() + p * half;
      for (std::int64_t i = 0; i < half; ++i) {
        const double x0 = row[2 * i];
        const double x1 = row[2 * i + 1];
        dst[2 * i] = x0 * c[i] - x1 * sv[i];
        dst[2 * i + 1] = x0 * sv[i] + x1 * c[i];
      }
    }
  }
  if (tracing(x)) {
    record(out, [x = x, out = out, cs = std::move(cs), sn = std::move(sn), batch, t, d, half]() mutable {
      const double* u = out.grad().data();
      double* gx = x.grad().data();
      for (std::int64_t s = 0; s < batch; ++s) {
        for (std::int64_t p = 0; p < t; ++p) {
          const double* ur = u + (s * t + p) * d;
          double* gr = gx + (s * t + p) * d;
          const double* c = cs.data() + p * half;
          const double* sv = sn.data() + p * half;
          for (std::int64_t i = 0; i < half; ++i) {
            const double u0 = ur[2 * i];
            const double u1 = ur[2 * i + 1];
            // Inverse rotation.
            gr[2 * i] += u0 * c[i] + u1 * sv[i];
            gr[2 * i + 1] += -u0 * sv[i] + u1 * c[i];
          }
        }
      }
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be rank 2");
  const std::int64_t v = table.dim(0);
  const std::int64_t d = table.dim(1);
  const auto n = static_cast<std::int64_t>(ids.size());
  if (n == 0) throw DimensionError("embedding: empty id list");
  for (int id : ids) {
    if (id < 0 || id >= v) throw ContractError("embedding: id " + std::to_string(id) + " out of range");
  }
  Tensor out(Shape{n, d});
  const double* pt = table.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(pt + static_cast<std::int64_t>(ids[static_cast<std::size_t>(i)]) * d, d, po + i * d);
  }
  if (tracing(table)) {
    std::vector<int> ids_copy(ids.begin(), ids.end());
    record(out, [table = table, out = out, ids_copy = std::move(ids_copy), d]() mutable {
      const double* u = out.grad().data();
      double* gt = table.grad().data();
      for (std::size_t i = 0; i < ids_copy.size(); ++i) {
        double* dst = gt + static_cast<std::int64_t>(ids_copy[i]) * d;
        const double* src = u + static_cast<std::int64_t>(i) * d;
        for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
  std::vector<double> mask(static_cast<std::size_t>(x.numel()));
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) po[i] = px[i] * mask[static_cast<std::size_t>(i)];
  if (tracing(x)) {
    record(out, [x = x, out = out, mask = std::move(mask)]() mutable {
      const auto u = out.grad();
      auto gx = x.grad();
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += u[i] * mask[static_cast<std::size_t>(i)];
    });
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  if (x.rank() != 4 || w.rank() != 4) {
    throw DimensionError("conv2d: x must be [B,C,H,W] and w [Co,Ci,kh,kw]");
  }
  if (stride < 1 || pad < 0) throw ConfigError("conv2d: invalid stride or pad");
  const std::int64_t b = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::int64_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != ci) throw DimensionError("conv2d: channel mismatch");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != co)) {
    throw DimensionError("conv2d: bias must be [Cout]");
  }
  const std::int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::int64_t wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho < 1 || wo < 1) throw DimensionError("conv2d: kernel larger than padded input");
  Tensor out(Shape{b, co, ho, wo});
  const double* px = x.data();
  const double* pw = w.data();
  double* po = out.data();
  for (std::int64_t ib = 0; ib < b; ++ib) {
    for (std::int64_t oc = 0; oc < co; ++oc) {
      const double bias_v = bias.defined() ? bias.data()[oc] : 0.0;
      for (std::int64_t oy = 0; oy < ho; ++oy) {
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          double acc = bias_v;
          for (std::int64_t ic = 0; ic < ci; ++ic) {
            for (std::int64_t ky = 0; ky < kh; ++ky) {
              const std::int64_t iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= h) continue;
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wd) continue;
                acc += px[((ib * ci + ic) * h + iy) * wd + ix] *
                       pw[((oc * ci + ic) * kh + ky) * kw + kx];
              }
            }
          }
          po[((ib * co + oc) * ho + oy) * wo + ox] = acc;
        }
      }
    }
  }
  if (tracing(x) || tracing(w) || (bias.defined() && tracing(bias))) {
    record(out, [x = x, w = w, bias = bias, out = out, b, ci, h, wd, co, kh, kw, ho, wo, stride,
                 pad]() mutable {
      const double* u = out.grad().data();
      const double* px2 = x.data();
      const double* pw2 = w.data();
      double* gx = x.requires_grad() ? x.grad().data() : nullptr;
      double* gw = w.requires_grad() ? w.grad().data() : nullptr;
      double* gb = bias.defined() && bias.requires_grad() ? bias.grad().data() : nullptr;
      for (std::int64_t ib = 0; ib < b; ++ib) {
        for (std::int64_t oc = 0; oc < co; ++oc) {
          for (std::int64_t oy = 0; oy < ho; ++oy) {
            for (std::int64_t ox = 0; ox < wo; ++ox) {
              const double g = u[((ib * co + oc) * ho + oy) * wo + ox];
              if (gb) gb[oc] += g;
              for (std::int64_t ic = 0; ic < ci; ++ic) {
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                  const std::int64_t iy = oy * stride - pad + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (std::int64_t kx = 0; kx < kw; ++kx) {
                    const std::int64_t ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= wd) continue;
                    const std::int64_t xi = ((ib * ci + ic) * h + iy) * wd + ix;
                    const std::int64_t wi = ((oc * ci + ic) * kh + ky) * kw + kx;
                    if (gw) gw[wi] += g * px2[xi];
                    if (gx) gx[xi] += g * pw2[wi];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var,
                  double momentum, double eps, bool training) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw DimensionError("batch_norm: x must be [B,C] or [B,C,H,W]");
  }
  const std::int64_t b = x.dim(0), c = x.dim(1);
  const std::int64_t spatial = x.numel() / (b * c);
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c ||
      running_var.numel() != c) {
    throw DimensionError("batch_norm: per-channel parameters must have length C");
  }
  const std::int64_t n = b * spatial;
  std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
  std::vector<double> inv_std(static_cast<std::size_t>(c), 0.0);
  const double* px = x.data();
  if (training) {
    std::vector<double> var(static_cast<std::size_t>(c), 0.0);
    for (std::int64_t ib = 0; ib < b; ++ib) {
      for (std::int64_t ic = 0; ic < c; ++ic) {
        const double* base = px + (ib * c + ic) * spatial;
        for (std::int64_t s = 0; s < spatial; ++s) mean[static_cast<std::size_t>(ic)] += base[s];
      }
    }
    for (std::int64_t ic = 0; ic < c; ++ic) mean[static_cast<std::size_t>(ic)] /= static_cast<double>(n);
    for (std::int64_t ib = 0; ib < b; ++ib) {
      for (std::int64_t ic = 0; ic < c; ++ic) {
        const double* base = px + (ib * c + ic) * spatial;
        const double m = mean[static_cast<std::size_t>(ic)];
        for (std::int64_t s = 0; s < spatial; ++s) {
          const double d = base[s] - m;
          var[static_cast<std::size_t>(ic)] += d * d;
        }
      }
    }
    for (std::int64_t ic = 0; ic < c; ++ic) {
      var[static_cast<std::size_t>(ic)] /= static_cast<double>(n);  // biased
      inv_std[static_cast<std::size_t>(ic)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(ic)] + eps);
      // Running statistics stay outside the autodiff graph.
      running_mean.data()[ic] =
          (1.0 - momentum) * running_mean.data()[ic] + momentum * mean[static_cast<std::size_t>(ic)];
      running_var.data()[ic] =
          (1.0 - momentum) * running_var.data()[ic] + momentum * var[static_cast<std::size_t>(ic)];
    }
  } else {
    for (std::int64_t ic = 0; ic < c; ++ic) {
      mean[static_cast<std::size_t>(ic)] = running_mean.data()[ic];
      inv_std[static_cast<std::size_t>(ic)] = 1.0 / std::sqrt(running_var.data()[ic] + eps);
    }
  }
  Tensor out(x.shape());
  double* po = out.data();
  const double* pg = gamma.data();
  const double* pb = beta.data();
  for (std::int64_t ib = 0; ib < b; ++ib) {
    for (std::int64_t ic = 0; ic < c; ++ic) {
      const double* base = px + (ib * c + ic) * spatial;
      double* dst = po + (ib * c + ic) * spatial;
      const double m = mean[static_cast<std::size_t>(ic)];
      const double inv = inv_std[static_cast<std::size_t>(ic)];
      const double g = pg[ic], bt = pb[ic];
      for (std::int64_t s = 0; s < spatial; ++s) dst[s] = g * (base[s] - m) * inv + bt;
    }
  }
  if (tracing(x) || tracing(gamma) || tracing(beta)) {
    record(out, [x = x, gamma = gamma, beta = beta, out = out, mean = std::move(mean),
                 inv_std = std::move(inv_std), b, c, spatial, n, training]() mutable {
      const double* u = out.grad().data();
      const double* px2 = x.data();
      const double* pg2 = gamma.data();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::int64_t ic = 0; ic < c; ++ic) {
        const double m = mean[static_cast<std::size_t>(ic)];
        const double inv = inv_std[static_cast<std::size_t>(ic)];
        double sum_u = 0.0, sum_ux = 0.0;
        for (std::int64_t ib = 0; ib < b; ++ib) {
          const double* ur = u + (ib * c + ic) * spatial;
          const double* base = px2 + (ib * c + ic) * spatial;
          for (std::int64_t s = 0; s < spatial; ++s) {
            sum_u += ur[s];
            sum_ux += ur[s] * (base[s] - m) * inv;
          }
        }
        if (gamma.requires_grad()) gamma.grad()[ic] += sum_ux;
        if (beta.requires_grad()) beta.grad()[ic] += sum_u;
        if (x.requires_grad()) {
          double* gx = x.grad().data();
          const double g_inv = pg2[ic] * inv;
          for (std::int64_t ib = 0; ib < b; ++ib) {
            const double* ur = u + (ib * c + ic) * spatial;
            const double* base = px2 + (ib * c + ic) * spatial;
            double* gr = gx + (ib * c + ic) * spatial;
            for (std::int64_t s = 0; s < spatial; ++s) {
              if (training) {
                const double xhat = (base[s] - m) * inv;
                gr[s] += g_inv * (ur[s] - sum_u * inv_n - xhat * sum_ux * inv_n);
              } else {
                gr[s] += g_inv * ur[s];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace beamcast
