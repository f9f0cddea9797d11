// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_SRC_OP_COMMON_HPP
#define BEAMCAST_SRC_OP_COMMON_HPP

#include <cstdint>

#include "beamcast/tape.hpp"
#include "beamcast/tensor.hpp"

namespace beamcast::detail {

inline bool tracing(const Tensor& t) {
  return Tape::active() != nullptr && t.requires_grad();
}

// Marks `out` as gradient-tracked and records the backward closure.
template <typename Fn>
void record(Tensor& out, Fn&& backward_fn) {
  out.set_requires_grad(true);
  out.set_node(Tape::active()->record(std::forward<Fn>(backward_fn)));
}

// c[m,n] += a[m,k] * b[k,n]
void add_matmul_nn(double* c, const double* a, const double* b,
                   std::int64_t m, std::int64_t k, std::int64_t n);
// c[m,n] += a[m,k] * b[n,k]^T
void add_matmul_nt(double* c, const double* a, const double* b,
                   std::int64_t m, std::int64_t k, std::int64_t n);
// c[m,n] += a[k,m]^T * b[k,n]
void add_matmul_tn(double* c, const double* a, const double* b,
                   std::int64_t m, std::int64_t k, std::int64_t n);

}  // namespace beamcast::detail

#endif  // BEAMCAST_SRC_OP_COMMON_HPP
