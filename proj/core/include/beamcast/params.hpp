// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_PARAMS_HPP
#define BEAMCAST_PARAMS_HPP

#include <string>
#include <vector>

#include "beamcast/tensor.hpp"

namespace beamcast {

struct NamedParam {
  std::string name;
  Tensor tensor;
  // Member of the steady-state trainable set (after any warm start).
  bool steady_trainable = true;
  // Running statistic (batch-norm buffers): never trained, saved and loaded.
  bool is_stat = false;
};

// Ordered, named parameter registry. Registration order is the canonical
// order for initialization, optimizer state and checkpoints. The live
// trainable flag is the tensor's requires_grad; `steady_trainable` records
// the post-warm-start mask.
class ParamSet {
 public:
  // Registers and returns the tensor; requires_grad starts true for weights.
  Tensor add(const std::string& name, Tensor t, bool steady_trainable);
  Tensor add_stat(const std::string& name, Tensor t);

  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::vector<NamedParam>& entries() { return entries_; }
  const std::vector<NamedParam>& entries() const { return entries_; }

  // Everything currently marked requires_grad, in registration order.
  std::vector<Tensor> trainable() const;
  std::size_t trainable_count() const;
  std::size_t frozen_count() const;
  std::int64_t total_elements() const;

  // requires_grad := steady_trainable (stats stay untracked).
  void apply_steady_mask();
  // requires_grad := true for all weights (warm-start phase).
  void set_all_trainable();
  void zero_all_grads();

 private:
  std::vector<NamedParam> entries_;
};

}  // namespace beamcast

#endif  // BEAMCAST_PARAMS_HPP
