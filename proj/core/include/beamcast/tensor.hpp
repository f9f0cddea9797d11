// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_TENSOR_HPP
#define BEAMCAST_TENSOR_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "beamcast/rng.hpp"

namespace beamcast {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of 64-bit floats. A Tensor is a handle: copies share
// one storage block (values, gradient, tracking state), so gradient
// allocation and freezing propagate to every copy. Values are treated as
// immutable once an operation has recorded them on a tape; leaf parameters
// are mutated in place only between tapes (optimizer steps).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  // Elements ~ N(0, stddev^2), drawn in row-major order.
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return st_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const;
  std::int64_t numel() const {
    return st_ ? static_cast<std::int64_t>(st_->data.size()) : 0;
  }

  std::span<double> values() { return {st_->data.data(), st_->data.size()}; }
  std::span<const double> values() const { return {st_->data.data(), st_->data.size()}; }
  double* data() { return st_->data.data(); }
  const double* data() const { return st_->data.data(); }

  // Scalar accessor; throws ContractError unless numel() == 1.
  double value() const;

  bool requires_grad() const { return st_ && st_->requires_grad; }
  // Toggling gradient tracking allocates or drops the gradient buffer.
  void set_requires_grad(bool on);

  bool has_grad() const { return st_ && !st_->grad.empty(); }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  // Tape node handle; -1 for leaves and untracked tensors.
  std::int64_t node() const { return st_->node; }
  void set_node(std::int64_t n) { st_->node = n; }

  // True when the same storage is shared (handle identity, not value equality).
  bool same_storage(const Tensor& other) const { return st_ == other.st_; }

  // Handle onto the same storage under a different shape. The alias extends
  // to tracking state; autodiff reshapes copy instead (see ops.cpp).
  Tensor reshaped_view(Shape shape) const;

  bool all_finite() const;
  // Throws NumericalError if any value is NaN or Inf.
  void check_finite(const std::string& what) const;

 private:
  struct Storage {
    std::vector<double> data;
    std::vector<double> grad;  // sized like data iff requires_grad
    bool requires_grad = false;
    std::int64_t node = -1;
  };

  std::shared_ptr<Storage> st_;
  Shape shape_;
};

}  // namespace beamcast

#endif  // BEAMCAST_TENSOR_HPP
