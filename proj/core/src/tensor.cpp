// SPDX-License-Identifier: Apache-2.0

#include "beamcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "beamcast/errors.hpp"

namespace beamcast {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static void validate_shape(const Shape& shape) {
  for (std::int64_t d : shape) {
    if (d <= 0) throw DimensionError("tensor dimension must be positive, got " + shape_str(shape));
  }
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : shape_(std::move(shape)) {
  validate_shape(shape_);
  st_ = std::make_shared<Storage>();
  st_->data.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
  set_requires_grad(requires_grad);
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) : shape_(std::move(shape)) {
  validate_shape(shape_);
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape_));
  }
  st_ = std::make_shared<Storage>();
  st_->data = std::move(data);
  set_requires_grad(requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  return Tensor(std::move(shape), v, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t(std::move(shape), 0.0, requires_grad);
  for (double& v : t.st_->data) v = stddev * rng.gaussian();
  return t;
}

std::int64_t Tensor::dim(int i) const {
  if (i < 0) i += rank();
  if (i < 0 || i >= rank()) throw DimensionError("dim index out of range");
  return shape_[static_cast<std::size_t>(i)];
}

double Tensor::value() const {
  if (!defined() || numel() != 1) {
    throw ContractError("value() requires a scalar tensor, got " + shape_str(shape_));
  }
  return st_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  st_->requires_grad = on;
  if (on) {
    if (st_->grad.size() != st_->data.size()) st_->grad.assign(st_->data.size(), 0.0);
  } else {
    st_->grad.clear();
    st_->grad.shrink_to_fit();
  }
}

std::span<double> Tensor::grad() {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return {st_->grad.data(), st_->grad.size()};
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return {st_->grad.data(), st_->grad.size()};
}

void Tensor::zero_grad() {
  if (st_ && !st_->grad.empty()) std::fill(st_->grad.begin(), st_->grad.end(), 0.0);
}

Tensor Tensor::reshaped_view(Shape shape) const {
  validate_shape(shape);
  if (shape_numel(shape) != numel()) {
    throw DimensionError("reshape from " + shape_str(shape_) + " to " + shape_str(shape) +
                         " changes element count");
  }
  Tensor t;
  t.st_ = st_;
  t.shape_ = std::move(shape);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : st_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite()) throw NumericalError("non-finite value detected in " + what);
}

}  // namespace beamcast
