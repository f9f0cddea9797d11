// SPDX-License-Identifier: Apache-2.0

#include "beamcast/params.hpp"

#include "beamcast/errors.hpp"

namespace beamcast {

Tensor ParamSet::add(const std::string& name, Tensor t, bool steady_trainable) {
  if (contains(name)) throw ContractError("parameter registered twice: " + name);
  t.set_requires_grad(true);
  entries_.push_back({name, t, steady_trainable, false});
  return t;
}

Tensor ParamSet::add_stat(const std::string& name, Tensor t) {
  if (contains(name)) throw ContractError("parameter registered twice: " + name);
  t.set_requires_grad(false);
  entries_.push_back({name, t, false, true});
  return t;
}

bool ParamSet::contains(const std::string& name) const {
  for (const NamedParam& p : entries_) {
    if (p.name == name) return true;
  }
  return false;
}

Tensor& ParamSet::at(const std::string& name) {
  for (NamedParam& p : entries_) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("unknown parameter: " + name);
}

const Tensor& ParamSet::at(const std::string& name) const {
  for (const NamedParam& p : entries_) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("unknown parameter: " + name);
}

std::vector<Tensor> ParamSet::trainable() const {
  std::vector<Tensor> out;
  for (const NamedParam& p : entries_) {
    if (p.tensor.requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

std::size_t ParamSet::trainable_count() const {
  std::size_t n = 0;
  for (const NamedParam& p : entries_) {
    if (p.tensor.requires_grad()) ++n;
  }
  return n;
}

std::size_t ParamSet::frozen_count() const { return entries_.size() - trainable_count(); }

std::int64_t ParamSet::total_elements() const {
  std::int64_t n = 0;
  for (const NamedParam& p : entries_) n += p.tensor.numel();
  return n;
}

void ParamSet::apply_steady_mask() {
  for (NamedParam& p : entries_) {
    p.tensor.set_requires_grad(p.steady_trainable && !p.is_stat);
  }
}

void ParamSet::set_all_trainable() {
  for (NamedParam& p : entries_) {
    if (!p.is_stat) p.tensor.set_requires_grad(true);
  }
}

void ParamSet::zero_all_grads() {
  for (NamedParam& p : entries_) p.tensor.zero_grad();
}

}  // namespace beamcast
