// SPDX-License-Identifier: Apache-2.0

#include "beamcast/adam.hpp"

#include <cmath>

#include "beamcast/errors.hpp"

namespace beamcast {

void adam_update_param(Tensor& p, std::vector<double>& m, std::vector<double>& v,
                       const AdamState& hyper, std::int64_t step) {
  if (!p.requires_grad() || !p.has_grad()) {
    throw ContractError("adam: parameter has no gradient");
  }
  if (m.size() != static_cast<std::size_t>(p.numel()) ||
      v.size() != static_cast<std::size_t>(p.numel())) {
    throw ContractError("adam: moment buffers do not match the parameter shape");
  }
  const auto t = static_cast<double>(step);
  const double alpha = hyper.learning_rate * std::sqrt(1.0 - std::pow(hyper.beta2, t)) /
                       (1.0 - std::pow(hyper.beta1, t));
  auto g = p.grad();
  double* pd = p.data();
  for (std::int64_t j = 0; j < p.numel(); ++j) {
    m[static_cast<std::size_t>(j)] =
        hyper.beta1 * m[static_cast<std::size_t>(j)] + (1.0 - hyper.beta1) * g[j];
    v[static_cast<std::size_t>(j)] =
        hyper.beta2 * v[static_cast<std::size_t>(j)] + (1.0 - hyper.beta2) * g[j] * g[j];
    pd[j] -= alpha * m[static_cast<std::size_t>(j)] /
             (std::sqrt(v[static_cast<std::size_t>(j)]) + hyper.epsilon);
  }
  p.zero_grad();
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
      state.v[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: parameter list size changed");
  }
  state.step += 1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update_param(params[i], state.m[i], state.v[i], state, state.step);
  }
}

}  // namespace beamcast
