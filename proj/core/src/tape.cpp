// SPDX-License-Identifier: Apache-2.0

#include "beamcast/tape.hpp"

#include "beamcast/errors.hpp"

namespace beamcast {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : outer_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = outer_; }

Tape* Tape::active() { return g_active_tape; }

std::int64_t Tape::record(std::function<void()> backward_fn) {
  nodes_.push_back(std::move(backward_fn));
  return static_cast<std::int64_t>(nodes_.size()) - 1;
}

void Tape::backward(Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad() || loss.node() < 0) {
    throw ContractError("loss is not recorded on the tape");
  }
  if (static_cast<std::size_t>(loss.node()) >= nodes_.size()) {
    throw ContractError("loss node does not belong to this tape");
  }
  loss.grad()[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    nodes_[i]();
  }
  clear();
}

}  // namespace beamcast
