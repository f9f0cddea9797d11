// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_TAPE_HPP
#define BEAMCAST_TAPE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "beamcast/tensor.hpp"

namespace beamcast {

// Linear reverse-mode tape. Constructing a Tape makes it the active tape for
// the current thread (they nest like a stack); operations record a node when
// a tape is active and at least one input requires a gradient. backward()
// replays the nodes in reverse insertion order exactly once, accumulating
// gradients additively across fan-out, then resets the tape.
//
// One tape per thread at a time; tapes must not be shared across threads.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Innermost active tape for this thread, or nullptr.
  static Tape* active();

  std::int64_t record(std::function<void()> backward_fn);
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. The loss must be a scalar that
  // was recorded on this tape. The tape is cleared afterwards.
  void backward(Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  std::vector<std::function<void()>> nodes_;
  Tape* outer_ = nullptr;
};

}  // namespace beamcast

#endif  // BEAMCAST_TAPE_HPP
