// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_PREDICTOR_HPP
#define BEAMCAST_PREDICTOR_HPP

#include <span>
#include <string>

#include "beamcast/dataset.hpp"
#include "beamcast/params.hpp"
#include "beamcast/rng.hpp"
#include "beamcast/tensor.hpp"

namespace beamcast {

// Common surface of the MLM-BP model and the three baselines: a batch of
// samples in, a [batch, M] probability matrix out.
class BeamPredictor {
 public:
  virtual ~BeamPredictor() = default;

  // `rng` drives dropout masks; required when training, ignored otherwise.
  virtual Tensor forward(std::span<const Sample* const> batch, bool training, Rng* rng) = 0;

  virtual ParamSet& params() = 0;
  virtual const ParamSet& params() const = 0;
  virtual std::string kind() const = 0;
  virtual int n_beams() const = 0;

  // Called by the trainer at each epoch boundary (0-based). Models with a
  // warm-start schedule freeze their base weights here.
  virtual void begin_epoch(int epoch) { (void)epoch; }
};

}  // namespace beamcast

#endif  // BEAMCAST_PREDICTOR_HPP
