// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_BASELINES_HPP
#define BEAMCAST_BASELINES_HPP

#include <array>
#include <string>

#include "beamcast/predictor.hpp"

namespace beamcast {

struct BaselineConfig {
  int n_beams = 64;
  int n_views = kNumCameras;
  int view_width = 32;
  int view_height = 32;
  int dnn_width = 128;
  int dnn_blocks = 5;
  std::array<int, 3> cnn_channels{16, 32, 64};
  double dropout_p = 0.1;
  int fusion_hidden = 128;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  void validate() const;
};

// Position-only predictor: input embedding, then residual linear blocks with
// normalization, then a softmax head.
class PositionDnn : public BeamPredictor {
 public:
  PositionDnn(BaselineConfig cfg, DatasetStats stats, std::uint64_t seed);
  Tensor forward(std::span<const Sample* const> batch, bool training, Rng* rng) override;
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  std::string kind() const override { return "dnn-pos"; }
  int n_beams() const override { return cfg_.n_beams; }
  const BaselineConfig& config() const { return cfg_; }
  const DatasetStats& stats() const { return stats_; }

 private:
  BaselineConfig cfg_;
  DatasetStats stats_;
  ParamSet params_;
};

// Vision-only predictor: three stride-2 conv blocks (batch norm, relu,
// dropout), global average pooling, linear head.
class VisionCnn : public BeamPredictor {
 public:
  VisionCnn(BaselineConfig cfg, DatasetStats stats, std::uint64_t seed);
  Tensor forward(std::span<const Sample* const> batch, bool training, Rng* rng) override;
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  std::string kind() const override { return "cnn-vis"; }
  int n_beams() const override { return cfg_.n_beams; }
  const BaselineConfig& config() const { return cfg_; }
  const DatasetStats& stats() const { return stats_; }

 private:
  BaselineConfig cfg_;
  DatasetStats stats_;
  ParamSet params_;
};

// Two-stage fusion: conv trunk feature vector concatenated with the
// normalized position, then a two-hidden-layer MLP.
class FusionModel : public BeamPredictor {
 public:
  FusionModel(BaselineConfig cfg, DatasetStats stats, std::uint64_t seed);
  Tensor forward(std::span<const Sample* const> batch, bool training, Rng* rng) override;
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  std::string kind() const override { return "fusion"; }
  int n_beams() const override { return cfg_.n_beams; }
  const BaselineConfig& config() const { return cfg_; }
  const DatasetStats& stats() const { return stats_; }

  // Ablation path: zeroes the image feature vector, leaving a position-only
  // predictor.
  void set_ablate_image(bool on) { ablate_image_ = on; }

 private:
  BaselineConfig cfg_;
  DatasetStats stats_;
  ParamSet params_;
  bool ablate_image_ = false;
};

// [B, 3] tensor of (position - mean) / std rows.
Tensor normalized_positions(std::span<const Sample* const> batch, const DatasetStats& stats);
// [B, n_views, H, W] normalized depth stack.
Tensor normalized_views(std::span<const Sample* const> batch, const DatasetStats& stats,
                        int n_views, int height, int width);

}  // namespace beamcast

#endif  // BEAMCAST_BASELINES_HPP
