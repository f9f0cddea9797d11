// SPDX-License-Identifier: Apache-2.0

#include "beamcast/baselines.hpp"

#include <cmath>

#include "beamcast/errors.hpp"
#include "beamcast/model.hpp"
#include "beamcast/ops.hpp"

namespace beamcast {

void BaselineConfig::validate() const {
  if (n_beams < 1) throw ConfigError("baseline: beam count must be positive");
  if (dnn_width < 1 || dnn_blocks < 1) throw ConfigError("baseline: bad DNN shape");
  for (int c : cnn_channels) {
    if (c < 1) throw ConfigError("baseline: bad CNN channels");
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("baseline: dropout must be in [0,1)");
  if (fusion_hidden < 1) throw ConfigError("baseline: bad fusion width");
}

Tensor normalized_positions(std::span<const Sample* const> batch, const DatasetStats& stats) {
  std::vector<double> data;
  data.reserve(batch.size() * 3);
  for (const Sample* s : batch) {
    const double p[3] = {s->pose.position.x, s->pose.position.y, s->pose.position.z};
    for (int i = 0; i < 3; ++i) {
      const double sd = std::max(stats.pos_std[static_cast<std::size_t>(i)], 1e-12);
      data.push_back((p[i] - stats.pos_mean[static_cast<std::size_t>(i)]) / sd);
    }
  }
  return Tensor(Shape{static_cast<std::int64_t>(batch.size()), 3}, std::move(data));
}

Tensor normalized_views(std::span<const Sample* const> batch, const DatasetStats& stats,
                        int n_views, int height, int width) {
  std::vector<double> data;
  data.reserve(batch.size() * static_cast<std::size_t>(n_views * height * width));
  for (const Sample* s : batch) {
    Tensor one = preprocess_images(s->views, stats);
    if (one.dim(0) != n_views || one.dim(1) != height || one.dim(2) != width) {
      throw DimensionError("baseline: sample views do not match the configured resolution");
    }
    data.insert(data.end(), one.data(), one.data() + one.numel());
  }
  return Tensor(Shape{static_cast<std::int64_t>(batch.size()), n_views, height, width},
                std::move(data));
}

namespace {

Tensor fan_in_init(Shape shape, Rng& rng) {
  std::int64_t fan = shape.back();
  if (shape.size() == 4) fan = shape[1] * shape[2] * shape[3];  // conv kernels
  const double stddev = 1.0 / std::sqrt(static_cast<double>(fan));
  return Tensor::randn(std::move(shape), rng, stddev);
}

}  // namespace

PositionDnn::PositionDnn(BaselineConfig cfg, DatasetStats stats, std::uint64_t seed)
    : cfg_(cfg), stats_(std::move(stats)) {
  cfg_.validate();
  Rng rng(splitmix64(seed ^ 0x646e6eULL));
  const int w = cfg_.dnn_width;
  params_.add("in_w", fan_in_init(Shape{w, 3}, rng), true);
  params_.add("in_b", Tensor::zeros(Shape{w}), true);
  for (int i = 0; i < cfg_.dnn_blocks; ++i) {
    const std::string p = "blk" + std::to_string(i) + ".";
    params_.add(p + "norm", Tensor::ones(Shape{w}), true);
    params_.add(p + "w", fan_in_init(Shape{w, w}, rng), true);
    params_.add(p + "b", Tensor::zeros(Shape{w}), true);
  }
  params_.add("out_w", fan_in_init(Shape{cfg_.n_beams, w}, rng), true);
  params_.add("out_b", Tensor::zeros(Shape{cfg_.n_beams}), true);
}

Tensor PositionDnn::forward(std::span<const Sample* const> batch, bool training, Rng* rng) {
  (void)training;
  (void)rng;
  if (batch.empty()) throw ContractError("forward: empty batch");
  Tensor x = add(linear(normalized_positions(batch, stats_), params_.at("in_w")),
                 params_.at("in_b"));
  for (int i = 0; i < cfg_.dnn_blocks; ++i) {
    const std::string p = "blk" + std::to_string(i) + ".";
    Tensor h = rms_norm(x, params_.at(p + "norm"));
    h = relu(add(linear(h, params_.at(p + "w")), params_.at(p + "b")));
    x = add(x, h);
  }
  return softmax_rows(add(linear(x, params_.at("out_w")), params_.at("out_b")));
}

namespace {

// Shared stack for the vision baseline and the fusion trunk: three stride-2
// conv blocks, then global average pooling to [B, C3].
Tensor conv_trunk(ParamSet& params, const BaselineConfig& cfg, const Tensor& images,
                  bool training, bool with_dropout, Rng* rng) {
  Tensor x = images;
  for (int i = 0; i < 3; ++i) {
    const std::string p = "conv" + std::to_string(i) + ".";
    x = conv2d(x, params.at(p + "w"), params.at(p + "b"), 2, 1);
    Tensor rm = params.at(p + "bn_mean");
    Tensor rv = params.at(p + "bn_var");
    x = batch_norm(x, params.at(p + "bn_gamma"), params.at(p + "bn_beta"), rm, rv,
                   cfg.bn_momentum, cfg.bn_eps, training);
    x = relu(x);
    if (with_dropout && training && cfg.dropout_p > 0.0) {
      if (rng == nullptr) throw ContractError("baseline: training forward needs an RNG for dropout");
      x = dropout(x, cfg.dropout_p, *rng);
    }
  }
  const std::int64_t b = x.dim(0);
  const std::int64_t c = x.dim(1);
  const std::int64_t spatial = x.numel() / (b * c);
  return mean_axis(reshape(x, Shape{b, c, spatial}), 2);  // [B, C]
}

void register_conv_trunk(ParamSet& params, const BaselineConfig& cfg, Rng& rng) {
  int in_ch = cfg.n_views;
  for (int i = 0; i < 3; ++i) {
    const std::string p = "conv" + std::to_string(i) + ".";
    const int out_ch = cfg.cnn_channels[static_cast<std::size_t>(i)];
    params.add(p + "w", fan_in_init(Shape{out_ch, in_ch, 3, 3}, rng), true);
    params.add(p + "b", Tensor::zeros(Shape{out_ch}), true);
    params.add(p + "bn_gamma", Tensor::ones(Shape{out_ch}), true);
    params.add(p + "bn_beta", Tensor::zeros(Shape{out_ch}), true);
    params.add_stat(p + "bn_mean", Tensor::zeros(Shape{out_ch}));
    params.add_stat(p + "bn_var", Tensor::ones(Shape{out_ch}));
    in_ch = out_ch;
  }
}

}  // namespace

VisionCnn::VisionCnn(BaselineConfig cfg, DatasetStats stats, std::uint64_t seed)
    : cfg_(cfg), stats_(std::move(stats)) {
  cfg_.validate();
  Rng rng(splitmix64(seed ^ 0x636e6eULL));
  register_conv_trunk(params_, cfg_, rng);
  params_.add("out_w", fan_in_init(Shape{cfg_.n_beams, cfg_.cnn_channels[2]}, rng), true);
  params_.add("out_b", Tensor::zeros(Shape{cfg_.n_beams}), true);
}

Tensor VisionCnn::forward(std::span<const Sample* const> batch, bool training, Rng* rng) {
  if (batch.empty()) throw ContractError("forward: empty batch");
  Tensor images =
      normalized_views(batch, stats_, cfg_.n_views, cfg_.view_height, cfg_.view_width);
  Tensor feat = conv_trunk(params_, cfg_, images, training, /*with_dropout=*/true, rng);
  return softmax_rows(add(linear(feat, params_.at("out_w")), params_.at("out_b")));
}

FusionModel::FusionModel(BaselineConfig cfg, DatasetStats stats, std::uint64_t seed)
    : cfg_(cfg), stats_(std::move(stats)) {
  cfg_.validate();
  Rng rng(splitmix64(seed ^ 0x667573ULL));
  register_conv_trunk(params_, cfg_, rng);
  const int feat = cfg_.cnn_channels[2] + 3;
  params_.add("mlp.w1", fan_in_init(Shape{cfg_.fusion_hidden, feat}, rng), true);
  params_.add("mlp.b1", Tensor::zeros(Shape{cfg_.fusion_hidden}), true);
  params_.add("mlp.w2", fan_in_init(Shape{cfg_.fusion_hidden, cfg_.fusion_hidden}, rng), true);
  params_.add("mlp.b2", Tensor::zeros(Shape{cfg_.fusion_hidden}), true);
  params_.add("out_w", fan_in_init(Shape{cfg_.n_beams, cfg_.fusion_hidden}, rng), true);
  params_.add("out_b", Tensor::zeros(Shape{cfg_.n_beams}), true);
}

Tensor FusionModel::forward(std::span<const Sample* const> batch, bool training, Rng* rng) {
  if (batch.empty()) throw ContractError("forward: empty batch");
  Tensor images =
      normalized_views(batch, stats_, cfg_.n_views, cfg_.view_height, cfg_.view_width);
  Tensor feat = conv_trunk(params_, cfg_, images, training, /*with_dropout=*/false, rng);
  if (ablate_image_) feat = scale(feat, 0.0);
  Tensor x = concat(feat, normalized_positions(batch, stats_), 1);
  x = relu(add(linear(x, params_.at("mlp.w1")), params_.at("mlp.b1")));
  x = relu(add(linear(x, params_.at("mlp.w2")), params_.at("mlp.b2")));
  return softmax_rows(add(linear(x, params_.at("out_w")), params_.at("out_b")));
}

}  // namespace beamcast
