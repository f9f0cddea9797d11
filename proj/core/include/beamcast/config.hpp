// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_CONFIG_HPP
#define BEAMCAST_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "beamcast/baselines.hpp"
#include "beamcast/channel.hpp"
#include "beamcast/dataset.hpp"
#include "beamcast/model.hpp"
#include "beamcast/scene.hpp"
#include "beamcast/train.hpp"

namespace beamcast {

struct DataConfig {
  SplitRatios ratios;
  double sample_interval = 0.02;
  std::vector<Trajectory> trajectories{{0, 8.0}, {1, 10.0}, {2, 12.0}};
  // Keep only the first N generated samples (0 = keep all).
  std::size_t max_samples = 0;
};

// One self-contained run description; the resolved copy written next to every
// command's outputs reproduces the run bit for bit.
struct RunConfig {
  std::uint64_t seed = 1;  // master seed: scene layout and data generation
  std::string model_kind = "mlm-bp";
  SceneConfig scene;
  ArrayGeometry geometry;
  SubcarrierGrid grid;
  RenderSettings render;
  DataConfig data;
  ModelConfig model;
  BaselineConfig baseline;
  TrainConfig train;

  void validate() const;
};

// Strict parsing: unknown keys anywhere are a ConfigError.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

// Applies "section.key=value" (JSON-typed value) onto the serialized config.
std::string apply_override(const std::string& config_json, const std::string& assignment);

// Named scene presets: "urban" (default layout), "empty" (no buildings, no
// ground bounce), "los" (sparse low buildings), "blockage" (dense tall
// buildings hugging the roads).
void apply_scene_preset(RunConfig& cfg, const std::string& name);

}  // namespace beamcast

#endif  // BEAMCAST_CONFIG_HPP
