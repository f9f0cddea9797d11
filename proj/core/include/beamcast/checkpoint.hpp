// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_CHECKPOINT_HPP
#define BEAMCAST_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "beamcast/dataset.hpp"
#include "beamcast/predictor.hpp"

namespace beamcast {

struct CheckpointParam {
  std::string name;
  Tensor tensor;
  bool trainable = false;
  bool is_stat = false;
};

// Single-file checkpoint: magic "BCPT", u64 manifest length, JSON manifest
// (model kind, config, stats, counters, parameter inventory), then one BCTN
// blob per parameter in manifest order, then optional optimizer moments
// (m and v blobs per trainable parameter).
struct CheckpointData {
  std::string model_kind;
  std::string config_json;
  DatasetStats stats;
  std::uint64_t codebook_hash = 0;
  std::int64_t optimizer_steps = 0;
  int completed_epochs = 0;
  double best_val_top1 = -1.0;
  std::vector<CheckpointParam> params;
  std::vector<std::tuple<std::string, Tensor, Tensor>> moments;  // name, m, v
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Reconstructs a predictor of the stored kind, validating every parameter's
// shape against the stored config and restoring the trainability mask.
std::unique_ptr<BeamPredictor> predictor_from_checkpoint(const CheckpointData& data);

// Snapshot of the predictor's parameters and mask (no optimizer state).
CheckpointData checkpoint_from_predictor(const BeamPredictor& model);

}  // namespace beamcast

#endif  // BEAMCAST_CHECKPOINT_HPP
