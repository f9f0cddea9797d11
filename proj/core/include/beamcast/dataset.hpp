// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_DATASET_HPP
#define BEAMCAST_DATASET_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "beamcast/channel.hpp"
#include "beamcast/scene.hpp"

namespace beamcast {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

// A vehicle run along one road at constant speed; poses are sampled every
// `sample_interval` seconds until the road ends.
struct Trajectory {
  int road_index = 0;
  double speed = 10.0;  // m/s
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct Sample {
  VehiclePose pose;
  std::vector<DepthView> views;
  int label = 0;
  std::vector<PathComponent> paths;  // retained for audit; not serialized
  Split split = Split::kTrain;

  bool has_los() const {
    for (const PathComponent& p : paths) {
      if (p.bounces == 0) return true;
    }
    return false;
  }
};

// Channelwise image statistics and position statistics over the whole
// dataset; consumed by input normalization.
struct DatasetStats {
  std::vector<double> view_mean;
  std::vector<double> view_std;
  std::array<double, 3> pos_mean{0.0, 0.0, 0.0};
  std::array<double, 3> pos_std{1.0, 1.0, 1.0};
};

struct Dataset {
  std::vector<Sample> samples;
  int n_views = kNumCameras;
  int view_width = 0;
  int view_height = 0;
  int n_beams = 0;
  std::uint64_t codebook_hash = 0;
  std::uint64_t seed = 0;        // generation seed
  std::uint64_t scene_seed = 0;  // seed the scene was built from
  SplitRatios ratios;
  DatasetStats stats;
  SceneConfig scene_config;
  SubcarrierGrid grid;
  ArrayGeometry geometry;
  RenderSettings render;
  double sample_interval = 0.02;
  std::vector<Trajectory> trajectories;

  std::size_t count(Split s) const;
  std::vector<std::size_t> indices(Split s) const;
  double nlos_fraction() const;  // meaningful only when paths are populated
};

// One sample per pose along every trajectory: trace paths, label with the
// brute-force power sweep, render the depth views. Deterministic in
// (scene, trajectories, seed).
Dataset generate_dataset(const Scene& scene, const std::vector<Trajectory>& trajectories,
                         const SubcarrierGrid& grid, const ArrayGeometry& geom,
                         const Codebook& cb, double sample_interval, std::uint64_t seed,
                         const RenderSettings& rs);

// Seeded permutation, then contiguous ranges; train and val take the floor
// counts and test absorbs the remainder, matching the reference split sizes.
void split_dataset(Dataset& ds, const SplitRatios& ratios, std::uint64_t seed);

void compute_stats(Dataset& ds);

// Directory layout: manifest.json + samples.bin. Records are
// pose 4 x f64 | n_views*W*H x f32 | u16 label | u8 split, little-endian.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

// Rebuilds the scene, re-traces every pose and recomputes every label with a
// fresh power sweep. Returns the number of label mismatches (0 = clean).
std::size_t audit_dataset(const Dataset& ds);

}  // namespace beamcast

#endif  // BEAMCAST_DATASET_HPP
