// SPDX-License-Identifier: Apache-2.0

#include "beamcast/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "beamcast/errors.hpp"
#include "beamcast/hash.hpp"
#include "beamcast/rng.hpp"
#include "json_codec.hpp"

namespace beamcast {

std::size_t Dataset::count(Split s) const {
  std::size_t n = 0;
  for (const Sample& smp : samples) {
    if (smp.split == s) ++n;
  }
  return n;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == s) out.push_back(i);
  }
  return out;
}

double Dataset::nlos_fraction() const {
  if (samples.empty()) return 0.0;
  std::size_t nlos = 0;
  for (const Sample& s : samples) {
    if (!s.has_los()) ++nlos;
  }
  return static_cast<double>(nlos) / static_cast<double>(samples.size());
}

Dataset generate_dataset(const Scene& scene, const std::vector<Trajectory>& trajectories,
                         const SubcarrierGrid& grid, const ArrayGeometry& geom,
                         const Codebook& cb, double sample_interval, std::uint64_t seed,
                         const RenderSettings& rs) {
  if (trajectories.empty()) throw ConfigError("generate_dataset: no trajectories");
  if (sample_interval <= 0.0) throw ConfigError("generate_dataset: sample interval must be positive");
  Dataset ds;
  ds.n_views = kNumCameras;
  ds.view_width = rs.width;
  ds.view_height = rs.height;
  ds.n_beams = cb.size;
  ds.codebook_hash = cb.hash();
  ds.seed = seed;
  ds.scene_seed = scene.seed;
  ds.scene_config = scene.config;
  ds.grid = grid;
  ds.geometry = geom;
  ds.render = rs;
  ds.sample_interval = sample_interval;
  ds.trajectories = trajectories;

  for (const Trajectory& traj : trajectories) {
    if (traj.road_index < 0 || traj.road_index >= static_cast<int>(scene.roads.size())) {
      throw ConfigError("generate_dataset: trajectory road index out of range");
    }
    if (traj.speed <= 0.0) throw ConfigError("generate_dataset: trajectory speed must be positive");
    const Road& road = scene.roads[static_cast<std::size_t>(traj.road_index)];
    const double duration = road.length() / traj.speed;
    const auto n_poses = static_cast<std::int64_t>(std::floor(duration / sample_interval));
    if (n_poses < 1) throw ConfigError("generate_dataset: trajectory shorter than one interval");
    for (std::int64_t i = 0; i < n_poses; ++i) {
      const double s = static_cast<double>(i) * sample_interval * traj.speed;
      Sample sample;
      Vec3 p = road.at(s);
      p.z = scene.config.antenna_height;
      sample.pose.position = p;
      sample.pose.heading = road.heading();
      sample.paths = trace_paths(scene, sample.pose);
      const ChannelResponse h = channel_response(sample.paths, grid, geom);
      sample.label = optimal_beam(h, cb);
      sample.views = render_depth_views(scene, sample.pose, rs);
      ds.samples.push_back(std::move(sample));
    }
  }
  compute_stats(ds);
  return ds;
}

void split_dataset(Dataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0) {
    throw ConfigError("split: ratios must be non-negative");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1");
  }
  const std::size_t n = ds.samples.size();
  std::size_t nonzero = 0;
  if (ratios.train > 0.0) ++nonzero;
  if (ratios.val > 0.0) ++nonzero;
  if (ratios.test > 0.0) ++nonzero;
  if (n < nonzero) throw ContractError("split: fewer samples than requested splits");

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(splitmix64(seed ^ 0x73706c6974ULL));
  shuffle(perm, rng);

  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.val));
  for (std::size_t i = 0; i < n; ++i) {
    Split s = Split::kTest;
    if (i < n_train) {
      s = Split::kTrain;
    } else if (i < n_train + n_val) {
      s = Split::kVal;
    }
    ds.samples[perm[i]].split = s;
  }
  ds.ratios = ratios;
}

void compute_stats(Dataset& ds) {
  const int nc = ds.n_views;
  ds.stats.view_mean.assign(static_cast<std::size_t>(nc), 0.0);
  ds.stats.view_std.assign(static_cast<std::size_t>(nc), 0.0);
  if (ds.samples.empty()) return;
  std::vector<double> sum(static_cast<std::size_t>(nc), 0.0);
  std::vector<double> sum2(static_cast<std::size_t>(nc), 0.0);
  std::size_t per_channel = 0;
  for (const Sample& s : ds.samples) {
    for (int c = 0; c < nc; ++c) {
      for (float px : s.views[static_cast<std::size_t>(c)].pixels) {
        const auto v = static_cast<double>(px);
        sum[static_cast<std::size_t>(c)] += v;
        sum2[static_cast<std::size_t>(c)] += v * v;
      }
    }
  }
  per_channel = ds.samples.size() * static_cast<std::size_t>(ds.view_width) *
                static_cast<std::size_t>(ds.view_height);
  for (int c = 0; c < nc; ++c) {
    const double m = sum[static_cast<std::size_t>(c)] / static_cast<double>(per_channel);
    const double var =
        std::max(sum2[static_cast<std::size_t>(c)] / static_cast<double>(per_channel) - m * m, 0.0);
    ds.stats.view_mean[static_cast<std::size_t>(c)] = m;
    ds.stats.view_std[static_cast<std::size_t>(c)] = std::sqrt(var);
  }
  double psum[3] = {0, 0, 0}, psum2[3] = {0, 0, 0};
  for (const Sample& s : ds.samples) {
    const double p[3] = {s.pose.position.x, s.pose.position.y, s.pose.position.z};
    for (int i = 0; i < 3; ++i) {
      psum[i] += p[i];
      psum2[i] += p[i] * p[i];
    }
  }
  const auto n = static_cast<double>(ds.samples.size());
  for (int i = 0; i < 3; ++i) {
    const double m = psum[i] / n;
    ds.stats.pos_mean[static_cast<std::size_t>(i)] = m;
    ds.stats.pos_std[static_cast<std::size_t>(i)] =
        std::sqrt(std::max(psum2[i] / n - m * m, 0.0));
  }
}

namespace {

std::size_t record_size(const Dataset& ds) {
  return 4 * sizeof(double) +
         static_cast<std::size_t>(ds.n_views) * static_cast<std::size_t>(ds.view_width) *
             static_cast<std::size_t>(ds.view_height) * sizeof(float) +
         sizeof(std::uint16_t) + sizeof(std::uint8_t);
}

json manifest_json(const Dataset& ds) {
  json j;
  j["format"] = "beamcast-dataset-v1";
  j["seed"] = ds.seed;
  j["scene_seed"] = ds.scene_seed;
  j["codebook_hash"] = hex_digest(ds.codebook_hash);
  j["n_beams"] = ds.n_beams;
  j["n_views"] = ds.n_views;
  j["view_width"] = ds.view_width;
  j["view_height"] = ds.view_height;
  j["n_samples"] = ds.samples.size();
  j["counts"] = {{"train", ds.count(Split::kTrain)},
                 {"val", ds.count(Split::kVal)},
                 {"test", ds.count(Split::kTest)}};
  j["ratios"] = ds.ratios;
  j["stats"] = ds.stats;
  j["scene"] = ds.scene_config;
  j["grid"] = ds.grid;
  j["geometry"] = ds.geometry;
  j["render"] = ds.render;
  j["sample_interval"] = ds.sample_interval;
  j["trajectories"] = ds.trajectories;
  return j;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "manifest.json");
    if (!os) throw DataIntegrityError("cannot write manifest: " + (dir / "manifest.json").string());
    os << manifest_json(ds).dump(2) << '\n';
  }
  std::ofstream os(dir / "samples.bin", std::ios::binary);
  if (!os) throw DataIntegrityError("cannot write samples: " + (dir / "samples.bin").string());
  for (const Sample& s : ds.samples) {
    const double pose[4] = {s.pose.position.x, s.pose.position.y, s.pose.position.z,
                            s.pose.heading};
    os.write(reinterpret_cast<const char*>(pose), sizeof(pose));
    for (const DepthView& v : s.views) {
      os.write(reinterpret_cast<const char*>(v.pixels.data()),
               static_cast<std::streamsize>(v.pixels.size() * sizeof(float)));
    }
    const auto label = static_cast<std::uint16_t>(s.label);
    const auto split = static_cast<std::uint8_t>(s.split);
    os.write(reinterpret_cast<const char*>(&label), sizeof(label));
    os.write(reinterpret_cast<const char*>(&split), sizeof(split));
  }
  if (!os) throw DataIntegrityError("dataset write failed");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw DataIntegrityError("missing manifest: " + (dir / "manifest.json").string());
  json j;
  try {
    ms >> j;
  } catch (const json::exception& e) {
    throw DataIntegrityError(std::string("manifest parse error: ") + e.what());
  }
  if (j.value("format", "") != std::string("beamcast-dataset-v1")) {
    throw DataIntegrityError("unknown dataset format tag");
  }
  Dataset ds;
  try {
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.scene_seed = j.at("scene_seed").get<std::uint64_t>();
    ds.n_beams = j.at("n_beams").get<int>();
    ds.n_views = j.at("n_views").get<int>();
    ds.view_width = j.at("view_width").get<int>();
    ds.view_height = j.at("view_height").get<int>();
    ds.ratios = j.at("ratios").get<SplitRatios>();
    ds.stats = j.at("stats").get<DatasetStats>();
    ds.scene_config = j.at("scene").get<SceneConfig>();
    ds.grid = j.at("grid").get<SubcarrierGrid>();
    ds.geometry = j.at("geometry").get<ArrayGeometry>();
    ds.render = j.at("render").get<RenderSettings>();
    ds.sample_interval = j.at("sample_interval").get<double>();
    ds.trajectories = j.at("trajectories").get<std::vector<Trajectory>>();
    const std::string stored_hash = j.at("codebook_hash").get<std::string>();
    ds.codebook_hash = std::stoull(stored_hash, nullptr, 16);
  } catch (const json::exception& e) {
    throw DataIntegrityError(std::string("manifest field error: ") + e.what());
  }
  const auto n_samples = j.at("n_samples").get<std::size_t>();

  std::ifstream is(dir / "samples.bin", std::ios::binary);
  if (!is) throw DataIntegrityError("missing samples: " + (dir / "samples.bin").string());
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(is.tellg());
  is.seekg(0, std::ios::beg);
  const std::size_t rec = record_size(ds);
  if (file_size != rec * n_samples) {
    throw DataIntegrityError("samples.bin size " + std::to_string(file_size) +
                             " does not match " + std::to_string(n_samples) + " records of " +
                             std::to_string(rec) + " bytes");
  }
  const std::size_t pixels_per_view =
      static_cast<std::size_t>(ds.view_width) * static_cast<std::size_t>(ds.view_height);
  ds.samples.resize(n_samples);
  for (Sample& s : ds.samples) {
    double pose[4];
    is.read(reinterpret_cast<char*>(pose), sizeof(pose));
    s.pose.position = {pose[0], pose[1], pose[2]};
    s.pose.heading = pose[3];
    s.views.resize(static_cast<std::size_t>(ds.n_views));
    for (DepthView& v : s.views) {
      v.width = ds.view_width;
      v.height = ds.view_height;
      v.pixels.resize(pixels_per_view);
      is.read(reinterpret_cast<char*>(v.pixels.data()),
              static_cast<std::streamsize>(pixels_per_view * sizeof(float)));
    }
    std::uint16_t label;
    std::uint8_t split;
    is.read(reinterpret_cast<char*>(&label), sizeof(label));
    is.read(reinterpret_cast<char*>(&split), sizeof(split));
    if (!is) throw DataIntegrityError("samples.bin truncated mid-record");
    if (label >= ds.n_beams) throw DataIntegrityError("sample label out of codebook range");
    if (split > 2) throw DataIntegrityError("sample split tag out of range");
    s.label = label;
    s.split = static_cast<Split>(split);
  }
  return ds;
}

std::size_t audit_dataset(const Dataset& ds) {
  const Scene scene = build_scene(ds.scene_config, ds.scene_seed);
  const Codebook cb = dft_codebook(ds.geometry);
  if (cb.hash() != ds.codebook_hash) {
    throw DataIntegrityError("audit: codebook hash mismatch against manifest geometry");
  }
  std::size_t mismatches = 0;
  for (const Sample& s : ds.samples) {
    const auto paths = trace_paths(scene, s.pose);
    const ChannelResponse h = channel_response(paths, ds.grid, ds.geometry);
    if (optimal_beam(h, cb) != s.label) ++mismatches;
  }
  return mismatches;
}

}  // namespace beamcast
