// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_SCENE_HPP
#define BEAMCAST_SCENE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "beamcast/channel.hpp"

namespace beamcast {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

// Axis-aligned building box; lo.z is ground level.
struct Box {
  Vec3 lo, hi;

  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
};

// Straight lane segment on the ground plane.
struct Road {
  Vec3 start, end;  // z = 0
  double width = 8.0;

  double length() const { return (end - start).norm(); }
  Vec3 at(double s) const {  // position at arc length s, clamped
    const double len = length();
    const double t = len > 0.0 ? std::min(std::max(s / len, 0.0), 1.0) : 0.0;
    return start + (end - start) * t;
  }
  double heading() const { return std::atan2(end.y - start.y, end.x - start.x); }
};

struct SceneConfig {
  double extent_l = 200.0;  // x span, meters; scene centered on the origin
  double extent_w = 200.0;  // y span
  int n_buildings = 4;
  int n_roads = 8;
  double road_width = 8.0;
  double road_margin = 6.0;  // setback of road endpoints from the scene edge
  double building_min_side = 16.0;
  double building_max_side = 42.0;
  double building_min_height = 10.0;
  double building_max_height = 28.0;
  double building_clearance = 1.5;  // gap to roads and other buildings
  Vec3 bs_position{-96.0, 0.0, 6.0};
  double antenna_height = 1.5;     // MS antenna above ground
  double carrier_frequency = 28e9;  // Hz; sets the wavelength for attenuation
  double reflection_loss = 0.5;     // amplitude factor per bounce
  bool ground_reflection = true;
  int max_placement_attempts = 4000;
};

struct Scene {
  SceneConfig config;
  std::vector<Box> buildings;
  std::vector<Road> roads;
  Vec3 bs_position;
  std::uint64_t seed = 0;
  std::uint64_t phase_seed = 0;  // derived; drives per-path phase jitter

  double wavelength() const { return kSpeedOfLight / config.carrier_frequency; }
  bool inside_extent(const Vec3& p) const {
    return std::abs(p.x) <= config.extent_l / 2.0 && std::abs(p.y) <= config.extent_w / 2.0;
  }
  // Bit-level hash of the placed geometry; equal across runs for equal inputs.
  std::uint64_t geometry_hash() const;
};

struct VehiclePose {
  Vec3 position;  // antenna position (z = antenna height)
  double heading = 0.0;
};

// Normalized depth image; 1.0 = no hit within max range.
struct DepthView {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major, top row first
};

struct RenderSettings {
  int width = 32;
  int height = 32;
  double fov_deg = 90.0;
  double max_range = 100.0;
};

inline constexpr int kNumCameras = 6;
// front, front-left, front-right, back, back-left, back-right;
// left = +60 degrees (counterclockwise).
extern const double kCameraOffsetsDeg[kNumCameras];

// Seeded layout: roads first, then buildings by rejection sampling.
// Throws GenerationError when a building cannot be placed.
Scene build_scene(const SceneConfig& config, std::uint64_t seed);

// Line of sight plus one image-method specular path per visible building
// facade (and the ground plane when enabled). Deterministic in (scene, pose).
std::vector<PathComponent> trace_paths(const Scene& scene, const VehiclePose& pose);

// True when the segment between two points crosses a building.
bool segment_blocked(const Scene& scene, const Vec3& a, const Vec3& b);

std::vector<DepthView> render_depth_views(const Scene& scene, const VehiclePose& pose,
                                          const RenderSettings& rs);

}  // namespace beamcast

#endif  // BEAMCAST_SCENE_HPP
