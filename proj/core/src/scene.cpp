// SPDX-License-Identifier: Apache-2.0

#include "beamcast/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "beamcast/errors.hpp"
#include "beamcast/hash.hpp"
#include "beamcast/rng.hpp"

namespace beamcast {

const double kCameraOffsetsDeg[kNumCameras] = {0.0, 60.0, -60.0, 180.0, 120.0, -120.0};

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kSegEps = 1e-9;

double to_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Segment a + t (b - a) against a box, restricted to t in (t_lo, t_hi).
bool segment_hits_box(const Vec3& a, const Vec3& b, const Box& box, double t_lo, double t_hi) {
  double tmin = t_lo;
  double tmax = t_hi;
  const double av[3] = {a.x, a.y, a.z};
  const double bv[3] = {b.x, b.y, b.z};
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  for (int i = 0; i < 3; ++i) {
    const double d = bv[i] - av[i];
    if (std::abs(d) < 1e-15) {
      if (av[i] < lo[i] || av[i] > hi[i]) return false;
      continue;
    }
    double t0 = (lo[i] - av[i]) / d;
    double t1 = (hi[i] - av[i]) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

// Nearest t >= 0 where the ray enters the box, or +inf.
double ray_box_entry(const Vec3& o, const Vec3& dir, const Box& box) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {dir.x, dir.y, dir.z};
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dv[i]) < 1e-15) {
      if (ov[i] < lo[i] || ov[i] > hi[i]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lo[i] - ov[i]) / dv[i];
    double t1 = (hi[i] - ov[i]) / dv[i];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::numeric_limits<double>::infinity();
  }
  return tmin;
}

// 2D rect overlap with clearance, ignoring z.
bool rects_overlap(double alx, double aly, double ahx, double ahy,
                   double blx, double bly, double bhx, double bhy, double gap) {
  return alx - gap < bhx && ahx + gap > blx && aly - gap < bhy && ahy + gap > bly;
}

// Segment against an axis-aligned 2D rectangle expanded by `gap`.
bool segment_crosses_rect2d(const Vec3& a, const Vec3& b, double lx, double ly, double hx,
                            double hy, double gap) {
  double tmin = 0.0, tmax = 1.0;
  const double av[2] = {a.x, a.y};
  const double bv[2] = {b.x, b.y};
  const double lo[2] = {lx - gap, ly - gap};
  const double hi[2] = {hx + gap, hy + gap};
  for (int i = 0; i < 2; ++i) {
    const double d = bv[i] - av[i];
    if (std::abs(d) < 1e-15) {
      if (av[i] < lo[i] || av[i] > hi[i]) return false;
      continue;
    }
    double t0 = (lo[i] - av[i]) / d;
    double t1 = (hi[i] - av[i]) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

struct PathGeometry {
  double length;
  Vec3 bs_departure;  // direction of the first leg at the BS
  int bounces;
  std::uint64_t reflector_tag;
};

PathComponent make_path(const Scene& scene, const PathGeometry& g) {
  PathComponent p;
  const double lambda = scene.wavelength();
  p.delay = g.length / kSpeedOfLight;
  p.attenuation = lambda / (4.0 * kPi * g.length) *
                  std::pow(scene.config.reflection_loss, static_cast<double>(g.bounces));
  const Vec3 d = g.bs_departure.normalized();
  p.azimuth = std::atan2(d.y, d.x);
  p.elevation = std::acos(std::clamp(d.z, -1.0, 1.0));
  p.bounces = g.bounces;
  // carrier phase of the excess length, plus jitter hashed from the geometry
  const double frac = g.length / lambda - std::floor(g.length / lambda);
  const auto quantized = static_cast<std::uint64_t>(std::llround(g.length * 1e6));
  const std::uint64_t h =
      splitmix64(scene.phase_seed ^ splitmix64(quantized) ^ splitmix64(g.reflector_tag ^ 0x9e37UL));
  p.phase = std::fmod(kTwoPi * frac + kTwoPi * to_unit(h), kTwoPi);
  return p;
}

}  // namespace

std::uint64_t Scene::geometry_hash() const {
  Fnv1a h;
  for (const Box& b : buildings) {
    const double v[6] = {b.lo.x, b.lo.y, b.lo.z, b.hi.x, b.hi.y, b.hi.z};
    h.update(v, sizeof(v));
  }
  for (const Road& r : roads) {
    const double v[7] = {r.start.x, r.start.y, r.start.z, r.end.x, r.end.y, r.end.z, r.width};
    h.update(v, sizeof(v));
  }
  const double bs[3] = {bs_position.x, bs_position.y, bs_position.z};
  h.update(bs, sizeof(bs));
  return h.digest();
}

Scene build_scene(const SceneConfig& config, std::uint64_t seed) {
  if (config.extent_l <= 0.0 || config.extent_w <= 0.0) {
    throw ConfigError("scene: extent must be positive");
  }
  if (config.n_buildings < 0 || config.n_roads < 0) {
    throw ConfigError("scene: negative object count");
  }
  if (config.bs_position.z <= 0.0) throw ConfigError("scene: BS must be above ground");
  Scene scene;
  scene.config = config;
  scene.bs_position = config.bs_position;
  scene.seed = seed;
  scene.phase_seed = splitmix64(seed ^ 0x70617468ULL);
  Rng rng(splitmix64(seed));

  const double hl = config.extent_l / 2.0;
  const double hw = config.extent_w / 2.0;

  // Roads alternate orientation; same-orientation lanes keep min separation.
  std::vector<double> h_offsets, v_offsets;
  for (int i = 0; i < config.n_roads; ++i) {
    const bool horizontal = (i % 2 == 0);
    const double half_span = horizontal ? hw : hl;
    const double limit = half_span - config.road_width;
    if (limit <= 0.0) throw GenerationError("scene: extent too small for roads");
    auto& offsets = horizontal ? h_offsets : v_offsets;
    bool placed = false;
    for (int attempt = 0; attempt < config.max_placement_attempts && !placed; ++attempt) {
      const double off = rng.uniform(-limit, limit);
      bool ok = true;
      for (double o : offsets) {
        if (std::abs(o - off) < config.road_width + 1.0) {
          ok = false;
          break;
        }
      }
      if (ok) {
        offsets.push_back(off);
        Road r;
        r.width = config.road_width;
        if (horizontal) {
          r.start = {-hl + config.road_margin, off, 0.0};
          r.end = {hl - config.road_margin, off, 0.0};
        } else {
          r.start = {off, -hw + config.road_margin, 0.0};
          r.end = {off, hw - config.road_margin, 0.0};
        }
        scene.roads.push_back(r);
        placed = true;
      }
    }
    if (!placed) throw GenerationError("scene: could not place road " + std::to_string(i));
  }

  // Buildings by rejection sampling: off roads, disjoint, away from the BS.
  for (int i = 0; i < config.n_buildings; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_placement_attempts && !placed; ++attempt) {
      const double sx = rng.uniform(config.building_min_side, config.building_max_side);
      const double sy = rng.uniform(config.building_min_side, config.building_max_side);
      const double height = rng.uniform(config.building_min_height, config.building_max_height);
      if (sx / 2.0 + config.building_clearance >= hl || sy / 2.0 + config.building_clearance >= hw) {
        continue;
      }
      const double cx = rng.uniform(-hl + sx / 2.0 + config.building_clearance,
                                    hl - sx / 2.0 - config.building_clearance);
      const double cy = rng.uniform(-hw + sy / 2.0 + config.building_clearance,
                                    hw - sy / 2.0 - config.building_clearance);
      Box b{{cx - sx / 2.0, cy - sy / 2.0, 0.0}, {cx + sx / 2.0, cy + sy / 2.0, height}};
      bool ok = true;
      for (const Road& r : scene.roads) {
        if (segment_crosses_rect2d(r.start, r.end, b.lo.x, b.lo.y, b.hi.x, b.hi.y,
                                   r.width / 2.0 + config.building_clearance)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        for (const Box& other : scene.buildings) {
          if (rects_overlap(b.lo.x, b.lo.y, b.hi.x, b.hi.y, other.lo.x, other.lo.y, other.hi.x,
                            other.hi.y, config.building_clearance)) {
            ok = false;
            break;
          }
        }
      }
      if (ok && rects_overlap(b.lo.x, b.lo.y, b.hi.x, b.hi.y, scene.bs_position.x,
                              scene.bs_position.y, scene.bs_position.x, scene.bs_position.y,
                              config.building_clearance)) {
        ok = false;
      }
      if (ok) {
        scene.buildings.push_back(b);
        placed = true;
      }
    }
    if (!placed) {
      throw GenerationError("scene: could not place building " + std::to_string(i) +
                            " (config infeasible)");
    }
  }
  return scene;
}

bool segment_blocked(const Scene& scene, const Vec3& a, const Vec3& b) {
  for (const Box& box : scene.buildings) {
    if (segment_hits_box(a, b, box, kSegEps, 1.0 - kSegEps)) return true;
  }
  return false;
}

std::vector<PathComponent> trace_paths(const Scene& scene, const VehiclePose& pose) {
  if (!scene.inside_extent(pose.position)) {
    throw ContractError("trace_paths: pose outside scene extent");
  }
  const Vec3 bs = scene.bs_position;
  const Vec3 ms = pose.position;
  std::vector<PathComponent> paths;

  if (!segment_blocked(scene, bs, ms)) {
    paths.push_back(make_path(scene, {(ms - bs).norm(), ms - bs, 0, 0}));
  }

  // One specular candidate per vertical building facade, by the image method.
  for (std::size_t bi = 0; bi < scene.buildings.size(); ++bi) {
    const Box& box = scene.buildings[bi];
    // face: plane value, axis (0=x, 1=y), outward sign
    const struct {
      double plane;
      int axis;
      double sign;
    } faces[4] = {
        {box.lo.x, 0, -1.0}, {box.hi.x, 0, 1.0}, {box.lo.y, 1, -1.0}, {box.hi.y, 1, 1.0}};
    for (int fi = 0; fi < 4; ++fi) {
      const auto& f = faces[fi];
      const double bs_c = f.axis == 0 ? bs.x : bs.y;
      const double ms_c = f.axis == 0 ? ms.x : ms.y;
      // both endpoints strictly on the outward side of the facade
      if (f.sign * (bs_c - f.plane) <= 0.0 || f.sign * (ms_c - f.plane) <= 0.0) continue;
      Vec3 image = bs;
      if (f.axis == 0) {
        image.x = 2.0 * f.plane - bs.x;
      } else {
        image.y = 2.0 * f.plane - bs.y;
      }
      const double img_c = f.axis == 0 ? image.x : image.y;
      const double denom = ms_c - img_c;
      if (std::abs(denom) < 1e-12) continue;
      const double t = (f.plane - img_c) / denom;
      if (t <= 0.0 || t >= 1.0) continue;
      const Vec3 r = image + (ms - image) * t;
      // hit point must lie within the finite facade rectangle
      if (f.axis == 0) {
        if (r.y < box.lo.y || r.y > box.hi.y || r.z < box.lo.z || r.z > box.hi.z) continue;
      } else {
        if (r.x < box.lo.x || r.x > box.hi.x || r.z < box.lo.z || r.z > box.hi.z) continue;
      }
      if (segment_blocked(scene, bs, r) || segment_blocked(scene, r, ms)) continue;
      const double length = (r - bs).norm() + (ms - r).norm();
      paths.push_back(make_path(scene, {length, r - bs, 1, 1 + bi * 4 + static_cast<std::size_t>(fi)}));
    }
  }

  if (scene.config.ground_reflection && bs.z > 0.0 && ms.z > 0.0) {
    const Vec3 image{bs.x, bs.y, -bs.z};
    const double t = bs.z / (bs.z + ms.z);
    const Vec3 r = image + (ms - image) * t;  // on z = 0
    if (!segment_blocked(scene, bs, r) && !segment_blocked(scene, r, ms)) {
      const double length = (r - bs).norm() + (ms - r).norm();
      paths.push_back(make_path(scene, {length, r - bs, 1, 1 + scene.buildings.size() * 4}));
    }
  }
  return paths;
}

std::vector<DepthView> render_depth_views(const Scene& scene, const VehiclePose& pose,
                                          const RenderSettings& rs) {
  if (rs.width < 1 || rs.height < 1) throw ConfigError("render: resolution must be positive");
  if (rs.max_range <= 0.0) throw ConfigError("render: max range must be positive");
  const double tan_half = std::tan(rs.fov_deg * kPi / 180.0 / 2.0);
  std::vector<DepthView> views(kNumCameras);
  for (int cam = 0; cam < kNumCameras; ++cam) {
    const double az = pose.heading + kCameraOffsetsDeg[cam] * kPi / 180.0;
    const Vec3 forward{std::cos(az), std::sin(az), 0.0};
    const Vec3 right{std::sin(az), -std::cos(az), 0.0};
    const Vec3 up{0.0, 0.0, 1.0};
    DepthView& view = views[static_cast<std::size_t>(cam)];
    view.width = rs.width;
    view.height = rs.height;
    view.pixels.resize(static_cast<std::size_t>(rs.width) * static_cast<std::size_t>(rs.height));
    for (int row = 0; row < rs.height; ++row) {
      const double ndc_y = 1.0 - (static_cast<double>(row) + 0.5) / static_cast<double>(rs.height) * 2.0;
      for (int col = 0; col < rs.width; ++col) {
        const double ndc_x = (static_cast<double>(col) + 0.5) / static_cast<double>(rs.width) * 2.0 - 1.0;
        const Vec3 dir =
            (forward + right * (tan_half * ndc_x) + up * (tan_half * ndc_y)).normalized();
        double nearest = std::numeric_limits<double>::infinity();
        for (const Box& b : scene.buildings) {
          nearest = std::min(nearest, ray_box_entry(pose.position, dir, b));
        }
        const double depth = std::min(nearest / rs.max_range, 1.0);
        view.pixels[static_cast<std::size_t>(row * rs.width + col)] = static_cast<float>(depth);
      }
    }
  }
  return views;
}

}  // namespace beamcast
