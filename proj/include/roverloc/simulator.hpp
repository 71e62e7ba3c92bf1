#pragma once

// Synthetic ground truth for the localization pipeline: a rock field on
// analytic terrain, a stereo rover camera looking into it, and everything the
// pipeline consumes (UAV map rocks, left-image rock detections, sparse stereo
// matches), with optional noise and outliers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "roverloc/error.hpp"
#include "roverloc/geometry.hpp"
#include "roverloc/resection.hpp"
#include "roverloc/stereo.hpp"

namespace roverloc {

struct Terrain {
  enum class Kind { kPlane, kGentleRelief };
  Kind kind = Kind::kPlane;
  double amplitude = 0.0;   // m
  double wavelength = 8.0;  // m

  // Height over local field coordinates.
  double Height(double x, double y) const {
    if (kind == Kind::kPlane) return 0.0;
    const double k = 2.0 * std::numbers::pi / wavelength;
    return amplitude * std::sin(k * x) * std::cos(k * y);
  }
};

// Camera pose for a rover camera at `position` looking along `heading`
// (radians, counter-clockwise from world +X) and pitched down by `tilt`.
inline Pose RoverCameraPose(const Point3& position, double heading, double tilt) {
  const Eigen::Vector3d forward(std::cos(heading), std::sin(heading), 0.0);
  const Eigen::Vector3d right(std::sin(heading), -std::cos(heading), 0.0);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  Eigen::Matrix3d m;
  m.row(0) = right;
  m.row(1) = std::cos(tilt) * down - std::sin(tilt) * forward;
  m.row(2) = std::cos(tilt) * forward + std::sin(tilt) * down;
  return {MatrixToQuat(RotationMatrix(m)), position};
}

struct RoverPlacement {
  Point3 position{-1.0, 10.0, 1.5};  // local field coordinates
  double heading = 0.0;
  double tilt = 15.0 * std::numbers::pi / 180.0;
};

struct SceneConfig {
  Point2 field_extent{20.0, 20.0};
  int rock_count = 30;
  Terrain terrain;
  RoverPlacement rover;
  StereoRig rig;
  double pixel_noise_sigma = 0.0;
  double uav_noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  std::uint64_t rng_seed = 0;
  // Added to world X, Y of everything emitted (large-offset conditioning runs).
  Point2 world_offset{0.0, 0.0};
  double min_rock_separation = 0.3;
  double feature_spacing = 40.0;    // px
  double feature_max_range = 60.0;  // m along the ground
  double outlier_max_range = 15.0;  // m, spurious rover detections

  void Validate() const {
    rig.Validate();
    if (!(field_extent.x > 0 && field_extent.y > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "field_extent must be positive");
    }
    if (rock_count < 0) throw Error(ErrorCode::kInvalidArgument, "rock_count must be >= 0");
    if (pixel_noise_sigma < 0 || uav_noise_sigma < 0) {
      throw Error(ErrorCode::kInvalidArgument, "noise sigmas must be >= 0");
    }
    if (!(outlier_fraction >= 0 && outlier_fraction < 1)) {
      throw Error(ErrorCode::kInvalidArgument, "outlier_fraction must be in [0, 1)");
    }
    if (!(feature_spacing >= 4)) {
      throw Error(ErrorCode::kInvalidArgument, "feature_spacing must be >= 4 px");
    }
    if (terrain.kind == Terrain::Kind::kGentleRelief && !(terrain.wavelength > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "terrain wavelength must be > 0");
    }
  }

  Pose RoverPoseTruth() const {
    const Point3 p = rover.position + Point3{world_offset.x, world_offset.y, 0.0};
    return RoverCameraPose(p, rover.heading, rover.tilt);
  }
};

struct UavRock {
  int id = 0;
  Point3 position;
};

struct RockDetection {
  int id = 0;
  Point2 pixel;
};

struct TrueCorrespondence {
  int detection_id = 0;
  int uav_id = 0;
  std::size_t rock = 0;
};

struct GroundTruth {
  std::vector<Point3> rock_world;
  std::vector<bool> visible;
  Pose rover_pose;
  double tilt = 0.0;
  std::vector<TrueCorrespondence> correspondences;
  std::vector<int> outlier_detection_ids;
  std::vector<int> outlier_uav_ids;

  Point2 PlanarPosition() const { return {rover_pose.position.x, rover_pose.position.y}; }
};

struct Scene {
  StereoRig rig;
  GroundTruth truth;
  std::vector<UavRock> uav_rocks;
  std::vector<RockDetection> detections;
  std::vector<FeatureMatch> stereo_matches;
};

struct StereoProjection {
  Point2 left;
  Point2 right;
};

// Pinhole projection into the rectified pair; nullopt when the point is
// behind the camera or falls outside either image.
inline std::optional<StereoProjection> ProjectRock(const Pose& pose, const StereoRig& rig,
                                                   const Point3& world) {
  const Point3 c = pose.ToCamera(world);
  if (!(c.z > 0)) return std::nullopt;
  const double f = rig.focal_length;
  const Point2& pp = rig.principal_point;
  const Point2 left{pp.x + f * c.x / c.z, pp.y + f * c.y / c.z};
  const Point2 right{pp.x + f * (c.x - rig.baseline) / c.z, left.y};
  if (!rig.InImage(left) || !rig.InImage(right)) return std::nullopt;
  return StereoProjection{left, right};
}

namespace detail {

enum class Stream : std::uint32_t { kPlacement = 1, kFeatures, kOutliers, kNoise, kShuffle };

inline std::mt19937_64 SceneRng(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x5ce7e5u, static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

// World point where the camera ray through `pixel` meets the terrain, within
// `max_range` of horizontal travel.
inline std::optional<Point3> CastToTerrain(const SceneConfig& cfg, const Pose& pose,
                                           const Point2& pixel, double max_range) {
  const Eigen::Vector3d ray_cam = ToEigen(PixelToRay(cfg.rig, pixel));
  const Eigen::Vector3d dir = QuatToMatrix(pose.rotation).matrix().transpose() * ray_cam;
  const Eigen::Vector3d origin = ToEigen(pose.position);
  const double ox = cfg.world_offset.x, oy = cfg.world_offset.y;
  const double horizontal = std::hypot(dir.x(), dir.y());
  const double t_max = horizontal > 1e-12 ? max_range / horizontal : max_range;
  auto gap = [&](double t) {
    const Eigen::Vector3d p = origin + t * dir;
    return p.z() - cfg.terrain.Height(p.x() - ox, p.y() - oy);
  };
  double t_hit = -1.0;
  if (cfg.terrain.kind == Terrain::Kind::kPlane) {
    if (dir.z() >= 0) return std::nullopt;
    t_hit = -origin.z() / dir.z();
    if (t_hit > t_max) return std::nullopt;
  } else {
    const double step = 0.02 / std::max(horizontal, 0.05);
    double lo = 0.0;
    if (gap(lo) <= 0) return std::nullopt;
    double hi = lo;
    while (true) {
      hi = std::min(lo + step, t_max);
      if (gap(hi) <= 0) break;
      if (hi >= t_max) return std::nullopt;
      lo = hi;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++i) {
      const double mid = 0.5 * (lo + hi);
      (gap(mid) > 0 ? lo : hi) = mid;
    }
    t_hit = hi;
  }
  const Eigen::Vector3d p = origin + t_hit * dir;
  return Point3{p.x(), p.y(), cfg.terrain.Height(p.x() - ox, p.y() - oy)};
}

inline Point3 OnTerrain(const SceneConfig& cfg, double local_x, double local_y) {
  return {local_x + cfg.world_offset.x, local_y + cfg.world_offset.y,
          cfg.terrain.Height(local_x, local_y)};
}

}  // namespace detail

// Deterministic for a fixed config (including seed). Throws EmptyVisibleSet
// when the rover camera sees no rock.
inline Scene GenerateScene(const SceneConfig& cfg) {
  cfg.Validate();
  Scene scene;
  scene.rig = cfg.rig;
  GroundTruth& truth = scene.truth;
  truth.rover_pose = cfg.RoverPoseTruth();
  truth.tilt = cfg.rover.tilt;
  const Pose& pose = truth.rover_pose;

  auto placement = detail::SceneRng(cfg.rng_seed, detail::Stream::kPlacement);
  auto features = detail::SceneRng(cfg.rng_seed, detail::Stream::kFeatures);
  auto outliers = detail::SceneRng(cfg.rng_seed, detail::Stream::kOutliers);
  auto noise = detail::SceneRng(cfg.rng_seed, detail::Stream::kNoise);
  auto shuffle = detail::SceneRng(cfg.rng_seed, detail::Stream::kShuffle);

  // Rocks: uniform with a minimum separation (rejection sampling).
  std::uniform_real_distribution<double> ux(0.0, cfg.field_extent.x);
  std::uniform_real_distribution<double> uy(0.0, cfg.field_extent.y);
  std::vector<Point2> local;
  for (int attempt = 0; static_cast<int>(local.size()) < cfg.rock_count && attempt < 1000 * (cfg.rock_count + 1); ++attempt) {
    const Point2 c{ux(placement), uy(placement)};
    const bool clear = std::all_of(local.begin(), local.end(), [&](const Point2& p) {
      return Distance(p, c) >= cfg.min_rock_separation;
    });
    if (clear) local.push_back(c);
  }
  if (static_cast<int>(local.size()) < cfg.rock_count) {
    throw Error(ErrorCode::kInvalidArgument, "cannot place rocks with the requested separation");
  }
  for (const auto& p : local) truth.rock_world.push_back(detail::OnTerrain(cfg, p.x, p.y));

  std::vector<std::size_t> visible_rocks;
  std::vector<StereoProjection> rock_proj(truth.rock_world.size());
  truth.visible.assign(truth.rock_world.size(), false);
  for (std::size_t i = 0; i < truth.rock_world.size(); ++i) {
    const auto proj = ProjectRock(pose, cfg.rig, truth.rock_world[i]);
    if (proj && proj->left.x - proj->right.x > kDefaultMinDisparity) {
      truth.visible[i] = true;
      rock_proj[i] = *proj;
      visible_rocks.push_back(i);
    }
  }
  if (visible_rocks.empty()) {
    throw Error(ErrorCode::kEmptyVisibleSet, "rover camera sees no rocks");
  }

  // Spurious rover detections: ground points inside the view, clear of rocks.
  const auto rover_outliers = static_cast<int>(std::lround(cfg.outlier_fraction * visible_rocks.size()));
  std::vector<Point2> outlier_pixels;
  {
    const double half_fov = std::atan2(0.5 * cfg.rig.width, cfg.rig.focal_length);
    std::uniform_real_distribution<double> range(2.0, cfg.outlier_max_range);
    std::uniform_real_distribution<double> bearing(-half_fov, half_fov);
    const Point3 cam_local = cfg.rover.position;
    for (int attempt = 0; static_cast<int>(outlier_pixels.size()) < rover_outliers && attempt < 10000; ++attempt) {
      const double r = range(outliers);
      const double b = cfg.rover.heading + bearing(outliers);
      const double lx = cam_local.x + r * std::cos(b), ly = cam_local.y + r * std::sin(b);
      const bool clear = std::all_of(local.begin(), local.end(), [&](const Point2& p) {
        return Distance(p, Point2{lx, ly}) >= 1.0;
      });
      if (!clear) continue;
      const auto proj = ProjectRock(pose, cfg.rig, detail::OnTerrain(cfg, lx, ly));
      if (proj && proj->left.x - proj->right.x > kDefaultMinDisparity) outlier_pixels.push_back(proj->left);
    }
  }

  // UAV map: every rock with map noise, plus spurious map rocks.
  const auto uav_outliers = static_cast<int>(std::lround(cfg.outlier_fraction * cfg.rock_count));
  std::vector<Point3> uav_outlier_points;
  for (int attempt = 0; static_cast<int>(uav_outlier_points.size()) < uav_outliers && attempt < 10000; ++attempt) {
    const Point2 c{ux(outliers), uy(outliers)};
    const bool clear = std::all_of(local.begin(), local.end(), [&](const Point2& p) {
      return Distance(p, c) >= cfg.min_rock_separation;
    });
    if (clear) uav_outlier_points.push_back(detail::OnTerrain(cfg, c.x, c.y));
  }

  // Shuffled id assignment on both sides.
  std::vector<int> det_slots(visible_rocks.size() + outlier_pixels.size());
  std::iota(det_slots.begin(), det_slots.end(), 0);
  std::shuffle(det_slots.begin(), det_slots.end(), shuffle);
  std::vector<int> uav_slots(truth.rock_world.size() + uav_outlier_points.size());
  std::iota(uav_slots.begin(), uav_slots.end(), 0);
  std::shuffle(uav_slots.begin(), uav_slots.end(), shuffle);

  std::normal_distribution<double> px_noise(0.0, 1.0);
  auto jitter_px = [&](const Point2& p) {
    if (cfg.pixel_noise_sigma == 0) return p;
    const double dx = cfg.pixel_noise_sigma * px_noise(noise);
    const double dy = cfg.pixel_noise_sigma * px_noise(noise);
    return Point2{p.x + dx, p.y + dy};
  };
  auto jitter_map = [&](const Point3& p) {
    if (cfg.uav_noise_sigma == 0) return p;
    const double dx = cfg.uav_noise_sigma * px_noise(noise);
    const double dy = cfg.uav_noise_sigma * px_noise(noise);
    const double dz = cfg.uav_noise_sigma * px_noise(noise);
    return Point3{p.x + dx, p.y + dy, p.z + dz};
  };

  scene.detections.resize(det_slots.size());
  for (std::size_t k = 0; k < visible_rocks.size(); ++k) {
    const int id = det_slots[k];
    scene.detections[id] = {id, jitter_px(rock_proj[visible_rocks[k]].left)};
  }
  for (std::size_t k = 0; k < outlier_pixels.size(); ++k) {
    const int id = det_slots[visible_rocks.size() + k];
    scene.detections[id] = {id, jitter_px(outlier_pixels[k])};
    truth.outlier_detection_ids.push_back(id);
  }
  scene.uav_rocks.resize(uav_slots.size());
  for (std::size_t i = 0; i < truth.rock_world.size(); ++i) {
    const int id = uav_slots[i];
    scene.uav_rocks[id] = {id, jitter_map(truth.rock_world[i])};
  }
  for (std::size_t k = 0; k < uav_outlier_points.size(); ++k) {
    const int id = uav_slots[truth.rock_world.size() + k];
    scene.uav_rocks[id] = {id, jitter_map(uav_outlier_points[k])};
    truth.outlier_uav_ids.push_back(id);
  }
  std::sort(truth.outlier_detection_ids.begin(), truth.outlier_detection_ids.end());
  std::sort(truth.outlier_uav_ids.begin(), truth.outlier_uav_ids.end());
  for (std::size_t k = 0; k < visible_rocks.size(); ++k) {
    truth.correspondences.push_back({det_slots[k], uav_slots[visible_rocks[k]], visible_rocks[k]});
  }
  std::sort(truth.correspondences.begin(), truth.correspondences.end(),
            [](const auto& a, const auto& b) { return a.detection_id < b.detection_id; });

  // Terrain features on a jittered image grid; border nodes stay on the
  // image edge so the feature hull spans the whole visible ground.
  const double g = cfg.feature_spacing;
  const double w = cfg.rig.width - 1.0, h = cfg.rig.height - 1.0;
  const int nu = static_cast<int>(std::ceil(w / g)), nv = static_cast<int>(std::ceil(h / g));
  std::uniform_real_distribution<double> jitter(-0.4 * g, 0.4 * g);
  for (int j = 0; j <= nv; ++j) {
    for (int i = 0; i <= nu; ++i) {
      double u = std::min(i * g, w), v = std::min(j * g, h);
      const double ju = jitter(features), jv = jitter(features);
      if (i > 0 && i < nu) u += ju;
      if (j > 0 && j < nv) v += jv;
      const auto ground = detail::CastToTerrain(cfg, pose, {u, v}, cfg.feature_max_range);
      if (!ground) continue;
      const auto proj = ProjectRock(pose, cfg.rig, *ground);
      if (!proj || proj->left.x - proj->right.x <= kDefaultMinDisparity) continue;
      scene.stereo_matches.push_back({proj->left, proj->right});
    }
  }
  for (auto& m : scene.stereo_matches) {
    m.left = jitter_px(m.left);
    m.right = jitter_px(m.right);
  }
  return scene;
}

}  // namespace roverloc
