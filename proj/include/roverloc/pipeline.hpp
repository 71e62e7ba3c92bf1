#pragma once

// End-to-end localization: rock detections + stereo matches + UAV map rocks
// -> rover camera pose in the map frame.
//
//   transfer/intersect -> near-rock filter -> ground plane -> pattern match
//   -> join UAV 3D rocks -> resection

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "roverloc/delaunay.hpp"
#include "roverloc/error.hpp"
#include "roverloc/geometry.hpp"
#include "roverloc/matcher.hpp"
#include "roverloc/resection.hpp"
#include "roverloc/simulator.hpp"
#include "roverloc/stereo.hpp"

namespace roverloc {

enum class Stage { kInput, kIntersection, kMatching, kResection };

inline const char* ToString(Stage s) {
  switch (s) {
    case Stage::kInput: return "input";
    case Stage::kIntersection: return "intersection";
    case Stage::kMatching: return "matching";
    case Stage::kResection: return "resection";
  }
  return "unknown";
}

// CLI exit code for a failing stage.
inline int ExitCode(Stage s) {
  switch (s) {
    case Stage::kInput: return 1;
    case Stage::kIntersection: return 3;
    case Stage::kMatching: return 4;
    case Stage::kResection: return 5;
  }
  return 1;
}

class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), std::string(ToString(stage)) + " stage: " + cause.what()),
        stage_(stage) {}

  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct PipelineConfig {
  StereoRig rig;
  double camera_tilt = 0.0;  // radians, downward
  double max_range = kDefaultMaxRange;
  double min_disparity = kDefaultMinDisparity;
  MatchConfig match;
  ResectionOptions resection;

  void Validate() const {
    rig.Validate();
    match.Validate();
    if (!(max_range > 0)) throw Error(ErrorCode::kInvalidArgument, "max_range must be > 0");
    if (!(min_disparity >= 0)) {
      throw Error(ErrorCode::kInvalidArgument, "min_disparity must be >= 0");
    }
    if (!std::isfinite(camera_tilt) || std::abs(camera_tilt) >= 1.5) {
      throw Error(ErrorCode::kInvalidArgument, "camera_tilt must be within (-1.5, 1.5) rad");
    }
    if (!(resection.tolerance > 0) || resection.max_iterations < 1) {
      throw Error(ErrorCode::kInvalidArgument, "invalid resection tolerances");
    }
  }
};

struct PipelineInputs {
  std::vector<UavRock> uav_rocks;
  std::vector<RockDetection> detections;
  std::vector<FeatureMatch> stereo_matches;
};

struct IntersectionReport {
  std::size_t detections = 0;
  std::size_t located = 0;
  std::size_t outside_hull = 0;
  std::size_t degenerate_triangle = 0;
  std::size_t bad_disparity = 0;
  std::size_t dropped_far = 0;
};

struct IdCorrespondence {
  int detection_id = 0;
  int uav_id = 0;
  friend bool operator==(const IdCorrespondence&, const IdCorrespondence&) = default;
};

struct LocalizationResult {
  Point2 planar_position;
  Pose pose;
  IntersectionReport intersection;
  std::vector<RockObservation> observations;  // near rocks, in rover-set order
  RockSet rover_set;
  RockSet uav_set;
  MatchHypothesis match;
  std::vector<IdCorrespondence> matched_ids;
  ResectionReport resection;
};

struct LocatedRocks {
  std::vector<RockObservation> observations;
  IntersectionReport report;
};

// Transfers every detection to the right image and intersects it. Rocks that
// cannot be located are counted, not fatal; a bad feature set is.
inline LocatedRocks LocateRocks(const StereoRig& rig, std::span<const FeatureMatch> matches,
                                std::span<const RockDetection> detections, double min_disparity) {
  LocatedRocks out;
  out.report.detections = detections.size();
  const Triangulation mesh = BuildTransferMesh(matches);
  for (const auto& det : detections) {
    try {
      const Point2 right = TransferPoint(mesh, matches, det.pixel);
      const Point3 cam = ForwardIntersect(rig, det.pixel, right, min_disparity);
      out.observations.push_back({det.id, det.pixel, right, cam});
      ++out.report.located;
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::kOutsideHull: ++out.report.outside_hull; break;
        case ErrorCode::kDegenerateTriangle: ++out.report.degenerate_triangle; break;
        case ErrorCode::kNonPositiveDisparity: ++out.report.bad_disparity; break;
        default: throw;
      }
    }
  }
  return out;
}

// Throws StageError tagged with the failing stage.
inline LocalizationResult Localize(const PipelineInputs& in, const PipelineConfig& cfg) {
  try {
    cfg.Validate();
  } catch (const Error& e) {
    throw StageError(Stage::kInput, e);
  }
  LocalizationResult res;

  try {
    LocatedRocks located = LocateRocks(cfg.rig, in.stereo_matches, in.detections, cfg.min_disparity);
    res.intersection = located.report;
    NearRockSelection near = FilterNearRocks(located.observations, cfg.max_range);
    res.intersection.dropped_far = near.dropped;
    res.observations = std::move(near.kept);
  } catch (const Error& e) {
    throw StageError(Stage::kIntersection, e);
  }

  try {
    res.rover_set = {RocksToGroundPlane(res.observations, cfg.camera_tilt), RockFrame::kRoverGround};
    res.uav_set.frame = RockFrame::kUavMap;
    for (const auto& r : in.uav_rocks) res.uav_set.points.emplace_back(r.position.x, r.position.y);
    res.rover_set.Validate();
    res.uav_set.Validate();
    res.match = MatchPatterns(res.rover_set, res.uav_set, cfg.match);
  } catch (const Error& e) {
    throw StageError(Stage::kMatching, e);
  }

  std::vector<RayObservation> rays;
  for (const auto& c : res.match.correspondences) {
    const RockObservation& o = res.observations[c.rover];
    const UavRock& u = in.uav_rocks[c.uav];
    res.matched_ids.push_back({o.id, u.id});
    rays.push_back(MakeRayObservation(cfg.rig, o.pixel_left, u.position));
  }
  try {
    res.resection = Resect(rays, cfg.resection);
  } catch (const Error& e) {
    throw StageError(Stage::kResection, e);
  }
  res.pose = res.resection.pose;
  res.planar_position = res.resection.planar_position;
  return res;
}

inline PipelineInputs InputsFromScene(const Scene& scene) {
  return {scene.uav_rocks, scene.detections, scene.stereo_matches};
}

// Pipeline settings matching a simulated scene's rig and camera tilt.
inline PipelineConfig PipelineConfigForScene(const SceneConfig& scene_cfg) {
  PipelineConfig cfg;
  cfg.rig = scene_cfg.rig;
  cfg.camera_tilt = scene_cfg.rover.tilt;
  return cfg;
}

struct PlanarError {
  double dx = 0.0;
  double dy = 0.0;
  double total = 0.0;
};

// computed - reference per axis; total = sqrt(dx² + dy²).
inline PlanarError EvaluatePlanar(const Point2& computed, const Point2& reference) {
  const double dx = computed.x - reference.x;
  const double dy = computed.y - reference.y;
  return {dx, dy, std::hypot(dx, dy)};
}

}  // namespace roverloc
