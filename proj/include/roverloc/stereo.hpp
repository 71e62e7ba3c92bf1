#pragma once

// Rock localization in the rover camera frame: rock centroids detected in the
// left image are carried to the right image through the affine map of their
// enclosing Delaunay triangle (built on sparse stereo matches), then
// forward-intersected and flattened onto the rover ground plane.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "roverloc/delaunay.hpp"
#include "roverloc/error.hpp"
#include "roverloc/geometry.hpp"

namespace roverloc {

// Rectified, calibrated stereo pair. The right camera sits `baseline` meters
// along the left camera's +x axis. Camera frame: x right, y down, z forward.
struct StereoRig {
  double focal_length = 1000.0;
  Point2 principal_point{640.0, 360.0};
  double baseline = 0.5;
  int width = 1280;
  int height = 720;

  void Validate() const {
    if (!(focal_length > 0)) throw Error(ErrorCode::kInvalidArgument, "focal_length must be > 0");
    if (!(baseline > 0)) throw Error(ErrorCode::kInvalidArgument, "baseline must be > 0");
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
    }
    if (!InImage(principal_point)) {
      throw Error(ErrorCode::kInvalidArgument, "principal point outside the image");
    }
  }

  bool InImage(const Point2& p) const {
    return p.x >= 0 && p.y >= 0 && p.x <= width - 1 && p.y <= height - 1;
  }
};

struct FeatureMatch {
  Point2 left;
  Point2 right;
};

struct RockObservation {
  int id = -1;
  Point2 pixel_left;
  Point2 pixel_right;
  Point3 camera_point;
};

inline constexpr double kDefaultMinDisparity = 0.5;

// Triangulates the left-image points of `matches`; vertex i of the result is
// matches[i].left.
inline Triangulation BuildTransferMesh(std::span<const FeatureMatch> matches) {
  std::vector<Point2> left;
  left.reserve(matches.size());
  for (const auto& m : matches) left.push_back(m.left);
  return Delaunay(left);
}

// Right-image correspondent of p_left under the affine map fitted to the
// enclosing triangle's three stereo matches.
inline Point2 TransferPoint(const Triangulation& tri, std::span<const FeatureMatch> matches,
                            const Point2& p_left) {
  if (tri.vertices.size() != matches.size()) {
    throw Error(ErrorCode::kInvalidArgument, "triangulation and matches disagree in size");
  }
  const auto t = LocateTriangle(tri, p_left);
  if (!t) throw Error(ErrorCode::kOutsideHull, "point lies outside the feature hull");
  const auto& v = tri.triangles[*t];
  const std::array<Point2, 3> src{matches[v[0]].left, matches[v[1]].left, matches[v[2]].left};
  const std::array<Point2, 3> dst{matches[v[0]].right, matches[v[1]].right,
                                  matches[v[2]].right};
  Affine2 f;
  try {
    f = AffineFromPairs(src, dst);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateSample) throw;
    throw Error(ErrorCode::kDegenerateTriangle, "enclosing triangle is degenerate");
  }
  return f.Apply(p_left);
}

inline Point3 ForwardIntersect(const StereoRig& rig, const Point2& left, const Point2& right,
                               double min_disparity = kDefaultMinDisparity) {
  const double d = left.x - right.x;
  if (!(d > min_disparity)) {
    throw Error(ErrorCode::kNonPositiveDisparity, "disparity below minimum");
  }
  const double f = rig.focal_length;
  const double z = f * rig.baseline / d;
  const double v = 0.5 * (left.y + right.y);
  return {(left.x - rig.principal_point.x) * z / f, (v - rig.principal_point.y) * z / f, z};
}

// Levels each camera-frame point by the camera's downward tilt (rotation about
// the camera x axis) and drops the vertical component, giving rover-frame
// (lateral, forward) ground coordinates.
inline std::vector<Point2> RocksToGroundPlane(std::span<const RockObservation> observations,
                                              double tilt) {
  const double c = std::cos(tilt), s = std::sin(tilt);
  std::vector<Point2> out;
  out.reserve(observations.size());
  for (const auto& o : observations) {
    const Point3& p = o.camera_point;
    out.emplace_back(p.x, -s * p.y + c * p.z);
  }
  return out;
}

inline constexpr double kDefaultMaxRange = 15.0;

struct NearRockSelection {
  std::vector<RockObservation> kept;
  std::size_t dropped = 0;
};

inline NearRockSelection FilterNearRocks(std::span<const RockObservation> observations,
                                         double max_range = kDefaultMaxRange) {
  NearRockSelection sel;
  for (const auto& o : observations) {
    if (o.camera_point.z <= max_range) {
      sel.kept.push_back(o);
    } else {
      ++sel.dropped;
    }
  }
  return sel;
}

}  // namespace roverloc
