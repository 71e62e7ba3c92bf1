#pragma once

// On-disk formats. Rock and match tables are UTF-8 line records with '#'
// comments; configs, truth and results are JSON documents. Numbers are
// written in shortest round-trip form so reruns produce identical bytes.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "roverloc/digest.hpp"
#include "roverloc/error.hpp"
#include "roverloc/pipeline.hpp"
#include "roverloc/simulator.hpp"

namespace roverloc {

using Json = nlohmann::ordered_json;

inline constexpr const char* kUavRocksFile = "uav_rocks.txt";
inline constexpr const char* kDetectionsFile = "rover_detections.txt";
inline constexpr const char* kStereoMatchesFile = "stereo_matches.txt";
inline constexpr const char* kTruthFile = "truth.json";
inline constexpr const char* kPipelineFile = "pipeline.json";

inline constexpr double kLargeOffsetX = 900000.0;
inline constexpr double kLargeOffsetY = 3469000.0;

inline double DegToRad(double d) { return d * std::numbers::pi / 180.0; }
inline double RadToDeg(double r) { return r * 180.0 / std::numbers::pi; }

// Degrees for display in documents, rounded to 1e-9 deg.
inline double JsonDegrees(double r) { return std::round(RadToDeg(r) * 1e9) / 1e9; }

inline std::string FormatNumber(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::vector<std::vector<double>> ReadRecords(std::string_view text, std::string_view what) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<double> row;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ',' ||
                                 line[i] == '\r')) {
        ++i;
      }
      if (i >= line.size()) break;
      double v = 0.0;
      const auto r = std::from_chars(line.data() + i, line.data() + line.size(), v);
      if (r.ec != std::errc() || !std::isfinite(v)) {
        throw Error(ErrorCode::kParse,
                    std::string(what) + ":" + std::to_string(line_no) + ": bad number");
      }
      row.push_back(v);
      i = static_cast<std::size_t>(r.ptr - line.data());
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

inline int AsId(double v, std::string_view what) {
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    throw Error(ErrorCode::kParse, std::string(what) + ": id must be an integer");
  }
  return static_cast<int>(v);
}

inline std::string Join(std::initializer_list<double> values) {
  std::string s;
  for (double v : values) {
    if (!s.empty()) s += ' ';
    s += FormatNumber(v);
  }
  return s;
}

}  // namespace detail

inline std::string ReadTextFile(const std::filesystem::path& path) {
  return ReadFileBytes(path.string());
}

inline void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

// id X Y Z
inline std::string FormatUavRocks(std::span<const UavRock> rocks) {
  std::string s = "# id X Y Z (m, world)\n";
  for (const auto& r : rocks) {
    s += std::to_string(r.id) + ' ' +
         detail::Join({r.position.x, r.position.y, r.position.z}) + '\n';
  }
  return s;
}

inline std::vector<UavRock> ParseUavRocks(std::string_view text) {
  std::vector<UavRock> out;
  for (const auto& row : detail::ReadRecords(text, kUavRocksFile)) {
    if (row.size() != 4) throw Error(ErrorCode::kParse, "uav_rocks: expected id X Y Z");
    out.push_back({detail::AsId(row[0], kUavRocksFile), {row[1], row[2], row[3]}});
  }
  return out;
}

// id x y, or id xmin ymin xmax ymax (box center is used).
inline std::string FormatDetections(std::span<const RockDetection> detections) {
  std::string s = "# id x y (px, left image rock centroid)\n";
  for (const auto& d : detections) {
    s += std::to_string(d.id) + ' ' + detail::Join({d.pixel.x, d.pixel.y}) + '\n';
  }
  return s;
}

inline std::vector<RockDetection> ParseDetections(std::string_view text) {
  std::vector<RockDetection> out;
  for (const auto& row : detail::ReadRecords(text, kDetectionsFile)) {
    const int id = detail::AsId(row[0], kDetectionsFile);
    if (row.size() == 3) {
      out.push_back({id, {row[1], row[2]}});
    } else if (row.size() == 5) {
      if (row[3] < row[1] || row[4] < row[2]) {
        throw Error(ErrorCode::kParse, "rover_detections: box max below min");
      }
      out.push_back({id, {0.5 * (row[1] + row[3]), 0.5 * (row[2] + row[4])}});
    } else {
      throw Error(ErrorCode::kParse, "rover_detections: expected id x y or id xmin ymin xmax ymax");
    }
  }
  return out;
}

inline std::string FormatStereoMatches(std::span<const FeatureMatch> matches) {
  std::string s = "# xL yL xR yR (px)\n";
  for (const auto& m : matches) {
    s += detail::Join({m.left.x, m.left.y, m.right.x, m.right.y}) + '\n';
  }
  return s;
}

inline std::vector<FeatureMatch> ParseStereoMatches(std::string_view text) {
  std::vector<FeatureMatch> out;
  for (const auto& row : detail::ReadRecords(text, kStereoMatchesFile)) {
    if (row.size() != 4) throw Error(ErrorCode::kParse, "stereo_matches: expected xL yL xR yR");
    out.push_back({{row[0], row[1]}, {row[2], row[3]}});
  }
  return out;
}

// ---- JSON helpers -------------------------------------------------------

inline Json ToJson(const Point2& p) { return Json::array({p.x, p.y}); }
inline Json ToJson(const Point3& p) { return Json::array({p.x, p.y, p.z}); }

inline Json ToJson(const Pose& pose) {
  const auto& q = pose.rotation;
  return {{"rotation_wxyz", Json::array({q.w, q.x, q.y, q.z})},
          {"position", ToJson(pose.position)}};
}

namespace detail {

template <typename T>
void Optional(const Json& j, const std::string& key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kParse, "field '" + key + "' has the wrong type");
  }
}

inline Point2 ReadPoint2(const Json& j, const std::string& key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != 2) {
    throw Error(ErrorCode::kParse, "field '" + key + "' must be [x, y]");
  }
  return {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

inline Point3 ReadPoint3(const Json& j, const std::string& key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != 3) {
    throw Error(ErrorCode::kParse, "field '" + key + "' must be [x, y, z]");
  }
  return {(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>()};
}

inline Json ParseJson(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

inline std::string Dump(const Json& j) { return j.dump(2) + '\n'; }

// ---- rig ----------------------------------------------------------------

inline Json ToJson(const StereoRig& rig) {
  return {{"focal_length_px", rig.focal_length},
          {"principal_point_px", ToJson(rig.principal_point)},
          {"baseline_m", rig.baseline},
          {"width_px", rig.width},
          {"height_px", rig.height}};
}

inline StereoRig RigFromJson(const Json& j) {
  StereoRig rig;
  detail::Optional(j, "focal_length_px", rig.focal_length);
  if (j.contains("principal_point_px")) rig.principal_point = detail::ReadPoint2(j, "principal_point_px");
  detail::Optional(j, "baseline_m", rig.baseline);
  detail::Optional(j, "width_px", rig.width);
  detail::Optional(j, "height_px", rig.height);
  return rig;
}

// ---- scene config -------------------------------------------------------

inline Json ToJson(const SceneConfig& c) {
  Json terrain = {{"kind", c.terrain.kind == Terrain::Kind::kPlane ? "plane" : "gentle_relief"}};
  if (c.terrain.kind == Terrain::Kind::kGentleRelief) {
    terrain["amplitude_m"] = c.terrain.amplitude;
    terrain["wavelength_m"] = c.terrain.wavelength;
  }
  return {{"field_extent_m", ToJson(c.field_extent)},
          {"rock_count", c.rock_count},
          {"terrain", terrain},
          {"rover",
           {{"position_m", ToJson(c.rover.position)},
            {"heading_deg", JsonDegrees(c.rover.heading)},
            {"tilt_deg", JsonDegrees(c.rover.tilt)}}},
          {"rig", ToJson(c.rig)},
          {"pixel_noise_sigma_px", c.pixel_noise_sigma},
          {"uav_noise_sigma_m", c.uav_noise_sigma},
          {"outlier_fraction", c.outlier_fraction},
          {"rng_seed", c.rng_seed},
          {"world_offset_m", ToJson(c.world_offset)},
          {"min_rock_separation_m", c.min_rock_separation},
          {"feature_spacing_px", c.feature_spacing},
          {"feature_max_range_m", c.feature_max_range},
          {"outlier_max_range_m", c.outlier_max_range}};
}

// Missing fields keep their defaults. `"large_offset": true` sets the world
// offset to (900000, 3469000) m unless world_offset_m is given.
inline SceneConfig SceneConfigFromJson(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "scene config must be an object");
  SceneConfig c;
  if (j.contains("field_extent_m")) c.field_extent = detail::ReadPoint2(j, "field_extent_m");
  detail::Optional(j, "rock_count", c.rock_count);
  if (const auto t = j.find("terrain"); t != j.end()) {
    std::string kind = "plane";
    detail::Optional(*t, "kind", kind);
    if (kind == "plane") {
      c.terrain.kind = Terrain::Kind::kPlane;
    } else if (kind == "gentle_relief") {
      c.terrain.kind = Terrain::Kind::kGentleRelief;
      detail::Optional(*t, "amplitude_m", c.terrain.amplitude);
      detail::Optional(*t, "wavelength_m", c.terrain.wavelength);
    } else {
      throw Error(ErrorCode::kParse, "unknown terrain kind '" + kind + "'");
    }
  }
  if (const auto r = j.find("rover"); r != j.end()) {
    if (r->contains("position_m")) c.rover.position = detail::ReadPoint3(*r, "position_m");
    double heading = RadToDeg(c.rover.heading), tilt = RadToDeg(c.rover.tilt);
    detail::Optional(*r, "heading_deg", heading);
    detail::Optional(*r, "tilt_deg", tilt);
    c.rover.heading = DegToRad(heading);
    c.rover.tilt = DegToRad(tilt);
  }
  if (const auto r = j.find("rig"); r != j.end()) c.rig = RigFromJson(*r);
  detail::Optional(j, "pixel_noise_sigma_px", c.pixel_noise_sigma);
  detail::Optional(j, "uav_noise_sigma_m", c.uav_noise_sigma);
  detail::Optional(j, "outlier_fraction", c.outlier_fraction);
  detail::Optional(j, "rng_seed", c.rng_seed);
  bool large = false;
  detail::Optional(j, "large_offset", large);
  if (large) c.world_offset = {kLargeOffsetX, kLargeOffsetY};
  if (j.contains("world_offset_m")) c.world_offset = detail::ReadPoint2(j, "world_offset_m");
  detail::Optional(j, "min_rock_separation_m", c.min_rock_separation);
  detail::Optional(j, "feature_spacing_px", c.feature_spacing);
  detail::Optional(j, "feature_max_range_m", c.feature_max_range);
  detail::Optional(j, "outlier_max_range_m", c.outlier_max_range);
  c.Validate();
  return c;
}

// ---- pipeline config ----------------------------------------------------

inline Json ToJson(const PipelineConfig& c) {
  return {{"rig", ToJson(c.rig)},
          {"camera_tilt_deg", JsonDegrees(c.camera_tilt)},
          {"max_range_m", c.max_range},
          {"min_disparity_px", c.min_disparity},
          {"match",
           {{"iterations", c.match.iterations},
            {"inlier_threshold_m", c.match.inlier_threshold},
            {"min_inliers", c.match.min_inliers},
            {"rng_seed", c.match.rng_seed},
            {"anisotropy_bound", c.match.anisotropy_bound},
            {"shape_tolerance", c.match.shape_tolerance},
            {"threads", c.match.threads}}},
          {"resection",
           {{"tolerance", c.resection.tolerance},
            {"max_iterations", c.resection.max_iterations}}}};
}

inline PipelineConfig PipelineConfigFromJson(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "pipeline config must be an object");
  PipelineConfig c;
  if (const auto r = j.find("rig"); r != j.end()) c.rig = RigFromJson(*r);
  double tilt = RadToDeg(c.camera_tilt);
  detail::Optional(j, "camera_tilt_deg", tilt);
  c.camera_tilt = DegToRad(tilt);
  detail::Optional(j, "max_range_m", c.max_range);
  detail::Optional(j, "min_disparity_px", c.min_disparity);
  if (const auto m = j.find("match"); m != j.end()) {
    detail::Optional(*m, "iterations", c.match.iterations);
    detail::Optional(*m, "inlier_threshold_m", c.match.inlier_threshold);
    detail::Optional(*m, "min_inliers", c.match.min_inliers);
    detail::Optional(*m, "rng_seed", c.match.rng_seed);
    detail::Optional(*m, "anisotropy_bound", c.match.anisotropy_bound);
    detail::Optional(*m, "shape_tolerance", c.match.shape_tolerance);
    detail::Optional(*m, "threads", c.match.threads);
  }
  if (const auto r = j.find("resection"); r != j.end()) {
    detail::Optional(*r, "tolerance", c.resection.tolerance);
    detail::Optional(*r, "max_iterations", c.resection.max_iterations);
  }
  c.Validate();
  return c;
}

// ---- truth --------------------------------------------------------------

inline Json TruthToJson(const Scene& scene) {
  const GroundTruth& t = scene.truth;
  Json rocks = Json::array();
  for (std::size_t i = 0; i < t.rock_world.size(); ++i) {
    rocks.push_back({{"world", ToJson(t.rock_world[i])}, {"visible", static_cast<bool>(t.visible[i])}});
  }
  Json corr = Json::array();
  for (const auto& c : t.correspondences) {
    corr.push_back({{"detection_id", c.detection_id}, {"uav_id", c.uav_id}, {"rock", c.rock}});
  }
  return {{"frame", "world"},
          {"planar_position", ToJson(t.PlanarPosition())},
          {"rover_pose", ToJson(t.rover_pose)},
          {"camera_tilt_deg", JsonDegrees(t.tilt)},
          {"rocks", rocks},
          {"correspondences", corr},
          {"outlier_detection_ids", t.outlier_detection_ids},
          {"outlier_uav_ids", t.outlier_uav_ids}};
}

// ---- result -------------------------------------------------------------

struct Provenance {
  std::string uav_rocks_sha256;
  std::string detections_sha256;
  std::string stereo_matches_sha256;
  std::string config_sha256;
  std::uint64_t seed = 0;
};

inline Json ResultToJson(const LocalizationResult& r, const Provenance& p) {
  const auto& a = r.match.transform;
  Json ids = Json::array();
  for (const auto& c : r.matched_ids) ids.push_back({{"detection_id", c.detection_id}, {"uav_id", c.uav_id}});
  Json rover = Json::array(), uav = Json::array();
  for (const auto& q : r.rover_set.points) rover.push_back(ToJson(q));
  for (const auto& q : r.uav_set.points) uav.push_back(ToJson(q));
  return {{"frame", "world"},
          {"planar_position", ToJson(r.planar_position)},
          {"pose", ToJson(r.pose)},
          {"intersection",
           {{"detections", r.intersection.detections},
            {"located", r.intersection.located},
            {"outside_hull", r.intersection.outside_hull},
            {"degenerate_triangle", r.intersection.degenerate_triangle},
            {"bad_disparity", r.intersection.bad_disparity},
            {"dropped_far", r.intersection.dropped_far}}},
          {"match",
           {{"affine", Json::array({a.a1, a.b1, a.c1, a.a2, a.b2, a.c2})},
            {"inlier_count", r.match.inlier_count},
            {"residual_m", r.match.residual},
            {"trial", r.match.trial},
            {"correspondences", ids},
            {"rover_ground_points", rover},
            {"uav_points", uav}}},
          {"resection",
           {{"iterations", r.resection.iterations},
            {"converged", r.resection.converged},
            {"loss_trace", r.resection.loss_trace}}},
          {"provenance",
           {{"uav_rocks_sha256", p.uav_rocks_sha256},
            {"rover_detections_sha256", p.detections_sha256},
            {"stereo_matches_sha256", p.stereo_matches_sha256},
            {"config_sha256", p.config_sha256},
            {"seed", p.seed}}}};
}

// Reads the "frame" and "planar_position" of a result or truth document.
struct FramedPosition {
  std::string frame;
  Point2 planar_position;
};

inline FramedPosition FramedPositionFromJson(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "document must be an object");
  FramedPosition f;
  detail::Optional(j, "frame", f.frame);
  if (f.frame.empty()) throw Error(ErrorCode::kParse, "missing field 'frame'");
  f.planar_position = detail::ReadPoint2(j, "planar_position");
  return f;
}

}  // namespace roverloc
