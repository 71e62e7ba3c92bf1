#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "roverloc/delaunay.hpp"
#include "roverloc/simulator.hpp"
#include "roverloc/stereo.hpp"

namespace roverloc {
namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

std::vector<Point2> RandomPoints(std::uint64_t seed, int n, double extent = 100.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng));
  return pts;
}

double TotalArea(const Triangulation& t) {
  double a = 0.0;
  for (const auto& tri : t.triangles) {
    a += TriangleArea(t.vertices[tri[0]], t.vertices[tri[1]], t.vertices[tri[2]]);
  }
  return a;
}

TEST(Delaunay, SingleTriangle) {
  const std::vector<Point2> p{{0, 0}, {1, 0}, {0, 1}};
  const Triangulation t = Delaunay(p);
  ASSERT_EQ(t.triangles.size(), 1u);
  EXPECT_GT(Orient(p[t.triangles[0][0]], p[t.triangles[0][1]], p[t.triangles[0][2]]), 0);
}

TEST(Delaunay, SquareTieUsesLexSmallestCorner) {
  const std::vector<Point2> p{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Triangulation t = Delaunay(p);
  ASSERT_EQ(t.triangles.size(), 2u);
  // The shared diagonal touches (0,0), the lexicographically smallest corner.
  for (const auto& tri : t.triangles) {
    EXPECT_TRUE(tri[0] == 0 || tri[1] == 0 || tri[2] == 0);
  }
  EXPECT_NEAR(TotalArea(t), 1.0, 1e-15);
}

TEST(Delaunay, Errors) {
  EXPECT_EQ(CodeOf([] { Delaunay(std::vector<Point2>{{0, 0}, {1, 1}}); }), ErrorCode::kTooFewPoints);
  EXPECT_EQ(CodeOf([] { Delaunay(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}); }),
            ErrorCode::kAllCollinear);
  EXPECT_EQ(CodeOf([] { Delaunay(std::vector<Point2>{{0, 0}, {1, 0}, {0, 1}, {1e-10, 0}}); }),
            ErrorCode::kDuplicatePoints);
}

TEST(Delaunay, RandomSetsPassBruteForceChecks) {
  for (int seed = 0; seed < 30; ++seed) {
    const auto pts = RandomPoints(seed, 10 + 6 * seed);
    const Triangulation t = Delaunay(pts);
    EXPECT_EQ(oracle::CircumcircleViolations(t.triangles, pts), 0) << "seed " << seed;
    EXPECT_NEAR(TotalArea(t), oracle::ConvexHullArea(pts), 1e-7) << "seed " << seed;
    for (const auto& tri : t.triangles) {
      EXPECT_GT(Orient(pts[tri[0]], pts[tri[1]], pts[tri[2]]), 0);
    }
  }
}

TEST(Delaunay, GridWithManyCocircularQuads) {
  std::vector<Point2> pts;
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 9; ++j) pts.emplace_back(i * 3.0, j * 3.0);
  }
  const Triangulation t = Delaunay(pts);
  EXPECT_EQ(t.triangles.size(), 2u * 11 * 8);
  EXPECT_EQ(oracle::CircumcircleViolations(t.triangles, pts), 0);
  EXPECT_NEAR(TotalArea(t), 33.0 * 24.0, 1e-9);
}

TEST(Delaunay, AdjacencyIsSymmetric) {
  const auto pts = RandomPoints(99, 150);
  const Triangulation t = Delaunay(pts);
  std::size_t hull_edges = 0;
  for (std::size_t a = 0; a < t.triangles.size(); ++a) {
    for (int i = 0; i < 3; ++i) {
      const std::size_t b = t.neighbors[a][i];
      if (b == kNoTriangle) {
        ++hull_edges;
        continue;
      }
      EXPECT_NE(std::find(t.neighbors[b].begin(), t.neighbors[b].end(), a), t.neighbors[b].end());
    }
  }
  // Euler: T = 2n - h - 2.
  EXPECT_EQ(t.triangles.size(), 2 * pts.size() - hull_edges - 2);
}

TEST(Delaunay, DeterministicForSameInput) {
  const auto pts = RandomPoints(5, 120);
  const Triangulation a = Delaunay(pts), b = Delaunay(pts);
  EXPECT_EQ(a.triangles, b.triangles);
  EXPECT_EQ(a.neighbors, b.neighbors);
}

TEST(LocateTriangle, InteriorOutsideAndSharedEdge) {
  const std::vector<Point2> tri_pts{{0, 0}, {1, 0}, {0, 1}};
  EXPECT_EQ(LocateTriangle(Delaunay(tri_pts), {0.25, 0.25}), std::optional<std::size_t>(0));

  const std::vector<Point2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Triangulation t = Delaunay(sq);
  EXPECT_FALSE(LocateTriangle(t, {5, 5}).has_value());
  // (0.5, 0.5) lies on the shared diagonal.
  EXPECT_EQ(LocateTriangle(t, {0.5, 0.5}), std::optional<std::size_t>(0));
}

TEST(LocateTriangle, EveryInteriorPointIsContained) {
  const auto pts = RandomPoints(4, 80);
  const Triangulation t = Delaunay(pts);
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> u(0, 100);
  for (int i = 0; i < 2000; ++i) {
    const Point2 p{u(rng), u(rng)};
    const auto k = LocateTriangle(t, p);
    if (!k) continue;
    const auto& v = t.triangles[*k];
    const double area = TriangleArea(pts[v[0]], pts[v[1]], pts[v[2]]);
    const double s = TriangleArea(p, pts[v[1]], pts[v[2]]) + TriangleArea(pts[v[0]], p, pts[v[2]]) +
                     TriangleArea(pts[v[0]], pts[v[1]], p);
    EXPECT_NEAR(s, area, 1e-9 * std::max(1.0, area));
  }
}

std::vector<FeatureMatch> ShiftedMatches(double d) {
  std::vector<FeatureMatch> m;
  for (const auto& p : RandomPoints(13, 40, 600)) m.push_back({p, {p.x - d, p.y}});
  m.push_back({{0, 0}, {-d, 0}});
  m.push_back({{600, 0}, {600 - d, 0}});
  m.push_back({{0, 600}, {-d, 600}});
  m.push_back({{600, 600}, {600 - d, 600}});
  return m;
}

TEST(TransferPoint, PureShift) {
  const auto m = ShiftedMatches(37.5);
  const Triangulation t = BuildTransferMesh(m);
  const Point2 r = TransferPoint(t, m, {123.4, 321.0});
  EXPECT_NEAR(r.x, 123.4 - 37.5, 1e-9);
  EXPECT_NEAR(r.y, 321.0, 1e-9);
}

TEST(TransferPoint, AtVertexAndOutside) {
  const auto m = ShiftedMatches(10);
  const Triangulation t = BuildTransferMesh(m);
  EXPECT_LT(Distance(TransferPoint(t, m, m[7].left), m[7].right), 1e-9);
  EXPECT_EQ(CodeOf([&] { TransferPoint(t, m, {-5, 300}); }), ErrorCode::kOutsideHull);
}

TEST(TransferPoint, PlaneSeenByRigIsExact) {
  // Points of the plane z = 8 + 0.3 x - 0.2 y in the camera frame.
  const StereoRig rig;
  const Pose cam{};
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> ux(-3, 3), uy(-1.5, 1.5);
  auto on_plane = [](double x, double y) { return Point3{x, y, 8 + 0.3 * x - 0.2 * y}; };
  std::vector<FeatureMatch> m;
  for (int i = 0; i < 200; ++i) {
    if (auto s = ProjectRock(cam, rig, on_plane(ux(rng), uy(rng)))) m.push_back({s->left, s->right});
  }
  const Triangulation t = BuildTransferMesh(m);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const auto s = ProjectRock(cam, rig, on_plane(0.8 * ux(rng), 0.8 * uy(rng)));
    if (!s || !LocateTriangle(t, s->left)) continue;
    EXPECT_LT(Distance(TransferPoint(t, m, s->left), s->right), 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(ForwardIntersect, AnalyticCases) {
  const StereoRig rig;
  const Point3 a = ForwardIntersect(rig, {640, 360}, {590, 360});
  EXPECT_EQ(a.x, 0.0);
  EXPECT_EQ(a.y, 0.0);
  EXPECT_EQ(a.z, 10.0);
  const Point3 b = ForwardIntersect(rig, {740, 360}, {690, 360});
  EXPECT_NEAR(b.x, 1.0, 1e-15);
  EXPECT_EQ(b.z, 10.0);
}

TEST(ForwardIntersect, AveragesRowsAndRejectsSmallDisparity) {
  const StereoRig rig;
  EXPECT_NEAR(ForwardIntersect(rig, {640, 370}, {590, 350}).y, 0.0, 1e-15);
  EXPECT_EQ(CodeOf([&] { ForwardIntersect(rig, {640, 360}, {640, 360}); }),
            ErrorCode::kNonPositiveDisparity);
  EXPECT_EQ(CodeOf([&] { ForwardIntersect(rig, {640, 360}, {639.8, 360}); }),
            ErrorCode::kNonPositiveDisparity);
}

TEST(ForwardIntersect, DepthFallsAsDisparityGrows) {
  const StereoRig rig;
  double prev = INFINITY;
  for (double d = 1; d < 300; d += 0.5) {
    const double z = ForwardIntersect(rig, {700, 300}, {700 - d, 300}).z;
    EXPECT_LT(z, prev);
    prev = z;
  }
}

TEST(ForwardIntersect, RoundTripThroughProjection) {
  const StereoRig rig;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(-4, 4), uy(-2, 2), uz(2, 30);
  int n = 0;
  while (n < 1000) {
    const Point3 p{ux(rng), uy(rng), uz(rng)};
    const auto s = ProjectRock(Pose{}, rig, p);
    if (!s) continue;
    EXPECT_LT(Distance(ForwardIntersect(rig, s->left, s->right), p), 1e-9);
    ++n;
  }
}

TEST(GroundPlane, ZeroTiltDropsHeight) {
  std::vector<RockObservation> o(2);
  o[0].camera_point = {1, 0.2, 10};
  o[1].camera_point = {-2, 7.5, 5};
  const auto g = RocksToGroundPlane(o, 0.0);
  EXPECT_EQ(g[0], Point2(1, 10));
  EXPECT_EQ(g[1], Point2(-2, 5));
}

TEST(GroundPlane, TiltedCameraLayoutIsCongruentToWorld) {
  SceneConfig cfg;
  cfg.rng_seed = 3;
  const Scene s = GenerateScene(cfg);
  std::vector<RockObservation> obs;
  std::vector<Point2> world;
  for (const auto& c : s.truth.correspondences) {
    RockObservation o;
    o.camera_point = s.truth.rover_pose.ToCamera(s.truth.rock_world[c.rock]);
    obs.push_back(o);
    world.emplace_back(s.truth.rock_world[c.rock].x, s.truth.rock_world[c.rock].y);
  }
  const auto g = RocksToGroundPlane(obs, cfg.rover.tilt);
  ASSERT_GE(g.size(), 3u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      EXPECT_NEAR(Distance(g[i], g[j]), Distance(world[i], world[j]), 1e-9);
    }
  }
}

TEST(FilterNearRocks, KeepsWithinRange) {
  std::vector<RockObservation> o(3);
  o[0].camera_point = {0, 0, 5};
  o[1].camera_point = {0, 0, 12};
  o[2].camera_point = {0, 0, 22};
  const auto sel = FilterNearRocks(o, 15);
  ASSERT_EQ(sel.kept.size(), 2u);
  EXPECT_EQ(sel.kept[1].camera_point.z, 12);
  EXPECT_EQ(sel.dropped, 1u);
  EXPECT_TRUE(FilterNearRocks({}, 15).kept.empty());
  const auto none = FilterNearRocks(std::span(o).subspan(2), 15);
  EXPECT_TRUE(none.kept.empty());
  EXPECT_EQ(none.dropped, 1u);
}

}  // namespace
}  // namespace roverloc
