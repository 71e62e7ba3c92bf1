#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "roverloc/resection.hpp"

namespace roverloc {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<RayObservation> Observe(const Eigen::Matrix3d& m, const Eigen::Vector3d& rs,
                                    const std::vector<Eigen::Vector3d>& world) {
  std::vector<RayObservation> obs;
  const StereoRig rig;
  for (const auto& w : world) {
    const Eigen::Vector3d c = m * (w - rs);
    const Point2 px{rig.principal_point.x + rig.focal_length * c.x() / c.z(),
                    rig.principal_point.y + rig.focal_length * c.y() / c.z()};
    obs.push_back({px, ToPoint3(c.normalized()), ToPoint3(w)});
  }
  return obs;
}

// Points in front of a camera with rotation m at rs, 4-14 m away.
std::vector<Eigen::Vector3d> PointsInView(std::mt19937_64& rng, const Eigen::Matrix3d& m,
                                          const Eigen::Vector3d& rs, int n) {
  std::uniform_real_distribution<double> ux(-0.5, 0.5), uz(4, 14);
  std::vector<Eigen::Vector3d> w;
  for (int i = 0; i < n; ++i) {
    const double z = uz(rng);
    const Eigen::Vector3d c(ux(rng) * z, 0.6 * ux(rng) * z, z);
    w.push_back(m.transpose() * c + rs);
  }
  return w;
}

std::vector<Eigen::Vector3d> Rays(std::span<const RayObservation> obs) {
  std::vector<Eigen::Vector3d> r;
  for (const auto& o : obs) r.push_back(ToEigen(o.direction));
  return r;
}

std::vector<Eigen::Vector3d> Worlds(std::span<const RayObservation> obs) {
  std::vector<Eigen::Vector3d> r;
  for (const auto& o : obs) r.push_back(ToEigen(o.world_point));
  return r;
}

void ExpectNonIncreasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12) << i;
}

TEST(PixelToRay, Cases) {
  const StereoRig rig;
  const Point3 a = PixelToRay(rig, rig.principal_point);
  EXPECT_EQ(a.x, 0.0);
  EXPECT_EQ(a.z, 1.0);
  const Point3 b = PixelToRay(rig, {rig.principal_point.x + 1000, rig.principal_point.y});
  EXPECT_NEAR(b.x, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(b.z, std::sqrt(0.5), 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1279);
  for (int i = 0; i < 1000; ++i) EXPECT_NEAR(Norm(PixelToRay(rig, {u(rng), u(rng) * 0.5})), 1.0, 1e-12);
}

TEST(Loss, ExactDataIsZeroAndOffsetGivesUnit) {
  std::mt19937_64 rng(2);
  const Eigen::Matrix3d m = oracle::RandomRotation(rng);
  const Eigen::Vector3d rs(1, 2, 3);
  const auto obs = Observe(m, rs, PointsInView(rng, m, rs, 8));
  EXPECT_LT(Loss(RotationMatrix(m), ToPoint3(rs), obs), 1e-18);

  const std::vector<RayObservation> one{{{640, 360}, {0, 0, 1}, {0, 0, 5}}};
  EXPECT_NEAR(Loss(RotationMatrix(), {1, 0, 0}, one), 1.0, 1e-15);
}

TEST(Loss, GramFormAgreesForOrthogonalM) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d m = oracle::RandomRotation(rng);
    const Eigen::Vector3d rs = Eigen::Vector3d::Random();
    const auto obs = Observe(oracle::RandomRotation(rng), rs, PointsInView(rng, m, rs, 6));
    const double a = Loss(RotationMatrix(m), {0.3, -0.2, 0.1}, obs);
    const double b = LossGramForm(m, {0.3, -0.2, 0.1}, obs);
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, a));
    EXPECT_GE(a, 0.0);
  }
}

TEST(PositionUpdate, ExactForTrueRotation) {
  std::mt19937_64 rng(4);
  const Eigen::Matrix3d m = oracle::RandomRotation(rng);
  const Eigen::Vector3d rs(-3, 8, 1.5);
  const auto obs = Observe(m, rs, PointsInView(rng, m, rs, 7));
  EXPECT_LT((ToEigen(PositionUpdate(RotationMatrix(m), obs)) - rs).norm(), 1e-9);
}

TEST(PositionUpdate, MatchesNelderMeadOracle) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 0.3);
  for (int k = 0; k < 5; ++k) {
    const Eigen::Matrix3d truth = oracle::RandomRotation(rng);
    const Eigen::Vector3d rs(n(rng), n(rng), n(rng));
    auto obs = Observe(truth, rs, PointsInView(rng, truth, rs, 5));
    for (auto& o : obs) {
      o.world_point = o.world_point + Point3{n(rng), n(rng), n(rng)};
    }
    const auto rays = Rays(obs);
    const auto world = Worlds(obs);
    const Eigen::Matrix3d fixed = Eigen::Matrix3d::Identity();
    const Eigen::Vector3d want = oracle::NelderMead(
        [&](const Eigen::Vector3d& p) { return oracle::RayLoss(fixed, p, rays, world); },
        Eigen::Vector3d::Zero());
    const Eigen::Vector3d got = ToEigen(PositionUpdate(RotationMatrix(fixed), obs));
    EXPECT_LT((got - want).norm(), 1e-6);
  }
}

TEST(PositionUpdate, StationaryAndLocallyMinimal) {
  std::mt19937_64 rng(6);
  const Eigen::Matrix3d m = oracle::RandomRotation(rng);
  const Eigen::Vector3d rs(1, 1, 1);
  auto obs = Observe(oracle::RandomRotation(rng), rs, PointsInView(rng, m, rs, 9));
  const RotationMatrix rm(m);
  const Point3 p = PositionUpdate(rm, obs);
  const double e0 = Loss(rm, p, obs);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d d(n(rng), n(rng), n(rng));
    d = 1e-4 * d.normalized();
    EXPECT_GE(Loss(rm, ToPoint3(ToEigen(p) + d), obs), e0);
  }
  // Central-difference gradient.
  const double h = 1e-5;
  Eigen::Vector3d g;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    d(k) = h;
    g(k) = (Loss(rm, ToPoint3(ToEigen(p) + d), obs) - Loss(rm, ToPoint3(ToEigen(p) - d), obs)) / (2 * h);
  }
  EXPECT_LT(g.norm(), 1e-8 * std::max(1.0, e0));
}

TEST(PositionUpdate, ParallelRaysAreSingular) {
  std::vector<RayObservation> obs;
  for (int i = 0; i < 5; ++i) obs.push_back({{640, 360}, {0, 0, 1}, {double(i), 0.5 * i, 5.0 + i}});
  try {
    PositionUpdate(RotationMatrix(), obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularNormalMatrix);
  }
}

TEST(AbsoluteOrientation, AgreesWithKabsch) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  for (int k = 0; k < 50; ++k) {
    std::vector<Eigen::Vector3d> a, b;
    const Eigen::Matrix3d r = oracle::RandomRotation(rng);
    for (int i = 0; i < 8; ++i) {
      a.emplace_back(n(rng), n(rng), n(rng));
      b.push_back(r * a.back() + 0.1 * Eigen::Vector3d(n(rng), n(rng), n(rng)));
    }
    const Eigen::Matrix3d got = AbsoluteOrientation(a, b).matrix();
    EXPECT_LT((got - oracle::Kabsch(a, b)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RotationUpdate, IdentityFixedPointAndNeverIncreases) {
  std::mt19937_64 rng(8);
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  const Eigen::Vector3d rs(0.5, -1, 2);
  const auto obs = Observe(id, rs, PointsInView(rng, id, rs, 6));
  const RotationMatrix r = RotationUpdate(ToPoint3(rs), obs, RotationMatrix());
  EXPECT_LT((r.matrix() - id).cwiseAbs().maxCoeff(), 1e-9);

  for (int k = 0; k < 50; ++k) {
    const Eigen::Matrix3d truth = oracle::RandomRotation(rng);
    const auto o = Observe(truth, rs, PointsInView(rng, truth, rs, 7));
    const RotationMatrix start(oracle::RandomRotation(rng));
    const Point3 p = ToPoint3(rs + Eigen::Vector3d::Random());
    const RotationMatrix next = RotationUpdate(p, o, start);
    EXPECT_LE(Loss(next, p, o), Loss(start, p, o) + 1e-12);
    const Eigen::Matrix3d& nm = next.matrix();
    EXPECT_LT((nm.transpose() * nm - id).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(nm.determinant(), 1.0, 1e-9);
  }
}

TEST(Resect, CameraAtOrigin) {
  std::mt19937_64 rng(9);
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  const auto obs = Observe(id, Eigen::Vector3d::Zero(), PointsInView(rng, id, Eigen::Vector3d::Zero(), 6));
  const ResectionReport r = Resect(obs);
  EXPECT_LT(Norm(r.pose.position), 1e-9);
  EXPECT_TRUE(r.converged);
  ExpectNonIncreasing(r.loss_trace);
}

TEST(Resect, RecoversPoseAboutVertical) {
  // Camera looking along world +X, yawed 10 degrees, at (2, 1, 0.5).
  const double yaw = 10 * kPi / 180;
  Eigen::Matrix3d look;
  look << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  const Eigen::Matrix3d m = look * Eigen::AngleAxisd(-yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d rs(2, 1, 0.5);
  std::mt19937_64 rng(10);
  const auto obs = Observe(m, rs, PointsInView(rng, m, rs, 10));
  const ResectionReport r = Resect(obs);
  EXPECT_LT((ToEigen(r.pose.position) - rs).norm(), 1e-6);
  EXPECT_LT(AngularDistance(r.pose.rotation, MatrixToQuat(RotationMatrix(m))), 1e-6);
  EXPECT_NEAR(r.planar_position.x, 2.0, 1e-6);
  EXPECT_NEAR(r.planar_position.y, 1.0, 1e-6);
  ExpectNonIncreasing(r.loss_trace);
}

TEST(Resect, RecoversKnownRotation) {
  const Eigen::Matrix3d m = Eigen::AngleAxisd(25 * kPi / 180, Eigen::Vector3d(1, 2, 0.5).normalized()).toRotationMatrix();
  const Eigen::Vector3d rs(-4, 3, 1);
  std::mt19937_64 rng(11);
  const ResectionReport r = Resect(Observe(m, rs, PointsInView(rng, m, rs, 8)));
  EXPECT_LT((QuatToMatrix(r.pose.rotation).matrix() - m).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Resect, RandomPosesAreRecoveredWithMonotoneTrace) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Matrix3d m = oracle::RandomRotation(rng);
    const Eigen::Vector3d rs(u(rng), u(rng), u(rng));
    const auto obs = Observe(m, rs, PointsInView(rng, m, rs, 4 + k % 10));
    const ResectionReport r = Resect(obs);
    EXPECT_LT((ToEigen(r.pose.position) - rs).norm(), 1e-6) << k;
    EXPECT_LT(r.loss_trace.back(), 1e-15) << k;
    EXPECT_TRUE(r.converged) << k;
    ExpectNonIncreasing(r.loss_trace);
  }
}

TEST(Resect, NoisyPixelsMedianPlanarError) {
  // sigma 0.5 px at f = 1000 and about 10 m range.
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0, 0.5);
  const StereoRig rig;
  Eigen::Matrix3d look;
  look << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  std::vector<double> err;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d rs(0, 0, 1.5);
    std::vector<Eigen::Vector3d> world;
    std::uniform_real_distribution<double> ux(-4, 4), uy(8, 12);
    for (int i = 0; i < 10; ++i) world.emplace_back(uy(rng), ux(rng), 0.0);
    std::vector<RayObservation> obs;
    for (const auto& w : world) {
      const Eigen::Vector3d c = look * (w - rs);
      const Point2 px{rig.principal_point.x + rig.focal_length * c.x() / c.z() + noise(rng),
                      rig.principal_point.y + rig.focal_length * c.y() / c.z() + noise(rng)};
      obs.push_back(MakeRayObservation(rig, px, ToPoint3(w)));
    }
    const ResectionReport r = Resect(obs);
    ExpectNonIncreasing(r.loss_trace);
    err.push_back(std::hypot(r.planar_position.x - rs.x(), r.planar_position.y - rs.y()));
  }
  std::nth_element(err.begin(), err.begin() + 50, err.end());
  EXPECT_LT(err[50], 0.05);
}

TEST(Resect, GaugeTranslation) {
  std::mt19937_64 rng(14);
  const Eigen::Matrix3d m = oracle::RandomRotation(rng);
  const Eigen::Vector3d rs(1, 2, 3);
  auto obs = Observe(m, rs, PointsInView(rng, m, rs, 8));
  std::normal_distribution<double> n(0, 0.01);
  for (auto& o : obs) o.world_point = o.world_point + Point3{n(rng), n(rng), n(rng)};
  const ResectionReport a = Resect(obs);
  const Point3 t{123.25, -47.5, 8.0};
  for (auto& o : obs) o.world_point = o.world_point + t;
  const ResectionReport b = Resect(obs);
  EXPECT_LT(Distance(b.pose.position, a.pose.position + t), 1e-9);
  EXPECT_LT(AngularDistance(a.pose.rotation, b.pose.rotation), 1e-9);
}

TEST(Resect, TooFewObservations) {
  const std::vector<RayObservation> obs{{{0, 0}, {0, 0, 1}, {0, 0, 1}}, {{0, 0}, {0, 0.6, 0.8}, {0, 1, 1}}};
  EXPECT_THROW(Resect(obs), Error);
}

}  // namespace
}  // namespace roverloc
