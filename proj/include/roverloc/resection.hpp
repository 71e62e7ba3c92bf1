#pragma once

// Space resection by orthogonal projection onto observation rays.
//
// Each observation pairs a unit ray v_i (camera frame) with a world point r_i.
// With V_i = v_i v_iᵀ the object-space residual of r_i under the pose
// (M, r_s) is (I - V_i) M (r_i - r_s), and the pose minimizes
//
//   E(M, r_s) = sum_i |(I - V_i) M (r_i - r_s)|².
//
// For fixed M the optimal position is closed form,
//
//   r_s(M) = (sum_i Mᵀ H_i M)^-1 sum_i Mᵀ H_i M r_i,   H_i = (I - V_i)ᵀ(I - V_i),
//
// and for fixed r_s the rotation is improved by an absolute-orientation
// (quaternion eigenvector) solve that aligns r_i - r_s with the current
// projections of M (r_i - r_s) onto their rays. Alternating the two never
// increases E. No initial pose is required: a fixed set of starting
// rotations (a centroid alignment of world points with rays, plus the 24
// axis-aligned rotations) is warmed up and the best basin is kept.

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "roverloc/error.hpp"
#include "roverloc/geometry.hpp"
#include "roverloc/stereo.hpp"

namespace roverloc {

struct RayObservation {
  Point2 pixel;
  Point3 direction;  // unit, camera frame, z > 0
  Point3 world_point;
};

// rotation maps world vectors into the camera frame: p_cam = M (p_world - position).
struct Pose {
  UnitQuaternion rotation;
  Point3 position;

  Point3 ToCamera(const Point3& world) const {
    return QuatToMatrix(rotation) * (world - position);
  }
};

struct ResectionReport {
  Pose pose;
  std::vector<double> loss_trace;
  int iterations = 0;
  bool converged = false;
  Point2 planar_position;
};

struct ResectionOptions {
  double tolerance = 1e-12;  // relative loss change
  int max_iterations = 200;
};

inline Point3 PixelToRay(const StereoRig& rig, const Point2& pixel) {
  const Eigen::Vector3d v((pixel.x - rig.principal_point.x) / rig.focal_length,
                          (pixel.y - rig.principal_point.y) / rig.focal_length, 1.0);
  return ToPoint3(v.normalized());
}

inline RayObservation MakeRayObservation(const StereoRig& rig, const Point2& pixel,
                                         const Point3& world) {
  return {pixel, PixelToRay(rig, pixel), world};
}

inline double Loss(const RotationMatrix& m, const Point3& position,
                   std::span<const RayObservation> obs) {
  const Eigen::Matrix3d& mm = m.matrix();
  const Eigen::Vector3d rs = ToEigen(position);
  double e = 0.0;
  for (const auto& o : obs) {
    const Eigen::Matrix3d off_ray =
        Eigen::Matrix3d::Identity() - ProjectionMatrix(o.direction).matrix();
    e += (off_ray * mm * (ToEigen(o.world_point) - rs)).squaredNorm();
  }
  return e;
}

// Same loss with the Gram matrix MᵀM kept in place of I. Agrees with Loss()
// for orthogonal M; accepts any 3x3 matrix.
inline double LossGramForm(const Eigen::Matrix3d& m, const Point3& position,
                           std::span<const RayObservation> obs) {
  const Eigen::Matrix3d gram = m.transpose() * m;
  const Eigen::Vector3d rs = ToEigen(position);
  double e = 0.0;
  for (const auto& o : obs) {
    const Eigen::Matrix3d a = gram - ProjectionMatrix(o.direction).matrix();
    e += (a * m * (ToEigen(o.world_point) - rs)).squaredNorm();
  }
  return e;
}

// Closed-form minimizer of E over the position for fixed rotation. Sums are
// accumulated about the world-point centroid. Throws SingularNormalMatrix
// when the normal matrix is (numerically) rank deficient.
inline Point3 PositionUpdate(const RotationMatrix& m, std::span<const RayObservation> obs) {
  if (obs.empty()) throw Error(ErrorCode::kSingularNormalMatrix, "no observations");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& o : obs) centroid += ToEigen(o.world_point);
  centroid /= static_cast<double>(obs.size());

  const Eigen::Matrix3d& mm = m.matrix();
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const auto& o : obs) {
    const Eigen::Matrix3d off_ray =
        Eigen::Matrix3d::Identity() - ProjectionMatrix(o.direction).matrix();
    const Eigen::Matrix3d h = off_ray.transpose() * off_ray;
    const Eigen::Matrix3d a = mm.transpose() * h * mm;
    normal += a;
    rhs += a * (ToEigen(o.world_point) - centroid);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
  const auto& ev = eig.eigenvalues();
  if (!(ev(2) > 0) || ev(0) <= 1e-10 * ev(2)) {
    throw Error(ErrorCode::kSingularNormalMatrix, "rays and points are in a degenerate configuration");
  }
  const Eigen::Vector3d offset = eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
  return ToPoint3(centroid + offset);
}

// Rotation R maximizing sum_i targets_iᵀ R sources_i (Horn's quaternion
// method). Throws DegenerateConfiguration when the cross-covariance has rank < 2.
inline RotationMatrix AbsoluteOrientation(std::span<const Eigen::Vector3d> sources,
                                          std::span<const Eigen::Vector3d> targets) {
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < sources.size(); ++i) s += sources[i] * targets[i].transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(s);
  const auto sv = svd.singularValues();
  if (!(sv(0) > 0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "cross-covariance is rank deficient");
  }
  Eigen::Matrix4d n;
  n << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);
  return QuatToMatrix(UnitQuaternion(q(0), q(1), q(2), q(3)));
}

// One rotation half-step for fixed position: absolute orientation between
// r_i - r_s and V_i M_current (r_i - r_s). Never increases E.
inline RotationMatrix RotationUpdate(const Point3& position, std::span<const RayObservation> obs,
                                     const RotationMatrix& current) {
  if (obs.size() < 3) {
    throw Error(ErrorCode::kDegenerateConfiguration, "rotation update needs >= 3 observations");
  }
  std::vector<Eigen::Vector3d> src, dst;
  src.reserve(obs.size());
  dst.reserve(obs.size());
  const Eigen::Vector3d rs = ToEigen(position);
  for (const auto& o : obs) {
    const Eigen::Vector3d p = ToEigen(o.world_point) - rs;
    src.push_back(p);
    dst.push_back(ProjectionMatrix(o.direction).matrix() * (current.matrix() * p));
  }
  return AbsoluteOrientation(src, dst);
}

// Data-driven start: align centroid-centered world points with
// centroid-centered ray directions.
inline RotationMatrix InitialRotation(std::span<const RayObservation> obs) {
  Eigen::Vector3d wc = Eigen::Vector3d::Zero(), vc = Eigen::Vector3d::Zero();
  for (const auto& o : obs) {
    wc += ToEigen(o.world_point);
    vc += ToEigen(o.direction);
  }
  wc /= static_cast<double>(obs.size());
  vc /= static_cast<double>(obs.size());
  std::vector<Eigen::Vector3d> src, dst;
  for (const auto& o : obs) {
    src.push_back(ToEigen(o.world_point) - wc);
    dst.push_back(ToEigen(o.direction) - vc);
  }
  return AbsoluteOrientation(src, dst);
}

namespace detail {

inline std::size_t PointsBehind(const RotationMatrix& m, const Point3& rs,
                                std::span<const RayObservation> obs) {
  std::size_t behind = 0;
  for (const auto& o : obs) behind += (m * (o.world_point - rs)).z <= 0 ? 1 : 0;
  return behind;
}

// Joint Gauss-Newton step on (rotation, position) for the residuals
// (I - V_i) M (r_i - r_s), followed by the exact position update. Applied
// only when it lowers E; returns whether it was applied.
inline bool GaussNewtonStep(RotationMatrix& m, Point3& rs, double& e,
                            std::span<const RayObservation> obs) {
  Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> jte = Eigen::Matrix<double, 6, 1>::Zero();
  for (const auto& o : obs) {
    const Eigen::Matrix3d off_ray =
        Eigen::Matrix3d::Identity() - ProjectionMatrix(o.direction).matrix();
    const Eigen::Vector3d pc = m.matrix() * (ToEigen(o.world_point) - ToEigen(rs));
    Eigen::Matrix3d skew;
    skew << 0, -pc.z(), pc.y(), pc.z(), 0, -pc.x(), -pc.y(), pc.x(), 0;
    Eigen::Matrix<double, 3, 6> j;
    j.leftCols<3>() = -off_ray * skew;
    j.rightCols<3>() = -off_ray * m.matrix();
    const Eigen::Vector3d r = off_ray * pc;
    jtj += j.transpose() * j;
    jte += j.transpose() * r;
  }
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(jtj);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::Matrix<double, 6, 1> step = -ldlt.solve(jte);
  if (!step.allFinite()) return false;
  const Eigen::Vector3d w = step.head<3>();
  const double angle = w.norm();
  if (!(angle > 0)) return false;
  const RotationMatrix m_try(Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() * m.matrix());
  const Point3 rs_try = PositionUpdate(m_try, obs);
  const double e_try = Loss(m_try, rs_try, obs);
  if (!(e_try < e)) return false;
  m = m_try;
  rs = rs_try;
  e = e_try;
  return true;
}

// One outer iteration: rotation half-step, position half-step, then a
// Gauss-Newton correction when it helps. E never increases.
inline double Sweep(RotationMatrix& m, Point3& rs, std::span<const RayObservation> obs) {
  const double before = Loss(m, rs, obs);
  const RotationMatrix m_next = RotationUpdate(rs, obs, m);
  const Point3 rs_next = PositionUpdate(m_next, obs);
  double e = Loss(m_next, rs_next, obs);
  if (e <= before) {
    m = m_next;
    rs = rs_next;
  } else {
    e = before;
  }
  GaussNewtonStep(m, rs, e, obs);
  return e;
}

// Starting rotations: the centroid alignment first, then the 24 rotations
// mapping coordinate axes onto coordinate axes.
inline std::vector<RotationMatrix> StartingRotations(std::span<const RayObservation> obs) {
  std::vector<RotationMatrix> starts;
  try {
    starts.push_back(InitialRotation(obs));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
  }
  constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : kPerms) {
    for (int signs = 0; signs < 8; ++signs) {
      Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
      for (int r = 0; r < 3; ++r) m(r, p[r]) = ((signs >> r) & 1) ? -1.0 : 1.0;
      if (m.determinant() > 0) starts.emplace_back(m);
    }
  }
  return starts;
}

inline constexpr int kWarmupSweeps = 20;

}  // namespace detail

// Globally searched resection. Every starting rotation is iterated for a
// short warm-up; the run with the fewest points behind the camera, then the
// lowest E, is continued until the relative loss change drops below
// opts.tolerance (or E reaches the round-off floor). The loss trace is that
// run's full history. Non-convergence within opts.max_iterations is reported
// through `converged`, not thrown.
inline ResectionReport Resect(std::span<const RayObservation> obs,
                              const ResectionOptions& opts = {}) {
  if (obs.size() < 3) {
    throw Error(ErrorCode::kSingularNormalMatrix, "resection needs at least 3 observations");
  }
  double spread = 0.0;
  {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& o : obs) c += ToEigen(o.world_point);
    c /= static_cast<double>(obs.size());
    for (const auto& o : obs) spread += (ToEigen(o.world_point) - c).squaredNorm();
  }
  const double floor = 1e-28 * std::max(spread, 1.0);

  struct Run {
    RotationMatrix m;
    Point3 rs;
    std::vector<double> trace;
    std::size_t behind = 0;
    bool converged = false;
  };
  auto advance = [&](Run& run, int sweeps) {
    for (int k = 0; k < sweeps && !run.converged; ++k) {
      const double prev = run.trace.back();
      if (prev <= floor) {
        run.converged = true;
        break;
      }
      const double e = detail::Sweep(run.m, run.rs, obs);
      run.trace.push_back(e);
      if (prev - e <= opts.tolerance * prev) run.converged = true;
    }
  };

  std::optional<Run> best;
  for (const RotationMatrix& start : detail::StartingRotations(obs)) {
    Run run{start, PositionUpdate(start, obs), {}, 0, false};
    run.trace.push_back(Loss(run.m, run.rs, obs));
    try {
      advance(run, std::min(detail::kWarmupSweeps, opts.max_iterations));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
      continue;
    }
    run.behind = detail::PointsBehind(run.m, run.rs, obs);
    if (!best || std::tie(run.behind, run.trace.back()) < std::tie(best->behind, best->trace.back())) {
      best = std::move(run);
    }
  }
  if (!best) {
    throw Error(ErrorCode::kDegenerateConfiguration, "no starting rotation could be iterated");
  }
  const int done = static_cast<int>(best->trace.size()) - 1;
  advance(*best, opts.max_iterations - done);

  ResectionReport report;
  report.pose = {MatrixToQuat(best->m), best->rs};
  report.planar_position = {best->rs.x, best->rs.y};
  report.iterations = static_cast<int>(best->trace.size()) - 1;
  report.converged = best->converged;
  report.loss_trace = std::move(best->trace);
  return report;
}

}  // namespace roverloc
