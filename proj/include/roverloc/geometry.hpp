#pragma once

// Value types and exact geometric primitives shared by every stage of the
// localization pipeline. Everything here is double precision: map
// coordinates may carry ~1e6 m offsets while the accuracy of interest is
// sub-decimeter.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>

#include "roverloc/error.hpp"

namespace roverloc {

namespace detail {

inline double RequireFinite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFinite, std::string(what) + " is not finite");
  }
  return v;
}

}  // namespace detail

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2() = default;
  Point2(double x_in, double y_in)
      : x(detail::RequireFinite(x_in, "Point2.x")),
        y(detail::RequireFinite(y_in, "Point2.y")) {}

  friend Point2 operator+(const Point2& a, const Point2& b) {
    return {a.x + b.x, a.y + b.y};
  }
  friend Point2 operator-(const Point2& a, const Point2& b) {
    return {a.x - b.x, a.y - b.y};
  }
  friend Point2 operator*(double s, const Point2& p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double Dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline double Cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double Norm(const Point2& p) { return std::hypot(p.x, p.y); }
inline double Distance(const Point2& a, const Point2& b) { return Norm(a - b); }

// Twice the signed area of (a, b, c); positive when counter-clockwise.
inline double Orient(const Point2& a, const Point2& b, const Point2& c) {
  return Cross(b - a, c - a);
}

inline double TriangleArea(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * std::abs(Orient(a, b, c));
}

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3() = default;
  Point3(double x_in, double y_in, double z_in)
      : x(detail::RequireFinite(x_in, "Point3.x")),
        y(detail::RequireFinite(y_in, "Point3.y")),
        z(detail::RequireFinite(z_in, "Point3.z")) {}

  friend Point3 operator+(const Point3& a, const Point3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Point3 operator-(const Point3& a, const Point3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Point3 operator*(double s, const Point3& p) {
    return {s * p.x, s * p.y, s * p.z};
  }
  friend bool operator==(const Point3&, const Point3&) = default;
};

inline double Norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }
inline double Distance(const Point3& a, const Point3& b) { return Norm(a - b); }

inline Eigen::Vector3d ToEigen(const Point3& p) { return {p.x, p.y, p.z}; }
inline Point3 ToPoint3(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

// Planar affine map
//   X = a1 x + b1 y + c1
//   Y = a2 x + b2 y + c2
struct Affine2 {
  double a1 = 1.0, b1 = 0.0, c1 = 0.0;
  double a2 = 0.0, b2 = 1.0, c2 = 0.0;

  static Affine2 Identity() { return {}; }

  double Determinant() const { return a1 * b2 - b1 * a2; }

  Point2 Apply(const Point2& p) const {
    return {a1 * p.x + b1 * p.y + c1, a2 * p.x + b2 * p.y + c2};
  }

  // Throws NotInvertible when the linear part is singular.
  Affine2 Inverse() const {
    const double det = Determinant();
    const double scale = std::max({std::abs(a1), std::abs(b1), std::abs(a2), std::abs(b2)});
    if (scale == 0.0 || std::abs(det) <= 1e-15 * scale * scale) {
      throw Error(ErrorCode::kNotInvertible, "affine transform is singular");
    }
    Affine2 inv;
    inv.a1 = b2 / det;
    inv.b1 = -b1 / det;
    inv.a2 = -a2 / det;
    inv.b2 = a1 / det;
    inv.c1 = -(inv.a1 * c1 + inv.b1 * c2);
    inv.c2 = -(inv.a2 * c1 + inv.b2 * c2);
    return inv;
  }

  std::array<double, 6> Parameters() const { return {a1, b1, c1, a2, b2, c2}; }

  friend bool operator==(const Affine2&, const Affine2&) = default;
};

inline Point2 AffineApply(const Affine2& t, const Point2& p) { return t.Apply(p); }

// outer ∘ inner: the map p -> outer(inner(p)).
inline Affine2 Compose(const Affine2& outer, const Affine2& inner) {
  Affine2 r;
  r.a1 = outer.a1 * inner.a1 + outer.b1 * inner.a2;
  r.b1 = outer.a1 * inner.b1 + outer.b1 * inner.b2;
  r.c1 = outer.a1 * inner.c1 + outer.b1 * inner.c2 + outer.c1;
  r.a2 = outer.a2 * inner.a1 + outer.b2 * inner.a2;
  r.b2 = outer.a2 * inner.b1 + outer.b2 * inner.b2;
  r.c2 = outer.a2 * inner.c1 + outer.b2 * inner.c2 + outer.c2;
  return r;
}

inline constexpr double kDegenerateAreaEpsilon = 1e-9;

// Exact transform taking src[i] onto dst[i]. Solved in coordinates relative
// to src[0] so large map offsets do not cost precision.
inline Affine2 AffineFromPairs(std::span<const Point2, 3> src, std::span<const Point2, 3> dst,
                               double area_epsilon = kDegenerateAreaEpsilon) {
  const Point2 e1 = src[1] - src[0];
  const Point2 e2 = src[2] - src[0];
  const double det = Cross(e1, e2);
  if (0.5 * std::abs(det) < area_epsilon) {
    throw Error(ErrorCode::kDegenerateSample, "source triangle is degenerate");
  }
  const Point2 f1 = dst[1] - dst[0];
  const Point2 f2 = dst[2] - dst[0];
  // L * [e1 e2] = [f1 f2]  =>  L = [f1 f2] * [e1 e2]^-1
  const double i11 = e2.y / det, i12 = -e2.x / det;
  const double i21 = -e1.y / det, i22 = e1.x / det;
  Affine2 t;
  t.a1 = f1.x * i11 + f2.x * i21;
  t.b1 = f1.x * i12 + f2.x * i22;
  t.a2 = f1.y * i11 + f2.y * i21;
  t.b2 = f1.y * i12 + f2.y * i22;
  t.c1 = dst[0].x - (t.a1 * src[0].x + t.b1 * src[0].y);
  t.c2 = dst[0].y - (t.a2 * src[0].x + t.b2 * src[0].y);
  return t;
}

inline Affine2 AffineFromPairs(const std::array<Point2, 3>& src, const std::array<Point2, 3>& dst,
                               double area_epsilon = kDegenerateAreaEpsilon) {
  return AffineFromPairs(std::span<const Point2, 3>(src), std::span<const Point2, 3>(dst),
                         area_epsilon);
}

struct PointPair {
  Point2 from;
  Point2 to;
};

namespace detail {

// Area of a near-maximal triangle spanned by the points (farthest point from
// the first, then farthest from that chord). Zero iff all points are collinear.
inline double SpreadTriangleArea(std::span<const PointPair> pairs) {
  const Point2& p0 = pairs[0].from;
  std::size_t far = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double d = Distance(pairs[i].from, p0);
    if (d > best) {
      best = d;
      far = i;
    }
  }
  double area = 0.0;
  for (const auto& pr : pairs) {
    area = std::max(area, TriangleArea(p0, pairs[far].from, pr.from));
  }
  return area;
}

}  // namespace detail

// Least-squares affine fit over >= 3 pairs, solved on centroid-centered
// coordinates.
inline Affine2 AffineLeastSquares(std::span<const PointPair> pairs,
                                  double area_epsilon = kDegenerateAreaEpsilon) {
  if (pairs.size() < 3) {
    throw Error(ErrorCode::kDegenerateSample, "affine fit needs at least 3 pairs");
  }
  if (detail::SpreadTriangleArea(pairs) < area_epsilon) {
    throw Error(ErrorCode::kDegenerateSample, "source points are collinear");
  }
  const double n = static_cast<double>(pairs.size());
  double sx = 0, sy = 0, dx = 0, dy = 0;
  for (const auto& pr : pairs) {
    sx += pr.from.x;
    sy += pr.from.y;
    dx += pr.to.x;
    dy += pr.to.y;
  }
  sx /= n;
  sy /= n;
  dx /= n;
  dy /= n;
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d cross = Eigen::Matrix2d::Zero();
  for (const auto& pr : pairs) {
    const Eigen::Vector2d s(pr.from.x - sx, pr.from.y - sy);
    const Eigen::Vector2d d(pr.to.x - dx, pr.to.y - dy);
    scatter += s * s.transpose();
    cross += d * s.transpose();
  }
  const Eigen::Matrix2d linear = cross * scatter.inverse();
  Affine2 t;
  t.a1 = linear(0, 0);
  t.b1 = linear(0, 1);
  t.a2 = linear(1, 0);
  t.b2 = linear(1, 1);
  t.c1 = dx - (t.a1 * sx + t.b1 * sy);
  t.c2 = dy - (t.a2 * sx + t.b2 * sy);
  return t;
}

// Hamilton convention, w-first storage. Construction normalizes.
struct UnitQuaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  UnitQuaternion() = default;
  UnitQuaternion(double w_in, double x_in, double y_in, double z_in) {
    const double n = std::sqrt(w_in * w_in + x_in * x_in + y_in * y_in + z_in * z_in);
    if (!std::isfinite(n)) throw Error(ErrorCode::kNonFinite, "quaternion is not finite");
    if (n < 1e-12) throw Error(ErrorCode::kZeroVector, "quaternion has zero norm");
    w = w_in / n;
    x = x_in / n;
    y = y_in / n;
    z = z_in / n;
  }

  static UnitQuaternion FromAxisAngle(const Point3& axis, double angle) {
    const double n = Norm(axis);
    if (n < 1e-12) throw Error(ErrorCode::kZeroVector, "rotation axis has zero norm");
    const double s = std::sin(0.5 * angle) / n;
    return {std::cos(0.5 * angle), s * axis.x, s * axis.y, s * axis.z};
  }

  UnitQuaternion Conjugate() const {
    UnitQuaternion q;
    q.w = w;
    q.x = -x;
    q.y = -y;
    q.z = -z;
    return q;
  }

  friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
  }
};

// Angle of the relative rotation between two quaternions, in [0, pi].
inline double AngularDistance(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double d = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z);
  return 2.0 * std::acos(std::min(1.0, d));
}

class RotationMatrix {
 public:
  RotationMatrix() : m_(Eigen::Matrix3d::Identity()) {}

  // Throws NotARotation unless m is orthonormal (1e-6) with det +1.
  explicit RotationMatrix(const Eigen::Matrix3d& m) : m_(m) {
    if (!m.allFinite()) throw Error(ErrorCode::kNonFinite, "rotation matrix is not finite");
    const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-6 || m.determinant() < 0.0) {
      throw Error(ErrorCode::kNotARotation, "matrix is not a proper rotation");
    }
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }
  Point3 operator*(const Point3& p) const { return ToPoint3(m_ * ToEigen(p)); }
  RotationMatrix Transposed() const { return RotationMatrix(m_.transpose()); }

 private:
  Eigen::Matrix3d m_;
};

inline RotationMatrix QuatToMatrix(const UnitQuaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return RotationMatrix(m);
}

// Shepperd's method; the result is canonicalized to w >= 0.
inline UnitQuaternion MatrixToQuat(const RotationMatrix& rot) {
  const Eigen::Matrix3d& m = rot.matrix();
  const double trace = m.trace();
  double w, x, y, z;
  if (trace >= m(0, 0) && trace >= m(1, 1) && trace >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    w = 0.25 * s;
    x = (m(2, 1) - m(1, 2)) / s;
    y = (m(0, 2) - m(2, 0)) / s;
    z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    w = (m(2, 1) - m(1, 2)) / s;
    x = 0.25 * s;
    y = (m(0, 1) + m(1, 0)) / s;
    z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
    w = (m(0, 2) - m(2, 0)) / s;
    x = (m(0, 1) + m(1, 0)) / s;
    y = 0.25 * s;
    z = (m(1, 2) + m(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
    w = (m(1, 0) - m(0, 1)) / s;
    x = (m(0, 2) + m(2, 0)) / s;
    y = (m(1, 2) + m(2, 1)) / s;
    z = 0.25 * s;
  }
  if (w < 0.0) {
    w = -w;
    x = -x;
    y = -y;
    z = -z;
  }
  return {w, x, y, z};
}

// Orthogonal projector onto the line spanned by a direction: V = v vᵀ / (vᵀ v).
class ProjectionMatrix {
 public:
  explicit ProjectionMatrix(const Point3& direction) {
    const Eigen::Vector3d v = ToEigen(direction);
    const double n2 = v.squaredNorm();
    if (std::sqrt(n2) < 1e-12) {
      throw Error(ErrorCode::kZeroVector, "projection direction has zero norm");
    }
    m_ = v * v.transpose() / n2;
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

 private:
  Eigen::Matrix3d m_;
};

inline ProjectionMatrix MakeProjectionMatrix(const Point3& v) { return ProjectionMatrix(v); }

}  // namespace roverloc
