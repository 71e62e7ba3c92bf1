#pragma once

// Incremental 2D Delaunay triangulation (Lawson flips after each insertion,
// point location by walking from the last touched triangle).
//
// Co-circular quadrilaterals are resolved by a symbolic rule: the diagonal
// incident to the lexicographically smallest of the four vertices is kept.
// This behaves like lifting each point by an infinitesimal amount ordered by
// its (x, y) rank, so the result is unique and independent of which edge is
// examined first.

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "roverloc/error.hpp"
#include "roverloc/geometry.hpp"

namespace roverloc {

inline constexpr std::size_t kNoTriangle = std::numeric_limits<std::size_t>::max();

struct Triangulation {
  std::vector<Point2> vertices;
  // Counter-clockwise vertex triples.
  std::vector<std::array<std::size_t, 3>> triangles;
  // neighbors[t][i] is the triangle across the edge opposite triangles[t][i],
  // or kNoTriangle on the hull.
  std::vector<std::array<std::size_t, 3>> neighbors;
};

namespace detail {

inline bool LexLess(const Point2& a, const Point2& b) {
  return a.x < b.x || (a.x == b.x && a.y < b.y);
}

// > 0 when d lies strictly inside the circumcircle of counter-clockwise (a, b, c).
inline double InCircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const long double adx = a.x - d.x, ady = a.y - d.y;
  const long double bdx = b.x - d.x, bdy = b.y - d.y;
  const long double cdx = c.x - d.x, cdy = c.y - d.y;
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return static_cast<double>(adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) +
                             ad * (bdx * cdy - bdy * cdx));
}

class DelaunayBuilder {
 public:
  explicit DelaunayBuilder(std::span<const Point2> points) {
    out_.vertices.assign(points.begin(), points.end());
  }

  Triangulation Build() {
    Validate();
    const auto [i0, i1, i2] = SeedTriangle();
    if (Orient(P(i0), P(i1), P(i2)) > 0) {
      AddTriangle({i0, i1, i2});
    } else {
      AddTriangle({i0, i2, i1});
    }
    for (std::size_t i = 0; i < out_.vertices.size(); ++i) {
      if (i == i0 || i == i1 || i == i2) continue;
      Insert(i);
    }
    return std::move(out_);
  }

 private:
  using Tri = std::array<std::size_t, 3>;

  const Point2& P(std::size_t i) const { return out_.vertices[i]; }
  Tri& V(std::size_t t) { return out_.triangles[t]; }
  Tri& N(std::size_t t) { return out_.neighbors[t]; }

  void Validate() const {
    const auto& pts = out_.vertices;
    if (pts.size() < 3) {
      throw Error(ErrorCode::kTooFewPoints, "triangulation needs at least 3 points");
    }
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return LexLess(pts[a], pts[b]); });
    constexpr double kDup = 1e-9;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        const Point2& a = pts[order[i]];
        const Point2& b = pts[order[j]];
        if (b.x - a.x > kDup) break;
        if (std::abs(b.y - a.y) <= kDup) {
          throw Error(ErrorCode::kDuplicatePoints, "duplicate input points");
        }
      }
    }
  }

  std::array<std::size_t, 3> SeedTriangle() const {
    const auto& pts = out_.vertices;
    // First point, the farthest point from it, then the point farthest from
    // that chord: a well-shaped seed even for nearly collinear prefixes.
    std::size_t i1 = 1;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (Distance(pts[i], pts[0]) > Distance(pts[i1], pts[0])) i1 = i;
    }
    std::size_t i2 = kNoTriangle;
    double best = 0.0;
    const double chord = Distance(pts[i1], pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (i == i1) continue;
      const double a = std::abs(Orient(pts[0], pts[i1], pts[i]));
      if (a > best) {
        best = a;
        i2 = i;
      }
    }
    if (i2 == kNoTriangle || best <= 1e-12 * chord * chord) {
      throw Error(ErrorCode::kAllCollinear, "all input points are collinear");
    }
    return {0, i1, i2};
  }

  std::size_t AddTriangle(const Tri& v) {
    out_.triangles.push_back(v);
    out_.neighbors.push_back({kNoTriangle, kNoTriangle, kNoTriangle});
    last_ = out_.triangles.size() - 1;
    return last_;
  }

  static int IndexOf(const Tri& v, std::size_t vertex) {
    for (int i = 0; i < 3; ++i) {
      if (v[i] == vertex) return i;
    }
    return -1;
  }

  // Sets mutual adjacency if t and u share an edge.
  void Link(std::size_t t, std::size_t u) {
    if (t == kNoTriangle || u == kNoTriangle || t == u) return;
    const Tri& a = V(t);
    const Tri& b = V(u);
    int opp_a = -1, opp_b = -1, shared = 0;
    for (int i = 0; i < 3; ++i) {
      const int j = IndexOf(b, a[i]);
      if (j >= 0) {
        ++shared;
      } else {
        opp_a = i;
      }
    }
    if (shared != 2) return;
    for (int j = 0; j < 3; ++j) {
      if (IndexOf(a, b[j]) < 0) opp_b = j;
    }
    N(t)[opp_a] = u;
    N(u)[opp_b] = t;
  }

  void Relink(std::span<const std::size_t> fresh, std::span<const std::size_t> outer) {
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      for (std::size_t j = i + 1; j < fresh.size(); ++j) Link(fresh[i], fresh[j]);
      for (std::size_t o : outer) Link(fresh[i], o);
    }
  }

  enum class Where { kInside, kOnEdge, kOutside };
  struct Location {
    Where where;
    std::size_t triangle;
    int edge;  // for kOnEdge: index of the vertex opposite the edge
  };

  Location Locate(const Point2& p) {
    std::size_t t = last_;
    const std::size_t cap = 4 * out_.triangles.size() + 16;
    for (std::size_t step = 0; step < cap; ++step) {
      const Tri& v = V(t);
      int zero_edge = -1;
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int e = static_cast<int>((k + step) % 3);
        const double o = Orient(P(v[(e + 1) % 3]), P(v[(e + 2) % 3]), p);
        if (o < 0) {
          const std::size_t next = N(t)[e];
          if (next == kNoTriangle) return {Where::kOutside, t, e};
          t = next;
          moved = true;
          break;
        }
        if (o == 0) zero_edge = e;
      }
      if (!moved) {
        if (zero_edge >= 0) return {Where::kOnEdge, t, zero_edge};
        return {Where::kInside, t, -1};
      }
    }
    // The walk can cycle only on numerically inconsistent input; scan instead.
    for (std::size_t u = 0; u < out_.triangles.size(); ++u) {
      const Tri& v = V(u);
      double o[3];
      for (int e = 0; e < 3; ++e) o[e] = Orient(P(v[(e + 1) % 3]), P(v[(e + 2) % 3]), p);
      if (o[0] >= 0 && o[1] >= 0 && o[2] >= 0) {
        for (int e = 0; e < 3; ++e) {
          if (o[e] == 0) return {Where::kOnEdge, u, e};
        }
        return {Where::kInside, u, -1};
      }
    }
    return {Where::kOutside, kNoTriangle, -1};
  }

  void Insert(std::size_t p) {
    const Location loc = Locate(P(p));
    std::vector<std::size_t> fresh;
    switch (loc.where) {
      case Where::kInside: fresh = SplitInside(loc.triangle, p); break;
      case Where::kOnEdge: fresh = SplitEdge(loc.triangle, loc.edge, p); break;
      case Where::kOutside: fresh = AttachOutside(p); break;
    }
    std::vector<std::size_t> stack(fresh.rbegin(), fresh.rend());
    while (!stack.empty()) {
      const std::size_t t = stack.back();
      stack.pop_back();
      Legalize(t, p, stack);
    }
  }

  std::vector<std::size_t> SplitInside(std::size_t t, std::size_t p) {
    const Tri v = V(t);
    const Tri n = N(t);
    V(t) = {v[0], v[1], p};
    N(t) = {kNoTriangle, kNoTriangle, kNoTriangle};
    const std::size_t t1 = AddTriangle({v[1], v[2], p});
    const std::size_t t2 = AddTriangle({v[2], v[0], p});
    const std::array<std::size_t, 3> fresh{t, t1, t2};
    Relink(fresh, n);
    return {fresh.begin(), fresh.end()};
  }

  std::vector<std::size_t> SplitEdge(std::size_t t, int e, std::size_t p) {
    const Tri v = V(t);
    const std::size_t a = v[e], b = v[(e + 1) % 3], c = v[(e + 2) % 3];
    const std::size_t u = N(t)[e];
    std::vector<std::size_t> outer(N(t).begin(), N(t).end());
    std::vector<std::size_t> fresh{t};
    V(t) = {a, b, p};
    N(t) = {kNoTriangle, kNoTriangle, kNoTriangle};
    fresh.push_back(AddTriangle({a, p, c}));
    if (u != kNoTriangle) {
      const Tri w = V(u);
      std::size_t d = kNoTriangle;
      for (std::size_t x : w) {
        if (x != b && x != c) d = x;
      }
      for (std::size_t o : N(u)) outer.push_back(o);
      V(u) = {d, c, p};
      N(u) = {kNoTriangle, kNoTriangle, kNoTriangle};
      fresh.push_back(u);
      fresh.push_back(AddTriangle({d, p, b}));
    }
    std::erase_if(outer, [&](std::size_t o) {
      return o == kNoTriangle || std::find(fresh.begin(), fresh.end(), o) != fresh.end();
    });
    Relink(fresh, outer);
    return fresh;
  }

  std::vector<std::size_t> AttachOutside(std::size_t p) {
    std::vector<std::size_t> fresh;
    std::vector<std::size_t> outer;
    const std::size_t count = out_.triangles.size();
    for (std::size_t t = 0; t < count; ++t) {
      for (int e = 0; e < 3; ++e) {
        if (N(t)[e] != kNoTriangle) continue;
        const std::size_t a = V(t)[(e + 1) % 3], b = V(t)[(e + 2) % 3];
        if (Orient(P(a), P(b), P(p)) < 0) {
          fresh.push_back(AddTriangle({b, a, p}));
          outer.push_back(t);
        }
      }
    }
    Relink(fresh, outer);
    return fresh;
  }

  bool ShouldFlip(std::size_t p, std::size_t a, std::size_t b, std::size_t d) const {
    const double ic = InCircle(P(p), P(a), P(b), P(d));
    bool flip = ic > 0;
    if (ic == 0) {
      std::size_t lo = p;
      for (std::size_t x : {a, b, d}) {
        if (LexLess(P(x), P(lo))) lo = x;
      }
      flip = (lo == p || lo == d);
    }
    if (!flip) return false;
    // The new diagonal must split a strictly convex quadrilateral.
    return Orient(P(p), P(a), P(d)) > 0 && Orient(P(p), P(d), P(b)) > 0;
  }

  void Legalize(std::size_t t, std::size_t p, std::vector<std::size_t>& stack) {
    const int ip = IndexOf(V(t), p);
    if (ip < 0) return;
    const std::size_t u = N(t)[ip];
    if (u == kNoTriangle) return;
    const std::size_t a = V(t)[(ip + 1) % 3], b = V(t)[(ip + 2) % 3];
    std::size_t d = kNoTriangle;
    for (std::size_t x : V(u)) {
      if (x != a && x != b) d = x;
    }
    if (!ShouldFlip(p, a, b, d)) return;
    std::vector<std::size_t> outer;
    for (std::size_t o : N(t)) {
      if (o != u && o != kNoTriangle) outer.push_back(o);
    }
    for (std::size_t o : N(u)) {
      if (o != t && o != kNoTriangle) outer.push_back(o);
    }
    V(t) = {p, a, d};
    V(u) = {p, d, b};
    N(t) = {kNoTriangle, kNoTriangle, kNoTriangle};
    N(u) = {kNoTriangle, kNoTriangle, kNoTriangle};
    const std::array<std::size_t, 2> fresh{t, u};
    Relink(fresh, outer);
    last_ = t;
    stack.push_back(u);
    stack.push_back(t);
  }

  Triangulation out_;
  std::size_t last_ = 0;
};

}  // namespace detail

// Throws TooFewPoints, AllCollinear or DuplicatePoints (closer than 1e-9).
inline Triangulation Delaunay(std::span<const Point2> points) {
  return detail::DelaunayBuilder(points).Build();
}

// Index of the triangle containing p (barycentric coordinates >= -1e-12), the
// lowest such index when p lies on a shared edge or vertex; nullopt outside.
inline std::optional<std::size_t> LocateTriangle(const Triangulation& tri, const Point2& p) {
  for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& v = tri.triangles[t];
    const Point2& a = tri.vertices[v[0]];
    const Point2& b = tri.vertices[v[1]];
    const Point2& c = tri.vertices[v[2]];
    const double area = Orient(a, b, c);
    if (area <= 0) continue;
    const double l0 = Orient(b, c, p) / area;
    const double l1 = Orient(c, a, p) / area;
    const double l2 = Orient(a, b, p) / area;
    if (l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12) return t;
  }
  return std::nullopt;
}

}  // namespace roverloc
