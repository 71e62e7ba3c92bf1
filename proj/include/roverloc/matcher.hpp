#pragma once

// Rock-distribution pattern matching: find the planar affine map from the
// rover ground-plane rock layout onto the UAV map layout by trial matching
// (hypothesize from three rock pairs, verify by nearest-neighbor consensus).
//
// Neither side has putative correspondences, so each trial draws a random
// rover triple and pairs it with every UAV triple of compatible shape, looked
// up in a precomputed index of UAV triangles keyed by normalized side
// lengths. Each pairing is verified by counting rover rocks that land within
// the inlier threshold of some UAV rock; the best pairing of the trial is
// then scored with the one-to-one nearest-neighbor assignment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "roverloc/error.hpp"
#include "roverloc/geometry.hpp"

namespace roverloc {

enum class RockFrame { kRoverGround, kUavMap };

struct RockSet {
  std::vector<Point2> points;
  RockFrame frame = RockFrame::kRoverGround;

  std::size_t size() const { return points.size(); }

  // Throws DuplicatePoints if two rocks are closer than 1e-6 m.
  void Validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = i + 1; j < points.size(); ++j) {
        if (Distance(points[i], points[j]) < 1e-6) {
          throw Error(ErrorCode::kDuplicatePoints, "rock set has duplicate points");
        }
      }
    }
  }
};

struct Correspondence {
  std::size_t rover = 0;
  std::size_t uav = 0;
  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

struct MatchHypothesis {
  Affine2 transform;
  std::vector<Correspondence> correspondences;
  double residual = 0.0;  // sum of matched-pair distances, meters
  std::size_t inlier_count = 0;
  std::size_t trial = 0;
};

struct MatchConfig {
  int iterations = 2000;
  double inlier_threshold = 0.3;
  int min_inliers = 4;
  std::uint64_t rng_seed = 0;
  double anisotropy_bound = 10.0;
  // Max abs difference of normalized side-length ratios for a UAV triangle
  // to be proposed against a rover triangle.
  double shape_tolerance = 0.05;
  // 0 = hardware concurrency. Results do not depend on this.
  int threads = 1;

  void Validate() const {
    if (iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 1");
    if (!(inlier_threshold > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "inlier_threshold must be > 0");
    }
    if (min_inliers < 3) throw Error(ErrorCode::kInvalidArgument, "min_inliers must be >= 3");
    if (!(anisotropy_bound >= 1)) {
      throw Error(ErrorCode::kInvalidArgument, "anisotropy_bound must be >= 1");
    }
    if (!(shape_tolerance > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "shape_tolerance must be > 0");
    }
    if (threads < 0) throw Error(ErrorCode::kInvalidArgument, "threads must be >= 0");
  }
};

// One-to-one nearest-neighbor pairing of transformed rover rocks with UAV
// rocks: admissible pairs (distance <= threshold) are taken greedily in
// ascending (distance, rover index, uav index) order. Sorted by rover index.
inline std::vector<Correspondence> AssignNearest(const Affine2& transform, const RockSet& rover,
                                                 const RockSet& uav, double threshold) {
  struct Candidate {
    double dist;
    std::size_t r, u;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < rover.size(); ++i) {
    const Point2 q = transform.Apply(rover.points[i]);
    for (std::size_t j = 0; j < uav.size(); ++j) {
      const double d = Distance(q, uav.points[j]);
      if (d <= threshold) cands.push_back({d, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dist, a.r, a.u) < std::tie(b.dist, b.r, b.u);
  });
  std::vector<char> rover_used(rover.size(), 0), uav_used(uav.size(), 0);
  std::vector<Correspondence> out;
  for (const auto& c : cands) {
    if (rover_used[c.r] || uav_used[c.u]) continue;
    rover_used[c.r] = uav_used[c.u] = 1;
    out.push_back({c.r, c.u});
  }
  std::sort(out.begin(), out.end(),
            [](const Correspondence& a, const Correspondence& b) { return a.rover < b.rover; });
  return out;
}

inline double MatchResidual(const Affine2& transform, const RockSet& rover, const RockSet& uav,
                            std::span<const Correspondence> pairs) {
  double sum = 0.0;
  for (const auto& c : pairs) sum += Distance(transform.Apply(rover.points[c.rover]), uav.points[c.uav]);
  return sum;
}

// Side k is the side opposite vertex k.
inline std::array<double, 3> TriangleSides(const std::array<Point2, 3>& t) {
  return {Distance(t[1], t[2]), Distance(t[2], t[0]), Distance(t[0], t[1])};
}

// max_k(dst_k / src_k) / min_k(dst_k / src_k); infinity if a side vanishes.
inline double TriangleAnisotropy(const std::array<double, 3>& src_sides,
                                 const std::array<double, 3>& dst_sides) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (!(src_sides[k] > 0) || !(dst_sides[k] > 0)) return std::numeric_limits<double>::infinity();
    const double r = dst_sides[k] / src_sides[k];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return hi / lo;
}

inline bool SampleFilter(const std::array<Point2, 3>& src, const std::array<Point2, 3>& dst,
                         double anisotropy_bound = 10.0,
                         double area_epsilon = kDegenerateAreaEpsilon) {
  if (TriangleArea(src[0], src[1], src[2]) < area_epsilon) return false;
  if (TriangleArea(dst[0], dst[1], dst[2]) < area_epsilon) return false;
  return TriangleAnisotropy(TriangleSides(src), TriangleSides(dst)) <= anisotropy_bound;
}

namespace detail {

struct ShapeKey {
  double mid;    // middle side / longest side
  double short_; // shortest side / longest side
  // Vertices ordered by opposite side length, longest first.
  std::array<std::uint32_t, 3> order;
};

inline ShapeKey CanonicalShape(const std::array<Point2, 3>& t,
                               const std::array<std::uint32_t, 3>& ids) {
  const auto s = TriangleSides(t);
  std::array<int, 3> k{0, 1, 2};
  std::stable_sort(k.begin(), k.end(), [&](int a, int b) { return s[a] > s[b]; });
  ShapeKey key;
  key.mid = s[k[1]] / s[k[0]];
  key.short_ = s[k[2]] / s[k[0]];
  key.order = {ids[k[0]], ids[k[1]], ids[k[2]]};
  return key;
}

class TriangleShapeIndex {
 public:
  TriangleShapeIndex(std::span<const Point2> pts, double area_epsilon) {
    const auto n = static_cast<std::uint32_t>(pts.size());
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) {
        for (std::uint32_t k = j + 1; k < n; ++k) {
          const std::array<Point2, 3> t{pts[i], pts[j], pts[k]};
          if (TriangleArea(t[0], t[1], t[2]) < area_epsilon) continue;
          keys_.push_back(CanonicalShape(t, {i, j, k}));
        }
      }
    }
    std::sort(keys_.begin(), keys_.end(), [](const ShapeKey& a, const ShapeKey& b) {
      return std::tie(a.mid, a.short_, a.order) < std::tie(b.mid, b.short_, b.order);
    });
  }

  template <typename Fn>
  void ForEachNear(const ShapeKey& q, double tol, Fn&& fn) const {
    auto it = std::lower_bound(keys_.begin(), keys_.end(), q.mid - tol,
                               [](const ShapeKey& k, double v) { return k.mid < v; });
    for (; it != keys_.end() && it->mid <= q.mid + tol; ++it) {
      if (std::abs(it->short_ - q.short_) <= tol) fn(*it);
    }
  }

 private:
  std::vector<ShapeKey> keys_;
};

// Uniform hash grid answering "is any point within r of q" for r <= cell.
class PointGrid {
 public:
  PointGrid(std::span<const Point2> pts, double cell) : pts_(pts), cell_(cell) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[Key(Cell(pts[i].x), Cell(pts[i].y))].push_back(i);
  }

  bool AnyWithin(const Point2& q, double r) const {
    const std::int64_t cx = Cell(q.x), cy = Cell(q.y);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(Key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second) {
          if (Distance(pts_[i], q) <= r) return true;
        }
      }
    }
    return false;
  }

 private:
  std::int64_t Cell(double v) const {
    const double c = std::floor(v / cell_);
    return static_cast<std::int64_t>(std::clamp(c, -1e15, 1e15));
  }
  static std::uint64_t Key(std::int64_t x, std::int64_t y) {
    return static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(y);
  }

  std::span<const Point2> pts_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

// Strict "better than" under (inlier_count desc, residual asc, trial asc).
inline bool Better(const MatchHypothesis& a, const MatchHypothesis& b) {
  if (a.inlier_count != b.inlier_count) return a.inlier_count > b.inlier_count;
  if (a.residual != b.residual) return a.residual < b.residual;
  return a.trial < b.trial;
}

inline std::mt19937_64 TrialRng(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

struct MatchContext {
  const RockSet& rover;
  const RockSet& uav;
  const MatchConfig& cfg;
  const TriangleShapeIndex& index;
  const PointGrid& grid;
};

// Best pairing for one canonical rover triple; independent of the trial
// that drew it, so workers memoize it.
inline std::optional<MatchHypothesis> EvaluateTriple(const MatchContext& ctx,
                                                     const ShapeKey& rkey) {
  const auto& rp = ctx.rover.points;
  const std::array<Point2, 3> src{rp[rkey.order[0]], rp[rkey.order[1]], rp[rkey.order[2]]};
  const double thr = ctx.cfg.inlier_threshold;
  std::size_t best_count = 0;
  std::optional<Affine2> best;
  ctx.index.ForEachNear(rkey, ctx.cfg.shape_tolerance, [&](const ShapeKey& ukey) {
    const auto& up = ctx.uav.points;
    const std::array<Point2, 3> dst{up[ukey.order[0]], up[ukey.order[1]], up[ukey.order[2]]};
    if (!SampleFilter(src, dst, ctx.cfg.anisotropy_bound)) return;
    const Affine2 t = AffineFromPairs(src, dst);
    std::size_t count = 0;
    for (std::size_t i = 0; i < rp.size(); ++i) {
      // Cannot beat the current best any more.
      if (count + (rp.size() - i) <= best_count) return;
      count += ctx.grid.AnyWithin(t.Apply(rp[i]), thr) ? 1 : 0;
    }
    if (count > best_count) {
      best_count = count;
      best = t;
    }
  });
  if (!best) return std::nullopt;
  MatchHypothesis h;
  h.transform = *best;
  h.correspondences = AssignNearest(*best, ctx.rover, ctx.uav, thr);
  h.inlier_count = h.correspondences.size();
  h.residual = MatchResidual(*best, ctx.rover, ctx.uav, h.correspondences);
  return h;
}

using TripleMemo = std::unordered_map<std::uint64_t, std::optional<MatchHypothesis>>;

inline std::optional<MatchHypothesis> RunTrial(const MatchContext& ctx, std::size_t trial,
                                               TripleMemo& memo) {
  auto rng = TrialRng(ctx.cfg.rng_seed, trial);
  const auto n = static_cast<std::uint32_t>(ctx.rover.size());
  std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
  std::array<std::uint32_t, 3> ids{};
  ids[0] = pick(rng);
  do ids[1] = pick(rng); while (ids[1] == ids[0]);
  do ids[2] = pick(rng); while (ids[2] == ids[0] || ids[2] == ids[1]);

  const auto& rp = ctx.rover.points;
  const std::array<Point2, 3> rt{rp[ids[0]], rp[ids[1]], rp[ids[2]]};
  if (TriangleArea(rt[0], rt[1], rt[2]) < kDegenerateAreaEpsilon) return std::nullopt;
  const ShapeKey rkey = CanonicalShape(rt, ids);
  const std::uint64_t key = (static_cast<std::uint64_t>(rkey.order[0]) << 42) ^
                            (static_cast<std::uint64_t>(rkey.order[1]) << 21) ^ rkey.order[2];
  auto it = memo.find(key);
  if (it == memo.end()) it = memo.emplace(key, EvaluateTriple(ctx, rkey)).first;
  if (!it->second) return std::nullopt;
  MatchHypothesis h = *it->second;
  h.trial = trial;
  return h;
}

inline std::vector<PointPair> PairsOf(const RockSet& rover, const RockSet& uav,
                                      std::span<const Correspondence> corr) {
  std::vector<PointPair> pairs;
  pairs.reserve(corr.size());
  for (const auto& c : corr) pairs.push_back({rover.points[c.rover], uav.points[c.uav]});
  return pairs;
}

}  // namespace detail

// Throws TooFewRocks (either side < 3) or NoConsensus (best hypothesis has
// fewer than cfg.min_inliers pairs). The winning hypothesis is refined by a
// least-squares affine fit over its pairs, re-assigned, and refit once more.
inline MatchHypothesis MatchPatterns(const RockSet& rover, const RockSet& uav,
                                     const MatchConfig& cfg) {
  cfg.Validate();
  if (rover.size() < 3 || uav.size() < 3) {
    throw Error(ErrorCode::kTooFewRocks, "pattern matching needs at least 3 rocks per side");
  }
  const detail::TriangleShapeIndex index(uav.points, kDegenerateAreaEpsilon);
  const detail::PointGrid grid(uav.points, cfg.inlier_threshold);
  const detail::MatchContext ctx{rover, uav, cfg, index, grid};

  const auto trials = static_cast<std::size_t>(cfg.iterations);
  std::size_t workers = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : static_cast<std::size_t>(cfg.threads);
  workers = std::min(workers, trials);
  std::vector<std::optional<MatchHypothesis>> partial(workers);
  auto run_range = [&](std::size_t w) {
    const std::size_t lo = trials * w / workers, hi = trials * (w + 1) / workers;
    detail::TripleMemo memo;
    for (std::size_t k = lo; k < hi; ++k) {
      auto h = detail::RunTrial(ctx, k, memo);
      if (h && (!partial[w] || detail::Better(*h, *partial[w]))) partial[w] = std::move(h);
    }
  };
  if (workers == 1) {
    run_range(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
    for (auto& th : pool) th.join();
  }
  std::optional<MatchHypothesis> best;
  for (auto& h : partial) {
    if (h && (!best || detail::Better(*h, *best))) best = std::move(h);
  }
  if (!best || best->inlier_count < static_cast<std::size_t>(cfg.min_inliers)) {
    throw Error(ErrorCode::kNoConsensus, "no hypothesis reached min_inliers");
  }

  MatchHypothesis out = *best;
  try {
    const auto pairs = detail::PairsOf(rover, uav, out.correspondences);
    Affine2 refit = AffineLeastSquares(pairs);
    auto corr = AssignNearest(refit, rover, uav, cfg.inlier_threshold);
    if (corr.size() >= out.correspondences.size()) {
      const auto pairs2 = detail::PairsOf(rover, uav, corr);
      refit = AffineLeastSquares(pairs2);
      out.correspondences = std::move(corr);
    }
    out.transform = refit;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateSample) throw;
  }
  out.inlier_count = out.correspondences.size();
  out.residual = MatchResidual(out.transform, rover, uav, out.correspondences);
  return out;
}

}  // namespace roverloc
