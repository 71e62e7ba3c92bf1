#pragma once

// Point-layout plots as standalone SVG: the two rock distributions, the
// rover set mapped onto the UAV set, and matched pairs joined by lines.

#include <algorithm>
#include <charconv>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "roverloc/geometry.hpp"
#include "roverloc/matcher.hpp"

namespace roverloc::svg {

namespace detail {

inline std::string Num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, r.ptr);
}

struct Bounds {
  double xmin = std::numeric_limits<double>::infinity();
  double ymin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();

  void Add(const Point2& p) {
    xmin = std::min(xmin, p.x);
    ymin = std::min(ymin, p.y);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  void Add(std::span<const Point2> pts) {
    for (const auto& p : pts) Add(p);
  }
};

// Maps a data rectangle into a square-ish panel, y up, equal axis scale.
class Panel {
 public:
  Panel(Bounds b, double left, double top, double size) : left_(left), top_(top), size_(size) {
    if (!(b.xmin <= b.xmax)) b = {0, 0, 1, 1};
    const double span = std::max({b.xmax - b.xmin, b.ymax - b.ymin, 1e-9}) * 1.1;
    cx_ = 0.5 * (b.xmin + b.xmax);
    cy_ = 0.5 * (b.ymin + b.ymax);
    scale_ = size / span;
  }

  Point2 Map(const Point2& p) const {
    return {left_ + 0.5 * size_ + (p.x - cx_) * scale_, top_ + 0.5 * size_ - (p.y - cy_) * scale_};
  }

  std::string Frame(const std::string& title) const {
    return "<rect x=\"" + Num(left_) + "\" y=\"" + Num(top_) + "\" width=\"" + Num(size_) +
           "\" height=\"" + Num(size_) + "\" fill=\"none\" stroke=\"#888\"/>\n" +
           "<text x=\"" + Num(left_ + 4) + "\" y=\"" + Num(top_ - 6) +
           "\" font-family=\"sans-serif\" font-size=\"13\">" + title + "</text>\n";
  }

  std::string Dots(std::span<const Point2> pts, const std::string& color, double r = 3.5) const {
    std::string s;
    for (const auto& p : pts) {
      const Point2 q = Map(p);
      s += "<circle cx=\"" + Num(q.x) + "\" cy=\"" + Num(q.y) + "\" r=\"" + Num(r) +
           "\" fill=\"" + color + "\"/>\n";
    }
    return s;
  }

 private:
  double left_, top_, size_;
  double cx_ = 0, cy_ = 0, scale_ = 1;
};

inline std::string Document(double width, double height, const std::string& body) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Num(width) + "\" height=\"" +
         Num(height) + "\" viewBox=\"0 0 " + Num(width) + ' ' + Num(height) + "\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body + "</svg>\n";
}

inline std::string Line(const Point2& a, const Point2& b, const std::string& color) {
  return "<line x1=\"" + Num(a.x) + "\" y1=\"" + Num(a.y) + "\" x2=\"" + Num(b.x) + "\" y2=\"" +
         Num(b.y) + "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
}

inline constexpr double kPanel = 400.0;
inline constexpr double kMargin = 30.0;
inline constexpr const char* kRoverColor = "#d62728";
inline constexpr const char* kUavColor = "#1f77b4";

}  // namespace detail

// Rover ground-plane rocks and UAV map rocks, each in its own panel.
inline std::string Distributions(const RockSet& rover, const RockSet& uav) {
  using namespace detail;
  Bounds br, bu;
  br.Add(rover.points);
  bu.Add(uav.points);
  const Panel pr(br, kMargin, kMargin, kPanel);
  const Panel pu(bu, 2 * kMargin + kPanel, kMargin, kPanel);
  const std::string body = pr.Frame("rover ground plane") + pr.Dots(rover.points, kRoverColor) +
                           pu.Frame("UAV map") + pu.Dots(uav.points, kUavColor);
  return Document(3 * kMargin + 2 * kPanel, 2 * kMargin + kPanel, body);
}

// Rover rocks mapped through `transform` drawn over the UAV rocks.
inline std::string Overlay(const RockSet& rover, const RockSet& uav, const Affine2& transform) {
  using namespace detail;
  std::vector<Point2> mapped;
  for (const auto& p : rover.points) mapped.push_back(transform.Apply(p));
  Bounds b;
  b.Add(uav.points);
  b.Add(mapped);
  const Panel panel(b, kMargin, kMargin, kPanel);
  const std::string body = panel.Frame("overlay in map frame") + panel.Dots(uav.points, kUavColor, 5.0) +
                           panel.Dots(mapped, kRoverColor, 2.5);
  return Document(2 * kMargin + kPanel, 2 * kMargin + kPanel, body);
}

// Side-by-side panels with a line per matched pair.
inline std::string Correspondences(const RockSet& rover, const RockSet& uav,
                                   std::span<const Correspondence> pairs) {
  using namespace detail;
  Bounds br, bu;
  br.Add(rover.points);
  bu.Add(uav.points);
  const Panel pr(br, kMargin, kMargin, kPanel);
  const Panel pu(bu, 2 * kMargin + kPanel, kMargin, kPanel);
  std::string body = pr.Frame("rover ground plane") + pu.Frame("UAV map");
  for (const auto& c : pairs) {
    body += Line(pr.Map(rover.points[c.rover]), pu.Map(uav.points[c.uav]), "#2ca02c");
  }
  body += pr.Dots(rover.points, kRoverColor) + pu.Dots(uav.points, kUavColor);
  return Document(3 * kMargin + 2 * kPanel, 2 * kMargin + kPanel, body);
}

}  // namespace roverloc::svg
