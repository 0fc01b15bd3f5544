#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gvimp/core.hpp"
#include "gvimp/environment.hpp"

namespace gvimp {

/// Distance written for nodes when there is no obstacle at all.
inline constexpr double kNoObstacleDistance = 1e6;

/// Reads the SDF text format:
///   line 1: `rows cols origin_x origin_y cell_size`
///   then `rows` lines of `cols` distances, row 0 = lowest y.
inline SdfGrid parse_sdf(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError("empty SDF file", 1);
  std::istringstream header(line);
  long long rows = 0, cols = 0;
  double ox = 0, oy = 0, cell = 0;
  if (!(header >> rows >> cols >> ox >> oy >> cell)) {
    throw ParseError("SDF header must be `rows cols origin_x origin_y cell_size`", line_no);
  }
  if (rows < 2 || cols < 2) throw ParseError("SDF grid needs at least 2 rows and 2 columns", line_no);
  if (!(cell > 0.0)) throw ParseError("SDF cell_size must be positive", line_no);

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(rows * cols));
  for (long long r = 0; r < rows; ++r) {
    if (!next_line()) throw ParseError("SDF file ends after " + std::to_string(r) + " of " + std::to_string(rows) + " rows", line_no + 1);
    std::istringstream row(line);
    double v = 0;
    long long count = 0;
    while (row >> v) {
      values.push_back(v);
      ++count;
    }
    if (!row.eof()) throw ParseError("SDF row contains a non-numeric token", line_no);
    if (count != cols) {
      throw ParseError("SDF row has " + std::to_string(count) + " values, expected " + std::to_string(cols), line_no);
    }
  }
  return SdfGrid(Vector2(ox, oy), cell, static_cast<Index>(rows), static_cast<Index>(cols), std::move(values));
}

inline SdfGrid load_sdf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open SDF file '" + path + "'");
  try {
    return parse_sdf(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace detail {
inline std::string format_exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Writes with 17 significant digits so a parse returns the same doubles.
inline void write_sdf(std::ostream& out, const SdfGrid& grid) {
  out << grid.rows() << ' ' << grid.cols() << ' ' << detail::format_exact(grid.origin().x()) << ' '
      << detail::format_exact(grid.origin().y()) << ' ' << detail::format_exact(grid.cell_size()) << '\n';
  for (Index r = 0; r < grid.rows(); ++r) {
    for (Index c = 0; c < grid.cols(); ++c) {
      if (c > 0) out << ' ';
      out << detail::format_exact(grid.value(r, c));
    }
    out << '\n';
  }
}

inline void save_sdf(const std::string& path, const SdfGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write SDF file '" + path + "'");
  write_sdf(out, grid);
  if (!out) throw IoError("error while writing SDF file '" + path + "'");
}

/// Axis-aligned rectangular obstacle [xmin, xmax] x [ymin, ymax].
struct Rectangle {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  bool contains(const Vector2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }

  double distance(const Vector2& p) const {
    const double dx = std::max({xmin - p.x(), 0.0, p.x() - xmax});
    const double dy = std::max({ymin - p.y(), 0.0, p.y() - ymax});
    return std::hypot(dx, dy);
  }
};

namespace detail {

struct Segment {
  Vector2 a, b;
};

inline double point_segment_distance(const Vector2& p, const Segment& s) {
  const Vector2 ab = s.b - s.a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - s.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (s.a + t * ab)).norm();
}

/// Removes from [lo, hi] the sub-intervals in `cover`, returning what remains.
inline std::vector<std::pair<double, double>> subtract_intervals(double lo, double hi,
                                                                 std::vector<std::pair<double, double>> cover) {
  std::sort(cover.begin(), cover.end());
  std::vector<std::pair<double, double>> out;
  double cur = lo;
  for (const auto& [a, b] : cover) {
    if (b <= cur) continue;
    if (a >= hi) break;
    if (a > cur) out.emplace_back(cur, a);
    cur = std::max(cur, b);
    if (cur >= hi) break;
  }
  if (cur < hi) out.emplace_back(cur, hi);
  return out;
}

/// Pieces of the union's boundary: each rectangle edge minus the parts that another
/// rectangle covers on the edge's outward side.
inline std::vector<Segment> union_boundary(const std::vector<Rectangle>& rects) {
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const Rectangle& r = rects[i];
    // (fixed coordinate, lo, hi, vertical?, outward sign)
    struct Edge {
      double fixed, lo, hi;
      bool vertical;
      int outward;
    };
    const Edge edges[4] = {{r.xmin, r.ymin, r.ymax, true, -1},
                           {r.xmax, r.ymin, r.ymax, true, +1},
                           {r.ymin, r.xmin, r.xmax, false, -1},
                           {r.ymax, r.xmin, r.xmax, false, +1}};
    for (const Edge& e : edges) {
      std::vector<std::pair<double, double>> cover;
      for (std::size_t k = 0; k < rects.size(); ++k) {
        if (k == i) continue;
        const Rectangle& o = rects[k];
        const double olo = e.vertical ? o.xmin : o.ymin;
        const double ohi = e.vertical ? o.xmax : o.ymax;
        const bool reaches_out = e.outward > 0 ? (olo <= e.fixed && ohi > e.fixed) : (olo < e.fixed && ohi >= e.fixed);
        if (!reaches_out) continue;
        const double alo = e.vertical ? o.ymin : o.xmin;
        const double ahi = e.vertical ? o.ymax : o.xmax;
        cover.emplace_back(alo, ahi);
      }
      for (const auto& [a, b] : subtract_intervals(e.lo, e.hi, cover)) {
        if (e.vertical) {
          segs.push_back({Vector2(e.fixed, a), Vector2(e.fixed, b)});
        } else {
          segs.push_back({Vector2(a, e.fixed), Vector2(b, e.fixed)});
        }
      }
    }
  }
  return segs;
}

}  // namespace detail

/// Exact signed distance from `p` to the union of `rects` (brute force over all rectangles).
inline double signed_distance_to_rectangles(const Vector2& p, const std::vector<Rectangle>& rects,
                                            const std::vector<detail::Segment>& boundary) {
  if (rects.empty()) return kNoObstacleDistance;
  bool inside = false;
  double outside = std::numeric_limits<double>::infinity();
  for (const auto& r : rects) {
    if (r.contains(p)) inside = true;
    outside = std::min(outside, r.distance(p));
  }
  if (!inside) return outside;
  double depth = std::numeric_limits<double>::infinity();
  for (const auto& s : boundary) depth = std::min(depth, detail::point_segment_distance(p, s));
  return -depth;
}

/// Rasterizes rectangles into an SDF grid. Every rectangle must lie inside the grid.
inline SdfGrid rasterize_rectangles(Index rows, Index cols, Vector2 origin, double cell_size,
                                    const std::vector<Rectangle>& rects) {
  if (rows < 2 || cols < 2) throw DomainError("rasterize_rectangles: need at least 2x2 nodes");
  if (!(cell_size > 0.0)) throw DomainError("rasterize_rectangles: cell_size must be positive");
  const Vector2 hi = origin + cell_size * Vector2(static_cast<double>(cols - 1), static_cast<double>(rows - 1));
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const auto& r = rects[i];
    if (!(r.xmin < r.xmax && r.ymin < r.ymax)) {
      throw DomainError("rasterize_rectangles: obstacle " + std::to_string(i) + " is empty or inverted");
    }
    if (r.xmin < origin.x() || r.ymin < origin.y() || r.xmax > hi.x() || r.ymax > hi.y()) {
      throw DomainError("rasterize_rectangles: obstacle " + std::to_string(i) + " lies outside the grid");
    }
  }
  const auto boundary = detail::union_boundary(rects);
  std::vector<double> values(static_cast<std::size_t>(rows * cols));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Vector2 p = origin + cell_size * Vector2(static_cast<double>(c), static_cast<double>(r));
      values[static_cast<std::size_t>(r * cols + c)] = signed_distance_to_rectangles(p, rects, boundary);
    }
  }
  return SdfGrid(origin, cell_size, rows, cols, std::move(values));
}

}  // namespace gvimp
