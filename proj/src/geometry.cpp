#include "legws/geometry.hpp"

#include <algorithm>
#include <limits>

#include "legws/error.hpp"

namespace legws {

namespace {

bool lex_less(Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

// Removes vertices within kGeomEps of the chord through their neighbours,
// and repeated vertices. Works on a closed ring.
std::vector<Point2> drop_collinear(std::vector<Point2> ring) {
  bool changed = true;
  while (changed && ring.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < ring.size() && ring.size() >= 3; ++i) {
      const Point2 prev = ring[(i + ring.size() - 1) % ring.size()];
      const Point2 cur = ring[i];
      const Point2 next = ring[(i + 1) % ring.size()];
      const double chord = distance(prev, next);
      const bool repeated = distance(prev, cur) <= kGeomEps;
      const bool flat = chord > kGeomEps && std::abs(cross(next - prev, cur - prev)) / chord <= kGeomEps &&
                        dot(cur - prev, next - cur) >= 0.0;
      if (repeated || flat) {
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return ring;
}

void rotate_to_lowest(std::vector<Point2>& ring) {
  auto lowest = std::min_element(ring.begin(), ring.end(), lex_less);
  std::rotate(ring.begin(), lowest, ring.end());
}

// Projection interval of a polygon onto an axis.
std::pair<double, double> project(const std::vector<Point2>& verts, Point2 axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Point2& v : verts) {
    const double t = dot(v, axis);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  return {lo, hi};
}

bool separated_along_edges(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Point2 e = a[(i + 1) % a.size()] - a[i];
    const Point2 normal{-e.y, e.x};
    const double len = std::hypot(normal.x, normal.y);
    const auto [alo, ahi] = project(a, normal);
    const auto [blo, bhi] = project(b, normal);
    if (blo - ahi > kGeomEps * len || alo - bhi > kGeomEps * len) return true;
  }
  return false;
}

}  // namespace

ConvexPolygon ConvexPolygon::from_vertices(std::vector<Point2> vertices) {
  for (const Point2& p : vertices) {
    if (!is_finite(p)) throw DegenerateInput("polygon vertex is not finite");
  }
  auto ring = drop_collinear(std::move(vertices));
  if (ring.size() < 3) throw DegenerateInput("polygon needs at least 3 non-collinear vertices");
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point2 a = ring[i];
    const Point2 b = ring[(i + 1) % ring.size()];
    const Point2 c = ring[(i + 2) % ring.size()];
    if (cross(b - a, c - b) <= 0.0) {
      throw DegenerateInput("polygon is not strictly convex and counterclockwise");
    }
  }
  // A star-shaped ring can turn left at every vertex and still wind twice.
  if (shoelace_area(ring) <= 0.0) throw DegenerateInput("polygon has non-positive area");
  double turning = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point2 e0 = ring[(i + 1) % ring.size()] - ring[i];
    const Point2 e1 = ring[(i + 2) % ring.size()] - ring[(i + 1) % ring.size()];
    turning += std::atan2(cross(e0, e1), dot(e0, e1));
  }
  if (turning > 2.0 * M_PI + 1e-6) throw DegenerateInput("polygon winds more than once");
  rotate_to_lowest(ring);
  return ConvexPolygon(std::move(ring));
}

ConvexPolygon ConvexPolygon::square(Point2 center, double side) {
  const double h = side / 2.0;
  return from_vertices({{center.x - h, center.y - h},
                        {center.x + h, center.y - h},
                        {center.x + h, center.y + h},
                        {center.x - h, center.y + h}});
}

double ConvexPolygon::area() const { return shoelace_area(vertices_); }

bool ConvexPolygon::contains(Point2 p, double eps) const {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Point2 a = vertices_[i];
    const Point2 b = vertices_[(i + 1) % vertices_.size()];
    const Point2 e = b - a;
    const double slack = eps == 0.0 ? 0.0 : eps * std::hypot(e.x, e.y);
    if (cross(e, p - a) < -slack) return false;
  }
  return true;
}

double ConvexPolygon::distance_to(Point2 p) const {
  if (contains(p, 0.0)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    best = std::min(best, segment_distance(p, vertices_[i], vertices_[(i + 1) % vertices_.size()]));
  }
  return best;
}

ConvexPolygon convex_hull(std::span<const Point2> points) {
  std::vector<Point2> pts(points.begin(), points.end());
  for (const Point2& p : pts) {
    if (!is_finite(p)) throw DegenerateInput("hull input is not finite");
  }
  std::sort(pts.begin(), pts.end(), lex_less);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw DegenerateInput("convex hull needs at least 3 distinct points");

  std::vector<Point2> hull;
  hull.reserve(2 * pts.size());
  for (const Point2& p : pts) {
    while (hull.size() >= 2 && cross(hull.back() - hull[hull.size() - 2], p - hull[hull.size() - 2]) <= 0.0) {
      hull.pop_back();
    }
    hull.push_back(p);
  }
  const std::size_t lower = hull.size() + 1;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
    while (hull.size() >= lower && cross(hull.back() - hull[hull.size() - 2], *it - hull[hull.size() - 2]) <= 0.0) {
      hull.pop_back();
    }
    hull.push_back(*it);
  }
  hull.pop_back();

  hull = drop_collinear(std::move(hull));
  if (hull.size() < 3) throw DegenerateInput("convex hull input is collinear");
  rotate_to_lowest(hull);
  return ConvexPolygon(std::move(hull));
}

bool polygons_overlap(const ConvexPolygon& a, const ConvexPolygon& b) {
  return !separated_along_edges(a.vertices(), b.vertices()) && !separated_along_edges(b.vertices(), a.vertices());
}

std::vector<ConvexPolygon> merge_overlapping(std::vector<ConvexPolygon> obstacles) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < obstacles.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < obstacles.size(); ++j) {
        if (!polygons_overlap(obstacles[i], obstacles[j])) continue;
        std::vector<Point2> pts = obstacles[i].vertices();
        pts.insert(pts.end(), obstacles[j].vertices().begin(), obstacles[j].vertices().end());
        obstacles[i] = convex_hull(pts);
        obstacles.erase(obstacles.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
        break;
      }
    }
  }
  std::sort(obstacles.begin(), obstacles.end(), [](const ConvexPolygon& l, const ConvexPolygon& r) {
    return std::lexicographical_compare(l.vertices().begin(), l.vertices().end(), r.vertices().begin(),
                                        r.vertices().end(), lex_less);
  });
  return obstacles;
}

bool disc_intersects(const Disc& disc, const ConvexPolygon& poly) {
  return poly.distance_to(disc.center) < disc.radius - kGeomEps;
}

double segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

double shoelace_area(std::span<const Point2> ring) {
  double twice = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    twice += cross(ring[i], ring[(i + 1) % ring.size()]);
  }
  return twice / 2.0;
}

}  // namespace legws
