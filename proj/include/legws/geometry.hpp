#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace legws {

/// Tolerance for geometric predicates, in meters.
inline constexpr double kGeomEps = 1e-9;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Strictly convex polygon with counterclockwise vertices, starting at the
/// lexicographically smallest (x, then y) vertex.
class ConvexPolygon {
 public:
  /// Validates and canonicalizes; collinear vertices are dropped.
  /// Throws DegenerateInput for fewer than three usable vertices, clockwise
  /// or non-convex input.
  static ConvexPolygon from_vertices(std::vector<Point2> vertices);

  /// Axis-aligned square centered at `center`.
  static ConvexPolygon square(Point2 center, double side);

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }

  double area() const;
  /// Closed containment: boundary points count as inside.
  bool contains(Point2 p, double eps = kGeomEps) const;
  /// Zero for points inside.
  double distance_to(Point2 p) const;

  friend bool operator==(const ConvexPolygon&, const ConvexPolygon&) = default;

 private:
  explicit ConvexPolygon(std::vector<Point2> v) : vertices_(std::move(v)) {}
  std::vector<Point2> vertices_;

  friend ConvexPolygon convex_hull(std::span<const Point2> points);
};

struct Disc {
  Point2 center;
  double radius = 0.0;
};

/// Andrew's monotone chain; collinear boundary points are removed.
ConvexPolygon convex_hull(std::span<const Point2> points);

/// True iff the closed regions intersect; touching counts.
bool polygons_overlap(const ConvexPolygon& a, const ConvexPolygon& b);

/// Replaces overlapping polygons by the hull of their vertices until no two
/// outputs overlap. Output is sorted by first vertex.
std::vector<ConvexPolygon> merge_overlapping(std::vector<ConvexPolygon> obstacles);

/// Disc strictly penetrates the polygon (touching is allowed).
bool disc_intersects(const Disc& disc, const ConvexPolygon& poly);

double segment_distance(Point2 p, Point2 a, Point2 b);

/// Shoelace area of a simple polygon given in order.
double shoelace_area(std::span<const Point2> ring);

}  // namespace legws
