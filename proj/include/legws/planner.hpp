#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <span>
#include <vector>

#include "legws/geometry.hpp"
#include "legws/workspace.hpp"

namespace legws {

inline constexpr double kSqrt2 = 1.41421356237309504880;

struct Cell {
  int col = 0;
  int row = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Cost of an 8-connected grid path as exact step counts. Keeping the counts
/// (rather than a running floating-point sum) makes equal paths compare
/// bit-identically no matter the order their steps were taken in.
struct GridCost {
  std::int32_t axis = 0;
  std::int32_t diag = 0;

  double units() const { return static_cast<double>(axis) + static_cast<double>(diag) * kSqrt2; }
  double meters(double resolution) const { return units() * resolution; }

  friend GridCost operator+(GridCost a, GridCost b) { return {a.axis + b.axis, a.diag + b.diag}; }
  friend GridCost operator-(GridCost a, GridCost b) { return {a.axis - b.axis, a.diag - b.diag}; }
  friend bool operator==(const GridCost&, const GridCost&) = default;
};

class OccupancyGrid {
 public:
  OccupancyGrid(double resolution, Point2 origin, int width, int height, Bounds bounds);

  double resolution() const { return resolution_; }
  Point2 origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Bounds& bounds() const { return bounds_; }
  std::size_t cell_count() const { return blocked_.size(); }

  bool in_grid(Cell c) const { return c.col >= 0 && c.row >= 0 && c.col < width_ && c.row < height_; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * width_ + c.col; }
  Cell cell_at(std::size_t index) const {
    return {static_cast<int>(index % width_), static_cast<int>(index / width_)};
  }
  bool blocked(Cell c) const { return blocked_[index(c)] != 0; }
  void set_blocked(Cell c, bool value) { blocked_[index(c)] = value ? 1 : 0; }
  std::size_t blocked_count() const;
  /// Row-major blocked flags.
  const std::uint8_t* blocked_data() const { return blocked_.data(); }

  Point2 center(Cell c) const {
    return {origin_.x + (c.col + 0.5) * resolution_, origin_.y + (c.row + 0.5) * resolution_};
  }
  /// Cell containing `p`; points on the far boundary map to the last cell.
  /// Empty when `p` lies outside the grid.
  std::optional<Cell> cell_of(Point2 p) const;

 private:
  double resolution_;
  Point2 origin_;
  int width_;
  int height_;
  Bounds bounds_;
  std::vector<std::uint8_t> blocked_;
};

struct Trajectory {
  std::vector<Point2> waypoints;
  double cumulative_cost = 0.0;
};

/// Blocks every cell whose center is outside the bounds or within
/// `agent_radius` of a virtual or fixed obstacle.
OccupancyGrid rasterize(const Workspace& ws, double resolution, double agent_radius);
inline OccupancyGrid rasterize(const Workspace& ws, const PlannerSettings& s) {
  return rasterize(ws, s.resolution, s.agent_radius);
}

/// Single-source grid distances. Unreachable cells hold no value.
class DistanceField {
 public:
  DistanceField(const OccupancyGrid& grid, Cell source);

  Cell source() const { return source_; }
  bool reachable(Cell c) const { return costs_[index_(c)].axis >= 0; }
  /// Precondition: reachable(c).
  GridCost cost(Cell c) const { return costs_[index_(c)]; }

 private:
  std::size_t index_(Cell c) const { return static_cast<std::size_t>(c.row) * width_ + c.col; }
  Cell source_;
  int width_;
  std::vector<GridCost> costs_;
};

struct GridPath {
  std::vector<Cell> cells;
  GridCost cost;
};

/// A* with octile heuristic, ties broken on (f, h, row, col). Throws
/// OutOfBounds, BlockedEndpoint or Unreachable.
GridPath plan_grid_path(const OccupancyGrid& grid, Cell from, Cell to);

/// Minimum-cost path from `from` to `to`, shortcut by line of sight. The
/// trajectory starts and ends at the exact requested points.
Trajectory plan_path(const OccupancyGrid& grid, Point2 from, Point2 to);

/// Optimal 8-connected grid cost between the cells containing the endpoints.
double path_cost(const OccupancyGrid& grid, Point2 from, Point2 to);

/// Occupancy grids keyed by the geometry that shapes them (bounds,
/// obstacles, resolution, agent radius), each with the distance fields built
/// on it so far. Items do not block cells, so workspaces that differ only in
/// item placement share one entry. Not safe for concurrent use.
class PlanCache {
 public:
  struct Entry {
    std::shared_ptr<const OccupancyGrid> grid;
    std::unordered_map<std::size_t, std::shared_ptr<const DistanceField>> fields;
    /// Values derived from this grid by callers, under caller-chosen keys.
    std::unordered_map<std::string, double> memo;
  };

  explicit PlanCache(std::size_t max_grids = 32, std::size_t max_field_cells = std::size_t{1} << 24);

  std::shared_ptr<Entry> entry_for(const Workspace& ws, const PlannerSettings& settings);
  /// Field toward `goal` on `entry`, built and stored on a miss.
  std::shared_ptr<const DistanceField> field(Entry& entry, Cell goal);

 private:
  std::size_t max_grids_;
  std::size_t max_field_cells_;
  std::size_t field_cells_ = 0;
  std::list<std::pair<std::string, std::shared_ptr<Entry>>> lru_;
  std::unordered_map<std::string, decltype(lru_)::iterator> index_;
};

/// Euclidean length of an observed polyline.
double observed_cost(std::span<const Point2> prefix);

/// True when every cell the segment [a, b] touches is unblocked.
bool segment_free(const OccupancyGrid& grid, Point2 a, Point2 b);

/// The optimal path from `from` toward the source of `to_goal`, choosing at
/// every step the successor closest to the straight chord from `from` to the
/// goal, then the smallest counterclockwise turn from the goal direction.
/// The rule refers to no axis, so it commutes with quarter-turn rotations
/// and translations of the grid.
std::vector<Cell> canonical_path(const OccupancyGrid& grid, const DistanceField& to_goal, Cell from);

/// Step cost between 8-neighbours.
inline GridCost step_cost(Cell a, Cell b) {
  return (a.col != b.col && a.row != b.row) ? GridCost{0, 1} : GridCost{1, 0};
}

}  // namespace legws
