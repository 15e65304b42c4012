#include "legws/planner.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

#include "legws/error.hpp"

namespace legws {

namespace {

constexpr std::array<std::pair<int, int>, 8> kMoves{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

// Diagonal steps may not squeeze between two cells when either of the
// orthogonal cells they pass is blocked.
bool can_step(const OccupancyGrid& grid, Cell from, int dc, int dr) {
  const Cell to{from.col + dc, from.row + dr};
  if (!grid.in_grid(to) || grid.blocked(to)) return false;
  if (dc != 0 && dr != 0) {
    if (grid.blocked({from.col + dc, from.row}) || grid.blocked({from.col, from.row + dr})) return false;
  }
  return true;
}

GridCost octile(Cell a, Cell b) {
  const int dx = std::abs(a.col - b.col);
  const int dy = std::abs(a.row - b.row);
  return {std::max(dx, dy) - std::min(dx, dy), std::min(dx, dy)};
}

Cell require_cell(const OccupancyGrid& grid, Point2 p, const char* which) {
  if (!is_finite(p)) throw OutOfBounds(std::string(which) + " is not finite");
  const auto cell = grid.cell_of(p);
  if (!cell) throw OutOfBounds(std::string(which) + " lies outside the grid");
  if (grid.blocked(*cell)) throw BlockedEndpoint(std::string(which) + " lies in a blocked cell");
  return *cell;
}

// Half-plane index of `m` measured counterclockwise from `ref`: 0 for [0, pi).
int half_of(std::int64_t rx, std::int64_t ry, std::int64_t mx, std::int64_t my) {
  const std::int64_t c = rx * my - ry * mx;
  const std::int64_t d = rx * mx + ry * my;
  return (c > 0 || (c == 0 && d > 0)) ? 0 : 1;
}

}  // namespace

OccupancyGrid::OccupancyGrid(double resolution, Point2 origin, int width, int height, Bounds bounds)
    : resolution_(resolution),
      origin_(origin),
      width_(width),
      height_(height),
      bounds_(bounds),
      blocked_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {}

std::size_t OccupancyGrid::blocked_count() const {
  return static_cast<std::size_t>(std::count(blocked_.begin(), blocked_.end(), std::uint8_t{1}));
}

std::optional<Cell> OccupancyGrid::cell_of(Point2 p) const {
  const double fx = (p.x - origin_.x) / resolution_;
  const double fy = (p.y - origin_.y) / resolution_;
  constexpr double kSlack = 1e-9;
  if (fx < -kSlack || fy < -kSlack || fx > width_ + kSlack || fy > height_ + kSlack) return std::nullopt;
  const int col = std::clamp(static_cast<int>(std::floor(fx)), 0, width_ - 1);
  const int row = std::clamp(static_cast<int>(std::floor(fy)), 0, height_ - 1);
  return Cell{col, row};
}

OccupancyGrid rasterize(const Workspace& ws, double resolution, double agent_radius) {
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be positive");
  if (!(agent_radius >= 0.0)) throw std::invalid_argument("agent_radius must be non-negative");
  const Bounds& b = ws.bounds;
  if (!(b.width() > 0.0) || !(b.height() > 0.0)) throw EmptyWorkspace("workspace bounds have zero area");

  const int width = std::max(1, static_cast<int>(std::ceil(b.width() / resolution - 1e-9)));
  const int height = std::max(1, static_cast<int>(std::ceil(b.height() / resolution - 1e-9)));
  OccupancyGrid grid(resolution, b.min, width, height, b);

  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      if (!b.contains(grid.center({col, row}), 0.0)) grid.set_blocked({col, row}, true);
    }
  }

  auto stamp = [&](const ConvexPolygon& poly) {
    double lox = poly.vertices()[0].x, hix = lox, loy = poly.vertices()[0].y, hiy = loy;
    for (const Point2& v : poly.vertices()) {
      lox = std::min(lox, v.x);
      hix = std::max(hix, v.x);
      loy = std::min(loy, v.y);
      hiy = std::max(hiy, v.y);
    }
    const double pad = agent_radius + resolution;
    const int c0 = std::max(0, static_cast<int>(std::floor((lox - pad - b.min.x) / resolution)));
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil((hix + pad - b.min.x) / resolution)));
    const int r0 = std::max(0, static_cast<int>(std::floor((loy - pad - b.min.y) / resolution)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil((hiy + pad - b.min.y) / resolution)));
    for (int row = r0; row <= r1; ++row) {
      for (int col = c0; col <= c1; ++col) {
        const Point2 c = grid.center({col, row});
        const bool hit = agent_radius > 0.0 ? poly.distance_to(c) <= agent_radius : poly.contains(c);
        if (hit) grid.set_blocked({col, row}, true);
      }
    }
  };
  for (const auto& poly : ws.virtual_obstacles) stamp(poly);
  for (const auto& poly : ws.fixed_obstacles) stamp(poly);
  return grid;
}

DistanceField::DistanceField(const OccupancyGrid& grid, Cell source)
    : source_(source), width_(grid.width()), costs_(grid.cell_count(), GridCost{-1, -1}) {
  if (!grid.in_grid(source) || grid.blocked(source)) return;
  const int w = grid.width();
  const int h = grid.height();
  const std::uint8_t* blocked = grid.blocked_data();
  std::vector<double> units(grid.cell_count(), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> settled(grid.cell_count(), 0);

  // Buckets of width 1. Every step costs at least 1, so cells sharing a
  // bucket cannot improve one another and each bucket may be settled in any
  // order without losing exactness. A step costs less than 2, so only three
  // buckets are live at once and a ring of three is enough.
  std::array<std::vector<std::uint32_t>, 3> ring;
  const std::size_t src = grid.index(source);
  costs_[src] = {0, 0};
  units[src] = 0.0;
  ring[0].push_back(static_cast<std::uint32_t>(src));
  std::size_t pending = 1;
  for (std::size_t b = 0; pending > 0; ++b) {
    auto& bucket = ring[b % 3];
    for (std::size_t k = 0; k < bucket.size(); ++k) {
      const std::uint32_t idx = bucket[k];
      --pending;
      if (settled[idx] || static_cast<std::size_t>(units[idx]) != b) continue;
      settled[idx] = 1;
      const int col = static_cast<int>(idx % static_cast<std::uint32_t>(w));
      const int row = static_cast<int>(idx / static_cast<std::uint32_t>(w));
      const GridCost here = costs_[idx];
      for (const auto& [dc, dr] : kMoves) {
        const int nc = col + dc;
        const int nr = row + dr;
        if (nc < 0 || nr < 0 || nc >= w || nr >= h) continue;
        const std::size_t nidx = static_cast<std::size_t>(nr) * w + nc;
        if (blocked[nidx] || settled[nidx]) continue;
        const bool diagonal = dc != 0 && dr != 0;
        if (diagonal && (blocked[idx + dc] || blocked[static_cast<std::size_t>(row + dr) * w + col])) continue;
        const GridCost cand = diagonal ? GridCost{here.axis, here.diag + 1} : GridCost{here.axis + 1, here.diag};
        const double cu = cand.units();
        if (cu < units[nidx]) {
          units[nidx] = cu;
          costs_[nidx] = cand;
          ring[static_cast<std::size_t>(cu) % 3].push_back(static_cast<std::uint32_t>(nidx));
          ++pending;
        }
      }
    }
    bucket.clear();
  }
}

GridPath plan_grid_path(const OccupancyGrid& grid, Cell from, Cell to) {
  if (!grid.in_grid(from) || !grid.in_grid(to)) throw OutOfBounds("endpoint outside the grid");
  if (grid.blocked(from) || grid.blocked(to)) throw BlockedEndpoint("endpoint lies in a blocked cell");

  // (f, h, row, col), smallest first.
  using Key = std::tuple<double, double, int, int>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> open;
  std::vector<GridCost> g(grid.cell_count(), GridCost{-1, -1});
  std::vector<std::int64_t> parent(grid.cell_count(), -1);
  std::vector<std::uint8_t> closed(grid.cell_count(), 0);

  g[grid.index(from)] = {0, 0};
  const double h0 = octile(from, to).units();
  open.push({h0, h0, from.row, from.col});
  while (!open.empty()) {
    const auto [f, h, row, col] = open.top();
    open.pop();
    const Cell c{col, row};
    const std::size_t idx = grid.index(c);
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (c == to) break;
    for (const auto& [dc, dr] : kMoves) {
      if (!can_step(grid, c, dc, dr)) continue;
      const Cell n{c.col + dc, c.row + dr};
      const std::size_t nidx = grid.index(n);
      if (closed[nidx]) continue;
      const GridCost cand = g[idx] + step_cost(c, n);
      if (g[nidx].axis < 0 || cand.units() < g[nidx].units()) {
        g[nidx] = cand;
        parent[nidx] = static_cast<std::int64_t>(idx);
        const GridCost hn = octile(n, to);
        open.push({(cand + hn).units(), hn.units(), n.row, n.col});
      }
    }
  }
  const std::size_t goal_idx = grid.index(to);
  if (!closed[goal_idx]) throw Unreachable("no collision-free path between endpoints");

  GridPath out;
  out.cost = g[goal_idx];
  for (std::int64_t i = static_cast<std::int64_t>(goal_idx); i >= 0; i = parent[static_cast<std::size_t>(i)]) {
    out.cells.push_back(grid.cell_at(static_cast<std::size_t>(i)));
    if (static_cast<std::size_t>(i) == grid.index(from)) break;
  }
  std::reverse(out.cells.begin(), out.cells.end());
  return out;
}

Trajectory plan_path(const OccupancyGrid& grid, Point2 from, Point2 to) {
  const Cell a = require_cell(grid, from, "start point");
  const Cell b = require_cell(grid, to, "end point");
  if (from == to) return {{from}, 0.0};

  const GridPath raw = plan_grid_path(grid, a, b);
  std::vector<Point2> poly;
  poly.reserve(raw.cells.size() + 2);
  poly.push_back(from);
  for (const Cell& c : raw.cells) {
    const Point2 p = grid.center(c);
    if (!(p == poly.back())) poly.push_back(p);
  }
  if (!(to == poly.back())) poly.push_back(to);

  Trajectory out;
  out.waypoints.push_back(poly.front());
  std::size_t anchor = 0;
  while (anchor + 1 < poly.size()) {
    std::size_t next = anchor + 1;
    for (std::size_t j = poly.size() - 1; j > anchor + 1; --j) {
      if (segment_free(grid, poly[anchor], poly[j])) {
        next = j;
        break;
      }
    }
    out.waypoints.push_back(poly[next]);
    anchor = next;
  }
  out.cumulative_cost = observed_cost(out.waypoints);
  return out;
}

double path_cost(const OccupancyGrid& grid, Point2 from, Point2 to) {
  const Cell a = require_cell(grid, from, "start point");
  const Cell b = require_cell(grid, to, "end point");
  if (a == b) return 0.0;
  return plan_grid_path(grid, a, b).cost.meters(grid.resolution());
}

double observed_cost(std::span<const Point2> prefix) {
  double total = 0.0;
  for (std::size_t i = 1; i < prefix.size(); ++i) total += distance(prefix[i - 1], prefix[i]);
  return total;
}

bool segment_free(const OccupancyGrid& grid, Point2 a, Point2 b) {
  const auto from = grid.cell_of(a), to = grid.cell_of(b);
  if (!from || !to) return false;
  auto free = [&](int c, int r) { return grid.in_grid({c, r}) && !grid.blocked({c, r}); };
  if (!free(from->col, from->row) || !free(to->col, to->row)) return false;

  // Cell-by-cell traversal of every cell the segment touches. Passing
  // exactly through a corner touches both side cells.
  const double res = grid.resolution();
  const double ux = (a.x - grid.origin().x) / res, uy = (a.y - grid.origin().y) / res;
  const double dx = (b.x - a.x) / res, dy = (b.y - a.y) / res;
  const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  int c = from->col, r = from->row;
  const double step_x = sx ? 1.0 / std::abs(dx) : inf;
  const double step_y = sy ? 1.0 / std::abs(dy) : inf;
  double next_x = sx > 0 ? (c + 1 - ux) / dx : (sx < 0 ? (c - ux) / dx : inf);
  double next_y = sy > 0 ? (r + 1 - uy) / dy : (sy < 0 ? (r - uy) / dy : inf);
  const int limit = std::abs(to->col - c) + std::abs(to->row - r);
  for (int moves = 0; moves < limit && !(c == to->col && r == to->row); ++moves) {
    if (std::abs(next_x - next_y) <= 1e-12) {
      if (!free(c + sx, r) || !free(c, r + sy)) return false;
      c += sx;
      r += sy;
      next_x += step_x;
      next_y += step_y;
      ++moves;
    } else if (next_x < next_y) {
      c += sx;
      next_x += step_x;
    } else {
      r += sy;
      next_y += step_y;
    }
    if (!free(c, r)) return false;
  }
  return c == to->col && r == to->row;
}

std::vector<Cell> canonical_path(const OccupancyGrid& grid, const DistanceField& to_goal, Cell from) {
  if (!grid.in_grid(from) || !to_goal.reachable(from)) throw Unreachable("start cell cannot reach the goal");
  const Cell goal = to_goal.source();
  const std::int64_t chord_x = goal.col - from.col;
  const std::int64_t chord_y = goal.row - from.row;

  std::vector<Cell> path{from};
  Cell c = from;
  while (!(c == goal)) {
    const GridCost here = to_goal.cost(c);
    const std::int64_t rx = goal.col - c.col;
    const std::int64_t ry = goal.row - c.row;
    std::optional<Cell> best;
    std::int64_t best_dev = 0;
    int best_dc = 0, best_dr = 0;
    for (const auto& [dc, dr] : kMoves) {
      if (!can_step(grid, c, dc, dr)) continue;
      const Cell n{c.col + dc, c.row + dr};
      if (!to_goal.reachable(n) || !(to_goal.cost(n) + step_cost(c, n) == here)) continue;
      const std::int64_t dev = std::abs(chord_x * (n.row - from.row) - chord_y * (n.col - from.col));
      bool better = !best || dev < best_dev;
      if (best && dev == best_dev) {
        const int h_new = half_of(rx, ry, dc, dr);
        const int h_old = half_of(rx, ry, best_dc, best_dr);
        better = h_new < h_old ||
                 (h_new == h_old && static_cast<std::int64_t>(best_dc) * dr - static_cast<std::int64_t>(best_dr) * dc > 0);
      }
      if (better) {
        best = n;
        best_dev = dev;
        best_dc = dc;
        best_dr = dr;
      }
    }
    if (!best) throw Unreachable("distance field has no descending neighbour");
    c = *best;
    path.push_back(c);
  }
  return path;
}

PlanCache::PlanCache(std::size_t max_grids, std::size_t max_field_cells)
    : max_grids_(std::max<std::size_t>(1, max_grids)), max_field_cells_(max_field_cells) {}

std::shared_ptr<PlanCache::Entry> PlanCache::entry_for(const Workspace& ws, const PlannerSettings& settings) {
  std::string key;
  key.reserve(64 + 16 * 4 * (ws.virtual_obstacles.size() + ws.fixed_obstacles.size()));
  auto put = [&key](double v) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof v);
    key.append(buf, sizeof buf);
  };
  put(settings.resolution);
  put(settings.agent_radius);
  put(ws.bounds.min.x);
  put(ws.bounds.min.y);
  put(ws.bounds.max.x);
  put(ws.bounds.max.y);
  for (const auto* list : {&ws.virtual_obstacles, &ws.fixed_obstacles}) {
    key.push_back('|');
    for (const auto& poly : *list) {
      key.push_back('#');
      for (const Point2& v : poly.vertices()) {
        put(v.x);
        put(v.y);
      }
    }
  }
  if (auto it = index_.find(key); it != index_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
  }
  auto entry = std::make_shared<Entry>();
  entry->grid = std::make_shared<const OccupancyGrid>(rasterize(ws, settings));
  lru_.emplace_front(key, entry);
  index_.emplace(std::move(key), lru_.begin());
  while (lru_.size() > max_grids_) {
    field_cells_ -= lru_.back().second->fields.size() * lru_.back().second->grid->cell_count();
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
  return entry;
}

std::shared_ptr<const DistanceField> PlanCache::field(Entry& entry, Cell goal) {
  const std::size_t idx = entry.grid->index(goal);
  if (auto it = entry.fields.find(idx); it != entry.fields.end()) return it->second;
  if (field_cells_ + entry.grid->cell_count() > max_field_cells_) {
    for (auto& [key, e] : lru_) {
      e->fields.clear();
      e->memo.clear();
    }
    field_cells_ = 0;
  }
  auto f = std::make_shared<const DistanceField>(*entry.grid, goal);
  entry.fields.emplace(idx, f);
  field_cells_ += entry.grid->cell_count();
  return f;
}

}  // namespace legws
