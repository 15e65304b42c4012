#pragma once

// Independent reference implementations and fixtures shared by the tests.
// Oracles here deliberately avoid the engine's own helpers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "legws/io.hpp"
#include "legws/legibility.hpp"
#include "legws/planner.hpp"
#include "legws/random.hpp"
#include "legws/task.hpp"
#include "legws/workspace.hpp"

namespace support {

using namespace legws;

/// Step counts of a shortest 8-connected path without corner cutting, from a
/// textbook Dijkstra over floating-point costs. Empty when unreachable.
struct OracleCost {
  long axis = 0;
  long diag = 0;
  double units() const { return axis + diag * std::sqrt(2.0); }
};

inline std::vector<std::optional<OracleCost>> oracle_dijkstra(const OccupancyGrid& g, Cell src) {
  const int w = g.width(), h = g.height();
  std::vector<std::optional<OracleCost>> best(static_cast<std::size_t>(w) * h);
  auto id = [&](int c, int r) { return static_cast<std::size_t>(r) * w + c; };
  auto free = [&](int c, int r) { return c >= 0 && r >= 0 && c < w && r < h && !g.blocked(Cell{c, r}); };
  if (!free(src.col, src.row)) return best;
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  best[id(src.col, src.row)] = OracleCost{};
  pq.push({0.0, id(src.col, src.row)});
  std::vector<bool> done(best.size(), false);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = true;
    const int c = static_cast<int>(u % w), r = static_cast<int>(u / w);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (!dc && !dr) continue;
        if (!free(c + dc, r + dr)) continue;
        const bool diag = dc && dr;
        if (diag && (!free(c + dc, r) || !free(c, r + dr))) continue;
        OracleCost next = *best[u];
        (diag ? next.diag : next.axis) += 1;
        auto& slot = best[id(c + dc, r + dr)];
        if (!slot || next.units() < slot->units() - 1e-9) {
          slot = next;
          pq.push({next.units(), id(c + dc, r + dr)});
        }
      }
    }
  }
  return best;
}

/// Random grid with roughly `density` of its cells blocked.
inline OccupancyGrid random_grid(Rng& rng, int w, int h, double res, double density) {
  const Bounds b{{0, 0}, {w * res, h * res}};
  OccupancyGrid g(res, {0, 0}, w, h, b);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) g.set_blocked({c, r}, rng.uniform() < density);
  return g;
}

inline Cell random_free_cell(Rng& rng, const OccupancyGrid& g) {
  while (true) {
    const Cell c{static_cast<int>(rng.index(g.width())), static_cast<int>(rng.index(g.height()))};
    if (!g.blocked(c)) return c;
  }
}

inline double polyline_length(const std::vector<Point2>& pts) {
  double s = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) s += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  return s;
}

/// Goal posterior by hand: Dijkstra costs from the oracle, explicit exponentials.
inline std::map<std::string, double> oracle_posterior(const OccupancyGrid& g, double diagonal, Point2 start,
                                                      const std::vector<Point2>& observed,
                                                      const std::vector<Goal>& goals, double beta) {
  auto cell = [&](Point2 p) { return *g.cell_of(p); };
  const Cell s = cell(start), q = cell(observed.back());
  const double walked = polyline_length(observed);
  std::vector<double> w;
  for (const Goal& goal : goals) {
    const auto field = oracle_dijkstra(g, cell(goal.position));
    const double to_goal = field[g.index(q)]->units() * g.resolution();
    const double optimal = field[g.index(s)]->units() * g.resolution();
    w.push_back(std::exp(-beta * (walked + to_goal - optimal) / diagonal));
  }
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < goals.size(); ++i) out[goals[i].id] = w[i] / z;
  return out;
}

/// Free-space grid cost in cells: the octile distance.
inline double octile(Cell a, Cell b) {
  const double dx = std::abs(a.col - b.col), dy = std::abs(a.row - b.row);
  return std::max(dx, dy) - std::min(dx, dy) + std::min(dx, dy) * std::sqrt(2.0);
}

/// Environment legibility in free space for a true goal reached by a pure axis or pure
/// diagonal move, where the optimal path is unique. Costs are closed-form.
inline double oracle_env_legibility_free(Cell s, const std::vector<Cell>& goals, std::size_t truth,
                                         const LegibilityParams& params, double res, double diagonal) {
  const Cell g = goals[truth];
  const int dx = (g.col > s.col) - (g.col < s.col), dy = (g.row > s.row) - (g.row < s.row);
  const int n = std::max(std::abs(g.col - s.col), std::abs(g.row - s.row));
  const double step = (dx && dy) ? std::sqrt(2.0) : 1.0;
  double total = 0.0;
  for (double f : params.checkpoints) {
    const int k = static_cast<int>(std::floor(f * n + 1e-9));
    const Cell q{s.col + k * dx, s.row + k * dy};
    std::vector<double> w;
    for (const Cell& other : goals) {
      const double e = (k * step + octile(q, other) - octile(s, other)) * res / diagonal;
      w.push_back(std::exp(-params.beta * e));
    }
    const double z = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= z;
    bool unique = true;
    double runner_up = goals.size() == 1 ? 0.0 : -1.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i == truth) continue;
      if (w[i] >= w[truth] - 1e-12) unique = false;
      runner_up = std::max(runner_up, w[i]);
    }
    if (!unique) total += -params.penalty_c;
    else total += goals.size() == 1 ? 1.0 : w[truth] - runner_up;
  }
  return total / params.checkpoints.size();
}

/// A random grid with a start cell and distinct goal cells reachable from it.
struct Instance {
  OccupancyGrid grid;
  double diagonal;
  Point2 start;
  std::vector<Goal> goals;
};

inline Instance random_instance(Rng& rng, int max_side, std::size_t max_goals, double density) {
  while (true) {
    const int w = 8 + static_cast<int>(rng.index(max_side - 7)), h = 8 + static_cast<int>(rng.index(max_side - 7));
    OccupancyGrid grid = random_grid(rng, w, h, 0.05, density);
    const Cell s = random_free_cell(rng, grid);
    const auto field = oracle_dijkstra(grid, s);
    std::vector<Cell> reachable;
    for (std::size_t i = 0; i < field.size(); ++i)
      if (field[i] && !(grid.cell_at(i) == s)) reachable.push_back(grid.cell_at(i));
    if (reachable.size() < max_goals + 2) continue;
    const std::size_t n = 1 + rng.index(max_goals);
    std::vector<Goal> goals;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t pick = rng.index(reachable.size());
      goals.push_back({"g" + std::to_string(k), grid.center(reachable[pick])});
      reachable.erase(reachable.begin() + static_cast<long>(pick));
    }
    const double diagonal = std::hypot(w * 0.05, h * 0.05);
    const Point2 start = grid.center(s);
    return {std::move(grid), diagonal, start, std::move(goals)};
  }
}

/// Random walk over free 8-neighbours (no corner cutting) from `start`.
inline std::vector<Point2> random_walk(Rng& rng, const OccupancyGrid& g, Point2 start, int steps) {
  std::vector<Point2> pts{start};
  Cell c = *g.cell_of(start);
  auto free = [&](int col, int row) { return g.in_grid({col, row}) && !g.blocked({col, row}); };
  for (int k = 0; k < steps; ++k) {
    std::vector<Cell> options;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if ((!dc && !dr) || !free(c.col + dc, c.row + dr)) continue;
        if (dc && dr && (!free(c.col + dc, c.row) || !free(c.col, c.row + dr))) continue;
        options.push_back({c.col + dc, c.row + dr});
      }
    if (options.empty()) break;
    c = options[rng.index(options.size())];
    pts.push_back(g.center(c));
  }
  return pts;
}

/// Empty workspace with the given items; tabletop planner settings.
inline Workspace open_workspace(double width, double height, Point2 start, const std::vector<Item>& items,
                                Template t = Template::tabletop) {
  Workspace ws;
  ws.bounds = {{0, 0}, {width, height}};
  ws.start = start;
  ws.items = items;
  ws.templ = t;
  return ws;
}

inline Task all_human(const std::vector<std::string>& items,
                      const std::vector<std::pair<std::string, std::string>>& precedence = {}) {
  Task t;
  for (const auto& item : items) t.subtasks.push_back({"t_" + item, item, Agent::human});
  for (const auto& [a, b] : precedence) t.precedence.push_back({"t_" + a, "t_" + b});
  return t;
}

inline ScenarioDocument document(const Workspace& ws, const Task& task) {
  ScenarioDocument doc;
  doc.workspace = ws;
  doc.task = task;
  doc.qd = default_qd_config(ws);
  doc.sim.return_home = ws.templ == Template::tabletop;
  return doc;
}

inline std::string scenario_path(const std::string& name) { return std::string(LEGWS_SCENARIO_DIR) + "/" + name; }

}  // namespace support
