#include "legws/qd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "legws/error.hpp"

namespace legws {

void MeasureDescriptor::validate() const {
  if (min_distance_bins < 1) throw std::invalid_argument("qd.min_distance_bins must be at least 1");
  if (!(min_distance_lo < min_distance_hi)) throw std::invalid_argument("qd.min_distance_range must be non-empty");
  if (ordering_cap < 1) throw std::invalid_argument("qd.ordering_cap must be at least 1");
  if (!(row_tolerance >= 0.0)) throw std::invalid_argument("qd.row_tolerance must be non-negative");
}

namespace {

double largest_radius(const Workspace& ws) {
  double r = 0.0;
  for (const Item& it : ws.items) r = std::max(r, it.radius);
  return r;
}

}  // namespace

MeasureDescriptor default_measure_descriptor(const Workspace& ws) {
  MeasureDescriptor d;
  d.min_distance_hi = ws.bounds.diagonal() / 2.0;
  d.row_tolerance = 2.0 * largest_radius(ws);
  return d;
}

std::string to_string(const CellKey& key) {
  return std::to_string(key.distance_bin) + "," + std::to_string(key.ordering_bin);
}

std::vector<std::size_t> reading_order(const Workspace& ws, double row_tolerance) {
  std::vector<std::size_t> by_height(ws.items.size());
  for (std::size_t i = 0; i < by_height.size(); ++i) by_height[i] = i;
  std::stable_sort(by_height.begin(), by_height.end(),
                   [&](std::size_t a, std::size_t b) { return ws.items[a].pos.y > ws.items[b].pos.y; });

  std::vector<std::size_t> out;
  std::size_t row_begin = 0;
  while (row_begin < by_height.size()) {
    const double anchor = ws.items[by_height[row_begin]].pos.y;
    std::size_t row_end = row_begin + 1;
    while (row_end < by_height.size() && anchor - ws.items[by_height[row_end]].pos.y <= row_tolerance) ++row_end;
    std::vector<std::size_t> row(by_height.begin() + static_cast<std::ptrdiff_t>(row_begin),
                                 by_height.begin() + static_cast<std::ptrdiff_t>(row_end));
    std::sort(row.begin(), row.end(), [&](std::size_t a, std::size_t b) {
      const double xa = ws.items[a].pos.x, xb = ws.items[b].pos.x;
      return xa < xb || (xa == xb && a < b);
    });
    out.insert(out.end(), row.begin(), row.end());
    row_begin = row_end;
  }
  return out;
}

std::uint64_t lehmer_rank(const std::vector<std::size_t>& perm, std::uint64_t cap) {
  const std::size_t n = perm.size();
  // factorial (n-1-k)! mod cap, built from the right
  std::vector<std::uint64_t> fact(n, 1 % cap);
  for (std::size_t k = n; k-- > 1;) {
    const std::uint64_t f = n - k;  // multiplier turning (n-1-k)! into (n-k)!
    fact[k - 1] = static_cast<std::uint64_t>((static_cast<unsigned __int128>(fact[k]) * f) % cap);
  }
  std::uint64_t rank = 0;
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t smaller = 0;
    for (std::size_t j = k + 1; j < n; ++j) {
      if (perm[j] < perm[k]) ++smaller;
    }
    rank = static_cast<std::uint64_t>((rank + static_cast<unsigned __int128>(smaller % cap) * fact[k]) % cap);
  }
  return rank;
}

Measurement measure(const Workspace& ws, const MeasureDescriptor& desc) {
  if (ws.items.size() < 2) throw TooFewItems("measure needs at least two items");
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ws.items.size(); ++i) {
    for (std::size_t j = i + 1; j < ws.items.size(); ++j) {
      closest = std::min(closest, distance(ws.items[i].pos, ws.items[j].pos));
    }
  }
  const double width = (desc.min_distance_hi - desc.min_distance_lo) / desc.min_distance_bins;
  // The nudge keeps exact bin edges (0.30 / 0.05) from rounding down.
  const double scaled = std::floor((closest - desc.min_distance_lo) / width + 1e-9);
  const int bin = static_cast<int>(std::clamp(scaled, 0.0, static_cast<double>(desc.min_distance_bins - 1)));

  const std::uint64_t rank = lehmer_rank(reading_order(ws, desc.row_tolerance), desc.ordering_cap);
  return {{bin, rank % desc.ordering_cap}, {closest, rank}};
}

void QDConfig::validate() const {
  if (init_iterations == 0 || init_iterations > total_iterations) {
    throw std::invalid_argument("qd.init_iterations must satisfy 0 < init_iterations <= total_iterations");
  }
  if (!(gaussian_sigma > 0.0)) throw std::invalid_argument("qd.gaussian_sigma must be positive");
  if (item_samples_per_item < 1) throw std::invalid_argument("qd.item_samples_per_item must be at least 1");
  if (obstacle_add_samples < 1) throw std::invalid_argument("qd.obstacle_add_samples must be at least 1");
  if (!(obstacle_side > 0.0)) throw std::invalid_argument("qd.obstacle_side must be positive");
  if (placement_retries < 1) throw std::invalid_argument("qd.placement_retries must be at least 1");
  if (descent_depth_cap < 1) throw std::invalid_argument("qd.descent_depth_cap must be at least 1");
  if (task.max_orders < 1) throw std::invalid_argument("qd.max_orders must be at least 1");
  if (!(planner.resolution > 0.0)) throw std::invalid_argument("planner.resolution must be positive");
  if (!(planner.agent_radius >= 0.0)) throw std::invalid_argument("planner.agent_radius must be non-negative");
  measure.validate();
  legibility.validate();
}

QDConfig default_qd_config(const Workspace& ws) {
  QDConfig c;
  c.gaussian_sigma = 0.05 * std::min(ws.bounds.width(), ws.bounds.height());
  c.obstacle_side = 8.0 * largest_radius(ws);
  if (!(c.obstacle_side > 0.0)) c.obstacle_side = 0.1 * std::min(ws.bounds.width(), ws.bounds.height());
  c.measure = default_measure_descriptor(ws);
  c.planner = default_planner_settings(ws.templ);
  c.task.return_home = ws.templ == Template::tabletop;
  return c;
}

namespace {

Point2 uniform_point(const Bounds& b, double margin, Rng& rng) {
  return {rng.uniform(b.min.x + margin, b.max.x - margin), rng.uniform(b.min.y + margin, b.max.y - margin)};
}

bool square_fits(const Bounds& b, double side) { return side < b.width() && side < b.height(); }

// Local checks done before the full (rasterizing) validation.
bool item_fits(const Workspace& ws, std::size_t i) {
  const Item& it = ws.items[i];
  for (std::size_t j = 0; j < i; ++j) {
    if (distance(it.pos, ws.items[j].pos) < it.radius + ws.items[j].radius - kGeomEps) return false;
  }
  for (const auto& poly : ws.fixed_obstacles) {
    if (disc_intersects({it.pos, it.radius}, poly)) return false;
  }
  return true;
}

}  // namespace

Workspace random_workspace(const Workspace& tmpl, const QDConfig& config, Rng& rng) {
  Workspace ws = tmpl;
  ws.virtual_obstacles.clear();
  ws.virtual_obstacles.shrink_to_fit();

  bool placed = false;
  for (std::size_t attempt = 0; attempt < config.placement_retries && !placed; ++attempt) {
    if (config.movable_items) {
      for (std::size_t i = 0; i < ws.items.size(); ++i) {
        bool ok = false;
        for (std::size_t t = 0; t < config.placement_retries && !ok; ++t) {
          ws.items[i].pos = uniform_point(ws.bounds, ws.items[i].radius, rng);
          ok = item_fits(ws, i);
        }
        if (!ok) throw PlacementFailure("could not place item '" + ws.items[i].id + "'");
      }
    }
    placed = workspace_valid(ws, config.planner);
    if (!placed && !config.movable_items) break;
  }
  if (!placed) throw PlacementFailure("could not place items with every item reachable");

  if (config.max_obstacles == 0 || !square_fits(ws.bounds, config.obstacle_side)) return ws;
  const std::size_t count = static_cast<std::size_t>(rng.index(config.max_obstacles + 1));
  for (std::size_t k = 0; k < count && ws.virtual_obstacles.size() < config.max_obstacles; ++k) {
    bool ok = false;
    for (std::size_t t = 0; t < config.placement_retries && !ok; ++t) {
      const Point2 c = uniform_point(ws.bounds, config.obstacle_side / 2.0, rng);
      auto next = try_apply_perturbation(ws, AddObstacle{ConvexPolygon::square(c, config.obstacle_side)}, config.planner);
      if (next) {
        ws = std::move(*next);
        ok = true;
      }
    }
    if (!ok) throw PlacementFailure("could not place virtual obstacle " + std::to_string(k));
  }
  return ws;
}

std::vector<Perturbation> available_perturbations(const Workspace& ws, const QDConfig& config, Rng& rng) {
  std::vector<Perturbation> out;
  if (config.movable_items) {
    for (std::size_t i = 0; i < ws.items.size(); ++i) {
      for (int k = 0; k < config.item_samples_per_item; ++k) {
        const Point2 p = ws.items[i].pos;
        const double dx = rng.normal(0.0, config.gaussian_sigma);
        const double dy = rng.normal(0.0, config.gaussian_sigma);
        out.push_back(MoveItem{i, {p.x + dx, p.y + dy}});
      }
    }
  }
  if (ws.virtual_obstacles.size() < config.max_obstacles && square_fits(ws.bounds, config.obstacle_side)) {
    for (int k = 0; k < config.obstacle_add_samples; ++k) {
      const Point2 c = uniform_point(ws.bounds, config.obstacle_side / 2.0, rng);
      out.push_back(AddObstacle{ConvexPolygon::square(c, config.obstacle_side)});
    }
  }
  for (std::size_t k = 0; k < ws.virtual_obstacles.size(); ++k) out.push_back(RemoveObstacle{k});
  return out;
}

namespace {

// The perturbed workspace before validation; empty when `p` names an
// element the workspace does not have.
std::optional<Workspace> mutate(const Workspace& ws, const Perturbation& p) {
  Workspace next = ws;
  if (const auto* move = std::get_if<MoveItem>(&p)) {
    if (move->item >= next.items.size()) return std::nullopt;
    next.items[move->item].pos = move->to;
  } else if (const auto* add = std::get_if<AddObstacle>(&p)) {
    next.virtual_obstacles.push_back(add->square);
    next.virtual_obstacles = merge_overlapping(std::move(next.virtual_obstacles));
  } else {
    const auto& remove = std::get<RemoveObstacle>(p);
    if (remove.index >= next.virtual_obstacles.size()) return std::nullopt;
    next.virtual_obstacles.erase(next.virtual_obstacles.begin() + static_cast<std::ptrdiff_t>(remove.index));
  }
  return next;
}

}  // namespace

std::optional<Workspace> try_apply_perturbation(const Workspace& ws, const Perturbation& p,
                                                const PlannerSettings& settings, PlanCache* cache) {
  auto next = mutate(ws, p);
  if (!next || !workspace_valid(*next, settings, cache)) return std::nullopt;
  return next;
}

Workspace apply_perturbation(const Workspace& ws, const Perturbation& p, const PlannerSettings& settings,
                             PlanCache* cache) {
  auto next = mutate(ws, p);
  if (!next) throw InvalidResult("perturbation does not match the workspace");
  if (const auto v = check_workspace(*next, settings, cache)) throw InvalidResult(v->path + ": " + v->reason);
  return std::move(*next);
}

Objective make_legibility_objective(const Task& task, const QDConfig& config) {
  struct State {
    Task task;
    LegibilityParams params;
    TaskConfig task_config;
    PlannerSettings planner;
    OrderSample orders;
    std::unordered_map<std::string, double> cache;
    PlanCache plans;
  };
  auto state = std::make_shared<State>(
      State{task, config.legibility, config.task, config.planner, sample_orders(task, config.task), {}, PlanCache{}});
  return [state](const Workspace& ws) {
    std::string key = workspace_fingerprint(ws);
    if (auto it = state->cache.find(key); it != state->cache.end()) return it->second;
    if (state->cache.size() > 200000) state->cache.clear();
    const double score = -task_legibility_score(ws, state->planner, state->task, state->params, state->task_config,
                                              &state->plans, &state->orders);
    state->cache.emplace(std::move(key), score);
    return score;
  };
}

DescentResult improve_via_gradient_descent(const Workspace& ws, double score, const Objective& objective,
                                           const QDConfig& config, Rng& rng, PlanCache* cache) {
  PlanCache local;
  if (!cache) cache = &local;
  DescentResult out{ws, score, 0, 0, false};
  for (std::size_t sweep = 0; sweep < config.descent_depth_cap; ++sweep) {
    ++out.sweeps;
    std::optional<Workspace> best;
    double best_score = out.score;
    for (const Perturbation& p : available_perturbations(out.workspace, config, rng)) {
      auto candidate = try_apply_perturbation(out.workspace, p, config.planner, cache);
      if (!candidate) continue;
      const double s = objective(*candidate);
      ++out.evaluations;
      if (s < best_score) {
        best_score = s;
        best = std::move(candidate);
      }
    }
    if (!best) return out;
    out.workspace = std::move(*best);
    out.score = best_score;
  }
  out.truncated = true;
  return out;
}

bool Archive::offer(const CellKey& key, Elite elite) {
  auto it = cells_.find(key);
  if (it == cells_.end()) {
    cells_.emplace(key, std::move(elite));
    return true;
  }
  if (elite.score < it->second.score) {
    it->second = std::move(elite);
    return true;
  }
  return false;
}

const std::pair<const CellKey, Elite>& Archive::best() const {
  auto best = cells_.begin();
  for (auto it = cells_.begin(); it != cells_.end(); ++it) {
    if (it->second.score < best->second.score) best = it;
  }
  return *best;
}

MapElitesResult map_elites(const Workspace& tmpl, const Objective& objective, const QDConfig& config,
                           const ProgressFn& progress) {
  config.validate();
  Rng rng(config.seed);
  PlanCache plans;
  MapElitesResult out;

  auto insert = [&](IterationRecord& rec, Workspace ws, double score) {
    const Measurement m = measure(ws, config.measure);
    rec.cell = m.key;
    rec.score = score;
    rec.inserted = out.archive.offer(m.key, Elite{std::move(ws), score, m.features});
  };

  for (std::size_t i = 1; i <= config.total_iterations; ++i) {
    IterationRecord rec;
    rec.iteration = i;
    if (i <= config.init_iterations) {
      std::optional<Workspace> ws;
      if (i == 1 && config.include_baseline && workspace_valid(tmpl, config.planner)) {
        ws = tmpl;
      } else {
        try {
          ws = random_workspace(tmpl, config, rng);
        } catch (const PlacementFailure&) {
          ++out.placement_failures;
        }
      }
      if (ws) {
        const double score = objective(*ws);
        insert(rec, std::move(*ws), score);
      }
      if (i == config.init_iterations && out.archive.empty()) {
        throw EmptyArchive("no valid workspace was produced during initialization");
      }
    } else {
      rec.improvement_phase = true;
      auto it = out.archive.cells().begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng.index(out.archive.size())));
      DescentResult d = improve_via_gradient_descent(it->second.workspace, it->second.score, objective, config, rng, &plans);
      insert(rec, std::move(d.workspace), d.score);
    }
    out.log.push_back(rec);
    if (progress) progress(i, out.archive);
  }
  return out;
}

}  // namespace legws
