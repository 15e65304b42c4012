#include "legws/legibility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "legws/error.hpp"

namespace legws {

void LegibilityParams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("legibility.beta must be positive");
  if (!(penalty_c >= 0.0) || !std::isfinite(penalty_c)) {
    throw std::invalid_argument("legibility.penalty_c must be non-negative");
  }
  if (checkpoints.empty()) throw std::invalid_argument("legibility.checkpoints must not be empty");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (!(checkpoints[i] > 0.0 && checkpoints[i] <= 1.0)) {
      throw std::invalid_argument("legibility.checkpoints[" + std::to_string(i) + "] must lie in (0, 1]");
    }
    if (i > 0 && !(checkpoints[i] > checkpoints[i - 1])) {
      throw std::invalid_argument("legibility.checkpoints must be strictly increasing");
    }
  }
}

const std::string& Belief::argmax() const {
  auto best = entries.begin();
  for (auto it = entries.begin(); it != entries.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

double Belief::max_probability() const { return entries.at(argmax()); }

bool Belief::in_argmax(const std::string& id, double tol) const {
  const double p = entries.at(id);
  return std::all_of(entries.begin(), entries.end(), [&](const auto& e) { return e.second <= p + tol; });
}

CostModel::CostModel(const Workspace& ws, const PlannerSettings& settings, PlanCache* cache)
    : normalizer_(ws.bounds.diagonal()), cache_(cache) {
  if (cache_) {
    entry_ = cache_->entry_for(ws, settings);
    grid_ = entry_->grid;
  } else {
    grid_ = std::make_shared<const OccupancyGrid>(rasterize(ws, settings));
  }
}

CostModel::CostModel(OccupancyGrid grid, double normalizer)
    : grid_(std::make_shared<const OccupancyGrid>(std::move(grid))), normalizer_(normalizer) {
  if (!(normalizer_ > 0.0)) throw std::invalid_argument("cost normalizer must be positive");
}

const DistanceField& CostModel::field_to(Cell goal) const {
  const std::size_t key = grid_->index(goal);
  auto it = fields_.find(key);
  if (it == fields_.end()) {
    auto f = cache_ ? cache_->field(*entry_, goal) : std::make_shared<const DistanceField>(*grid_, goal);
    it = fields_.emplace(key, std::move(f)).first;
  }
  return *it->second;
}

Cell CostModel::cell_of(Point2 p) const {
  const auto c = is_finite(p) ? grid_->cell_of(p) : std::nullopt;
  if (!c) throw OutOfBounds("point lies outside the workspace grid");
  return *c;
}

namespace {

// Softmax into `out`, shifted by the largest exponent.
void softmax(std::span<const double> exponents, std::vector<double>& out) {
  const double top = *std::max_element(exponents.begin(), exponents.end());
  out.resize(exponents.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    out[i] = std::exp(exponents[i] - top);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

// Gap between the two largest entries; 1 for a single entry.
double top_two_gap(std::span<const double> p) {
  if (p.size() < 2) return 1.0;
  double first = -1.0, second = -1.0;
  for (double v : p) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

void require_unique_ids(std::span<const std::string> ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (ids[i] == ids[j]) throw std::invalid_argument("duplicate goal id '" + ids[i] + "'");
    }
  }
}

Belief normalize(std::span<const std::string> ids, std::span<const double> exponents) {
  std::vector<double> p;
  softmax(exponents, p);
  Belief out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!out.entries.emplace(ids[i], p[i]).second) {
      throw std::invalid_argument("duplicate goal id '" + ids[i] + "'");
    }
  }
  return out;
}

void require_goals(std::span<const Goal> goals) {
  if (goals.empty()) throw EmptyGoalSet("goal set is empty");
}

}  // namespace

Belief belief_from_costs(std::span<const GoalCosts> costs, double beta, double normalizer) {
  if (costs.empty()) throw EmptyGoalSet("goal set is empty");
  std::vector<std::string> ids;
  std::vector<double> exps;
  for (const GoalCosts& c : costs) {
    ids.push_back(c.id);
    exps.push_back(-beta * ((c.observed + c.remaining - c.optimal) / normalizer));
  }
  return normalize(ids, exps);
}

Belief goal_posterior(const CostModel& model, Point2 start, std::span<const Point2> observed,
                      std::span<const Goal> goals, const LegibilityParams& params) {
  require_goals(goals);
  if (observed.empty()) throw std::invalid_argument("observed prefix is empty");
  const OccupancyGrid& grid = model.grid();
  if (distance(observed.front(), start) > grid.resolution()) {
    throw std::invalid_argument("observed prefix does not begin at the start");
  }
  const Cell s = model.cell_of(start);
  const Cell q = model.cell_of(observed.back());
  if (grid.blocked(q)) throw UnreachableGoal("current position lies in a blocked cell");
  const double walked = observed_cost(observed);

  std::vector<GoalCosts> costs;
  costs.reserve(goals.size());
  for (const Goal& g : goals) {
    const DistanceField& field = model.field_to(model.cell_of(g.position));
    if (!field.reachable(s) || !field.reachable(q)) throw UnreachableGoal("goal '" + g.id + "' is unreachable");
    costs.push_back({g.id, walked, field.cost(q).meters(grid.resolution()), field.cost(s).meters(grid.resolution())});
  }
  return belief_from_costs(costs, params.beta, model.normalizer());
}

Belief goal_posterior(const Workspace& ws, const PlannerSettings& settings, Point2 start,
                      std::span<const Point2> observed, std::span<const Goal> goals, const LegibilityParams& params) {
  const CostModel model(ws, settings);
  return goal_posterior(model, start, observed, goals, params);
}

double prediction_margin(const Belief& belief) {
  if (belief.entries.size() < 2) return 1.0;
  std::vector<double> p;
  for (const auto& [id, v] : belief.entries) p.push_back(v);
  return top_two_gap(p);
}

std::vector<double> env_legibility_checkpoints(const CostModel& model, Point2 start, const std::string& g_true,
                                               std::span<const Goal> goals, const LegibilityParams& params) {
  require_goals(goals);
  const auto truth = std::find_if(goals.begin(), goals.end(), [&](const Goal& g) { return g.id == g_true; });
  if (truth == goals.end()) throw std::invalid_argument("true goal '" + g_true + "' is not in the goal set");

  const OccupancyGrid& grid = model.grid();
  const Cell s = model.cell_of(start);
  std::vector<const DistanceField*> fields;
  for (const Goal& g : goals) {
    const DistanceField& f = model.field_to(model.cell_of(g.position));
    if (!f.reachable(s)) throw UnreachableGoal("goal '" + g.id + "' is unreachable");
    fields.push_back(&f);
  }
  const std::size_t truth_index = static_cast<std::size_t>(truth - goals.begin());
  const std::vector<Cell> path = canonical_path(grid, *fields[truth_index], s);
  std::vector<GridCost> walked(path.size());
  for (std::size_t k = 1; k < path.size(); ++k) walked[k] = walked[k - 1] + step_cost(path[k - 1], path[k]);
  const double total = walked.back().units();

  std::vector<std::string> ids;
  for (const Goal& g : goals) ids.push_back(g.id);
  require_unique_ids(ids);
  const double scale = grid.resolution() / model.normalizer();

  std::vector<double> scores;
  std::vector<double> exps(goals.size());
  std::vector<double> probs;
  for (const double f : params.checkpoints) {
    const double target = f * total;
    std::size_t k = 0;
    while (k + 1 < path.size() && walked[k + 1].units() <= target) ++k;
    const Cell q = path[k];
    for (std::size_t i = 0; i < goals.size(); ++i) {
      const GridCost excess = walked[k] + fields[i]->cost(q) - fields[i]->cost(s);
      exps[i] = -params.beta * (excess.units() * scale);
    }
    softmax(exps, probs);
    bool wins = true;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (i != truth_index && probs[i] >= probs[truth_index]) wins = false;
    }
    scores.push_back(wins ? top_two_gap(probs) : -params.penalty_c);
  }
  return scores;
}

double env_legibility(const CostModel& model, Point2 start, const std::string& g_true, std::span<const Goal> goals,
                      const LegibilityParams& params) {
  const auto scores = env_legibility_checkpoints(model, start, g_true, goals, params);
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

}  // namespace legws
