#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "legws/planner.hpp"
#include "legws/workspace.hpp"

namespace legws {

struct LegibilityParams {
  double beta = 5.0;
  double penalty_c = 1.0;
  std::vector<double> checkpoints{0.25, 0.5, 0.75};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const LegibilityParams&, const LegibilityParams&) = default;
};

struct Goal {
  std::string id;
  Point2 position;
};

/// Normalized distribution over the eligible goal set.
struct Belief {
  std::map<std::string, double> entries;

  /// First goal (by id) holding the maximum probability.
  const std::string& argmax() const;
  double max_probability() const;
  double at(const std::string& id) const { return entries.at(id); }
  /// True when no other goal exceeds `id` by more than `tol`.
  bool in_argmax(const std::string& id, double tol = 1e-12) const;
};

/// Grid plus lazily built distance fields toward each queried goal cell.
/// Not safe for concurrent use; give each thread its own model.
class CostModel {
 public:
  /// With a cache, the grid and fields are shared with other models built
  /// from the same cache.
  CostModel(const Workspace& ws, const PlannerSettings& settings, PlanCache* cache = nullptr);
  CostModel(OccupancyGrid grid, double normalizer);

  const OccupancyGrid& grid() const { return *grid_; }
  /// Length every cost is divided by before beta is applied.
  double normalizer() const { return normalizer_; }

  const DistanceField& field_to(Cell goal) const;
  /// Throws OutOfBounds when `p` is outside the grid.
  Cell cell_of(Point2 p) const;
  /// Shared cache entry of the grid; null for a model built without a cache.
  PlanCache::Entry* cache_entry() const { return entry_.get(); }

 private:
  std::shared_ptr<const OccupancyGrid> grid_;
  double normalizer_;
  PlanCache* cache_ = nullptr;
  std::shared_ptr<PlanCache::Entry> entry_;
  mutable std::unordered_map<std::size_t, std::shared_ptr<const DistanceField>> fields_;
};

/// Costs entering the goal posterior for one goal, in meters.
struct GoalCosts {
  std::string id;
  double observed = 0.0;   // C(observed prefix S..Q)
  double remaining = 0.0;  // C*(Q -> G)
  double optimal = 0.0;    // C*(S -> G)
};

/// Normalized exp(-beta * (observed + remaining - optimal) / normalizer).
Belief belief_from_costs(std::span<const GoalCosts> costs, double beta, double normalizer);

/// Goal posterior for an observed prefix beginning at `start`; the last
/// observed point is the current position. Throws EmptyGoalSet,
/// UnreachableGoal, or std::invalid_argument when the prefix does not begin
/// within one grid resolution of `start`.
Belief goal_posterior(const CostModel& model, Point2 start, std::span<const Point2> observed,
                      std::span<const Goal> goals, const LegibilityParams& params);

Belief goal_posterior(const Workspace& ws, const PlannerSettings& settings, Point2 start,
                      std::span<const Point2> observed, std::span<const Goal> goals, const LegibilityParams& params);

/// Gap between the two largest probabilities; 1.0 for a single goal.
double prediction_margin(const Belief& belief);

/// Per-checkpoint scores: the margin when `g_true` is the unique argmax of
/// the posterior after observing the optimal path up to that fraction of its
/// cost, otherwise -penalty_c.
std::vector<double> env_legibility_checkpoints(const CostModel& model, Point2 start, const std::string& g_true,
                                               std::span<const Goal> goals, const LegibilityParams& params);

/// Mean of env_legibility_checkpoints.
double env_legibility(const CostModel& model, Point2 start, const std::string& g_true, std::span<const Goal> goals,
                      const LegibilityParams& params);

}  // namespace legws
