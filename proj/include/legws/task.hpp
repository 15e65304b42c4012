#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "legws/legibility.hpp"
#include "legws/random.hpp"
#include "legws/workspace.hpp"

namespace legws {

enum class Agent { human, robot };

std::string to_string(Agent a);
Agent agent_from_string(const std::string& name);

struct Subtask {
  std::string id;
  std::string goal_item;
  Agent agent = Agent::human;

  friend bool operator==(const Subtask&, const Subtask&) = default;
};

struct Task {
  std::vector<Subtask> subtasks;
  /// (first, second): `first` must complete before `second` begins.
  std::vector<std::pair<std::string, std::string>> precedence;

  std::optional<std::size_t> index_of(const std::string& id) const;

  friend bool operator==(const Task&, const Task&) = default;
};

using Order = std::vector<std::string>;

/// Largest subtask count the order enumeration supports.
inline constexpr std::size_t kMaxSubtasks = 20;

/// Structural checks (ids, references, acyclicity); `ws` may be null to skip
/// goal item resolution.
std::optional<Violation> check_task(const Task& task, const Workspace* ws);

/// A precedence cycle as subtask ids, first id repeated at the end.
std::optional<std::vector<std::string>> find_cycle(const Task& task);

/// Number of topological orders. Throws CyclicPrecedence.
std::uint64_t count_orders(const Task& task);

/// All topological orders when there are at most `max_orders`, otherwise
/// `max_orders` distinct ones drawn uniformly. Orders come back ranked
/// lexicographically by declaration index. Throws CyclicPrecedence.
std::vector<Order> valid_orders(const Task& task, std::size_t max_orders, Rng& rng);

/// Goal items of pending subtasks whose predecessors are all completed,
/// sorted and without duplicates.
std::vector<std::string> eligible_goals(const Task& task, const std::set<std::string>& completed);

struct TaskConfig {
  std::size_t max_orders = 500;
  bool return_home = false;
  bool score_current_goal_only = false;
  std::uint64_t seed = 0;

  friend bool operator==(const TaskConfig&, const TaskConfig&) = default;
};

struct StepBreakdown {
  std::string subtask;
  Agent agent = Agent::human;
  Point2 start;
  std::vector<std::string> goals;
  /// Goals treated as the true goal, parallel to goal_scores.
  std::vector<std::string> scored_goals;
  std::vector<double> goal_scores;
  double score = 0.0;
};

struct OrderBreakdown {
  Order order;
  std::vector<StepBreakdown> steps;
  double score = 0.0;
};

struct TaskScore {
  double total = 0.0;
  std::uint64_t total_orders = 0;
  bool sampled = false;
  std::vector<OrderBreakdown> orders;
};

/// The orders a task is scored over, as subtask indices. Sampled with
/// config.seed when there are more than config.max_orders.
struct OrderSample {
  std::uint64_t total = 0;
  std::vector<std::vector<std::size_t>> orders;
};

OrderSample sample_orders(const Task& task, const TaskConfig& config);

/// Mean over valid orders of the summed per-step legibility of every
/// eligible goal. Robot subtasks advance the state without scoring.
TaskScore task_legibility(const CostModel& model, const Workspace& ws, const Task& task,
                          const LegibilityParams& params, const TaskConfig& config);

double task_legibility_score(const Workspace& ws, const PlannerSettings& settings, const Task& task,
                             const LegibilityParams& params, const TaskConfig& config, PlanCache* cache = nullptr,
                             const OrderSample* orders = nullptr);

}  // namespace legws
