#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "legws/legibility.hpp"
#include "legws/random.hpp"
#include "legws/task.hpp"
#include "legws/workspace.hpp"

namespace legws {

struct RobotPolicy {
  double confidence_threshold = 0.8;
  bool replan_on_argmax_change = true;

  /// Throws std::invalid_argument unless the threshold lies in (0.5, 1].
  void validate() const;
};

enum class HumanModelKind { optimal, noisy };

struct HumanModel {
  HumanModelKind kind = HumanModelKind::optimal;
  /// Waypoint jitter of the noisy model in meters; 0 means half a grid cell.
  double sigma = 0.0;
};

/// Fixed inputs shared by every episode of an experiment.
struct SimContext {
  LegibilityParams legibility;
  PlannerSettings planner;
  bool return_home = false;
};

struct StepRecord {
  std::size_t tick = 0;           // global step counter
  std::size_t subtask_index = 0;  // position in the episode order
  std::string subtask;
  std::size_t step = 0;  // step within the subtask; 0 is the starting pose
  Point2 position;
  Belief belief;
  std::string argmax;
  bool commit = false;
  bool replan = false;
};

struct SubtaskOutcome {
  std::string subtask;
  std::string goal;
  /// Steps the human took to reach the goal.
  std::size_t steps = 0;
  /// Empty when the robot never became confident.
  std::optional<std::size_t> steps_to_commit;
  std::optional<std::string> committed_goal;
  bool correct = false;
  std::size_t replans = 0;
};

struct EpisodeLog {
  Order order;
  std::vector<StepRecord> records;
  /// Human subtasks only, in execution order.
  std::vector<SubtaskOutcome> subtasks;
  std::size_t replan_count = 0;
};

/// Walks the human along its path to every human subtask's goal in one valid
/// order drawn from `rng`, tracking the robot's belief after each step.
EpisodeLog simulate_episode(const Workspace& ws, const Task& task, const RobotPolicy& policy,
                            const HumanModel& human, const SimContext& ctx, Rng& rng);

struct MetricSummary {
  /// Empty when no episode defined the metric.
  std::optional<double> mean;
  double stddev = 0.0;
  std::size_t count = 0;
};

struct MetricComparison {
  std::string name;
  MetricSummary baseline;
  MetricSummary optimized;
  /// Paired seeds where optimized was lower, higher or equal.
  std::size_t lower = 0;
  std::size_t higher = 0;
  std::size_t ties = 0;
  /// Two-sided sign test over the untied pairs.
  double p_value = 1.0;
  /// "lower", "higher" or "equal", for optimized relative to baseline.
  std::string direction;
};

struct ComparisonReport {
  std::size_t n_seeds = 0;
  std::uint64_t first_seed = 0;
  std::vector<MetricComparison> metrics;

  const MetricComparison& metric(const std::string& name) const;
};

/// Per-episode aggregates. Subtasks that never commit count their full
/// step total toward steps-to-commit.
double episode_steps_to_commit(const EpisodeLog& log);
std::optional<double> episode_commit_accuracy(const EpisodeLog& log);

/// Two-sided binomial sign test p-value for `a` successes out of `a + b`.
double sign_test_p_value(std::size_t a, std::size_t b);

/// Runs seeds first_seed .. first_seed + n_seeds - 1 in both conditions.
/// Each seed drives the same order and noise in both.
ComparisonReport compare_conditions(const Workspace& baseline, const Workspace& optimized, const Task& task,
                                    const RobotPolicy& policy, const HumanModel& human, const SimContext& ctx,
                                    std::size_t n_seeds, std::uint64_t first_seed = 0);

nlohmann::json step_to_json(const StepRecord& rec);
/// One JSON object per line, one line per step.
std::string episode_jsonl(const EpisodeLog& log);
nlohmann::json episode_summary_json(const EpisodeLog& log);
nlohmann::json report_to_json(const ComparisonReport& report);
/// Aligned-column table of the report.
std::string report_table(const ComparisonReport& report);

}  // namespace legws
