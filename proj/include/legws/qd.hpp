#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "legws/legibility.hpp"
#include "legws/random.hpp"
#include "legws/task.hpp"
#include "legws/workspace.hpp"

namespace legws {

struct MeasureDescriptor {
  int min_distance_bins = 10;
  double min_distance_lo = 0.0;
  double min_distance_hi = 1.0;
  std::uint64_t ordering_cap = 720;
  double row_tolerance = 0.05;

  void validate() const;
  friend bool operator==(const MeasureDescriptor&, const MeasureDescriptor&) = default;
};

/// Defaults scaled to the workspace: range [0, diagonal/2], row tolerance of
/// twice the largest item radius.
MeasureDescriptor default_measure_descriptor(const Workspace& ws);

struct Features {
  double min_distance = 0.0;
  std::uint64_t ordering_rank = 0;
};

struct CellKey {
  int distance_bin = 0;
  std::uint64_t ordering_bin = 0;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

std::string to_string(const CellKey& key);  // "i,j"

struct Measurement {
  CellKey key;
  Features features;
};

/// Item index permutation read in rows from top to bottom, left to right.
std::vector<std::size_t> reading_order(const Workspace& ws, double row_tolerance);

/// Lexicographic rank of a permutation of 0..n-1, modulo `cap`.
std::uint64_t lehmer_rank(const std::vector<std::size_t>& perm, std::uint64_t cap);

/// Throws TooFewItems for fewer than two items.
Measurement measure(const Workspace& ws, const MeasureDescriptor& desc);

struct QDConfig {
  std::size_t total_iterations = 2000;
  std::size_t init_iterations = 400;
  std::uint64_t seed = 0;
  double gaussian_sigma = 0.05;
  int item_samples_per_item = 4;
  int obstacle_add_samples = 4;
  double obstacle_side = 0.2;
  std::size_t max_obstacles = 6;
  std::size_t placement_retries = 1000;
  std::size_t descent_depth_cap = 50;
  /// When false only virtual obstacles are searched over.
  bool movable_items = true;
  /// Use the template workspace itself as the first initial sample.
  bool include_baseline = true;

  MeasureDescriptor measure;
  LegibilityParams legibility;
  TaskConfig task;
  PlannerSettings planner;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  friend bool operator==(const QDConfig&, const QDConfig&) = default;
};

/// Template-dependent defaults for `ws` (sigma 5% of the smaller bounds
/// side, obstacle side 8x the largest item radius).
QDConfig default_qd_config(const Workspace& ws);

struct MoveItem {
  std::size_t item = 0;
  Point2 to;
};
struct AddObstacle {
  ConvexPolygon square;
};
struct RemoveObstacle {
  std::size_t index = 0;
};
using Perturbation = std::variant<MoveItem, AddObstacle, RemoveObstacle>;

/// Items and virtual obstacles drawn uniformly until every workspace
/// invariant holds. Throws PlacementFailure after the retry budget.
Workspace random_workspace(const Workspace& tmpl, const QDConfig& config, Rng& rng);

/// K Gaussian moves per item, M square additions while below the obstacle
/// cap, and one removal per virtual obstacle, in that order.
std::vector<Perturbation> available_perturbations(const Workspace& ws, const QDConfig& config, Rng& rng);

/// Applies, merges overlapping virtual obstacles and re-validates. Throws
/// InvalidResult when an invariant breaks.
Workspace apply_perturbation(const Workspace& ws, const Perturbation& p, const PlannerSettings& settings,
                             PlanCache* cache = nullptr);
std::optional<Workspace> try_apply_perturbation(const Workspace& ws, const Perturbation& p,
                                                const PlannerSettings& settings, PlanCache* cache = nullptr);

/// Internal objective: lower is better.
using Objective = std::function<double(const Workspace&)>;

/// Negated task legibility, memoized on the exact workspace contents.
Objective make_legibility_objective(const Task& task, const QDConfig& config);

struct DescentResult {
  Workspace workspace;
  double score = 0.0;
  std::size_t sweeps = 0;
  std::size_t evaluations = 0;
  bool truncated = false;
};

/// Neighbourhood descent: adopt the best strictly improving sampled
/// neighbour and resample around it until a sweep finds no improvement or
/// the depth cap is hit.
/// `cache` speeds up neighbour validation and may be shared across calls.
DescentResult improve_via_gradient_descent(const Workspace& ws, double score, const Objective& objective,
                                           const QDConfig& config, Rng& rng, PlanCache* cache = nullptr);

struct Elite {
  Workspace workspace;
  double score = 0.0;
  Features features;
};

class Archive {
 public:
  /// Stores `elite` when the cell is empty or the score is strictly lower.
  bool offer(const CellKey& key, Elite elite);

  const std::map<CellKey, Elite>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  /// Lowest internal score; precondition: not empty.
  const std::pair<const CellKey, Elite>& best() const;

 private:
  std::map<CellKey, Elite> cells_;
};

struct IterationRecord {
  std::size_t iteration = 0;
  bool improvement_phase = false;
  std::optional<CellKey> cell;  // empty when no valid workspace was produced
  double score = 0.0;
  bool inserted = false;
};

struct MapElitesResult {
  Archive archive;
  std::vector<IterationRecord> log;
  std::size_t placement_failures = 0;
};

using ProgressFn = std::function<void(std::size_t iteration, const Archive& archive)>;

/// Initialization with random workspaces, then uniform elite selection and
/// descent. Throws EmptyArchive when initialization produced nothing.
MapElitesResult map_elites(const Workspace& tmpl, const Objective& objective, const QDConfig& config,
                           const ProgressFn& progress = {});

}  // namespace legws
