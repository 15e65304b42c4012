#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "legws/legibility.hpp"
#include "legws/qd.hpp"
#include "legws/task.hpp"
#include "legws/workspace.hpp"

namespace legws {

inline constexpr int kFormatVersion = 1;

struct SimSettings {
  bool return_home = false;
  double confidence_threshold = 0.8;

  friend bool operator==(const SimSettings&, const SimSettings&) = default;
};

/// Everything an experiment needs, as stored on disk.
struct ScenarioDocument {
  int format_version = kFormatVersion;
  Workspace workspace;
  Task task;
  LegibilityParams legibility;
  /// Search settings. Its legibility, return_home and planner members are
  /// derived from the other sections on load.
  QDConfig qd;
  SimSettings sim;
  /// Free-form annotations (e.g. the score of an optimized layout).
  nlohmann::json metadata;

  PlannerSettings planner() const { return default_planner_settings(workspace.templ); }
  /// qd with the legibility, task and planner settings filled in.
  QDConfig resolved_qd() const;

  friend bool operator==(const ScenarioDocument&, const ScenarioDocument&) = default;
};

/// Deterministic JSON text: sorted keys, two-space indentation, floats with
/// nine significant digits, scalar arrays on one line.
std::string canonical_dump(const nlohmann::json& j);

nlohmann::json workspace_to_json(const Workspace& ws);
/// Throws ValidationError with paths under `path`.
Workspace workspace_from_json(const nlohmann::json& j, const std::string& path = "workspace");

nlohmann::json scenario_to_json(const ScenarioDocument& doc);

/// Parses and fully validates. Throws ParseError, VersionError or
/// ValidationError.
ScenarioDocument load_scenario(std::string_view text);
ScenarioDocument load_scenario_file(const std::filesystem::path& path);
std::string save_scenario(const ScenarioDocument& doc);

/// Archive document keyed by "i,j" cells. `score` is the user-facing
/// legibility (higher is better), `objective` the internal value.
nlohmann::json archive_to_json(const Archive& archive);
std::string save_archive(const Archive& archive);
/// Rebuilds an archive from its document; cells keep their stored keys.
Archive load_archive(std::string_view text);
/// distance_bin,ordering_bin,score rows for heatmaps.
std::string archive_csv(const Archive& archive);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace legws
