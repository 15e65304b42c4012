#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "legws/error.hpp"
#include "legws/io.hpp"

namespace legws {

/// Raised for a resource that already exists.
class Conflict : public Error {
 public:
  using Error::Error;
};

struct StoredScenario {
  std::string id;
  ScenarioDocument doc;
  std::string canonical;  // save_scenario(doc)
};

/// Validated scenarios by id. Safe for concurrent use.
class ScenarioStore {
 public:
  /// Loads every *.json file of `dir`, keyed by file stem. Invalid files are
  /// skipped and reported through the returned messages.
  std::vector<std::string> load_directory(const std::filesystem::path& dir);
  /// Throws Conflict when the id is taken, std::invalid_argument for a bad id.
  void add(const std::string& id, ScenarioDocument doc);
  std::shared_ptr<const StoredScenario> get(const std::string& id) const;
  std::vector<std::shared_ptr<const StoredScenario>> list() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const StoredScenario>> scenarios_;
};

enum class RunState { queued, running, done, failed };
std::string to_string(RunState s);

struct RunStatus {
  std::string id;
  std::string scenario;
  RunState state = RunState::queued;
  std::size_t iteration = 0;
  std::size_t total_iterations = 0;
  std::size_t cells = 0;
  /// User-facing legibility of the best elite so far.
  std::optional<double> best_score;
  std::string error;
};

/// Optimization runs executed one at a time on a background worker.
class RunRegistry {
 public:
  RunRegistry();
  ~RunRegistry();
  RunRegistry(const RunRegistry&) = delete;
  RunRegistry& operator=(const RunRegistry&) = delete;

  /// Queues a run and returns its id (generated when `run_id` is empty).
  /// Throws Conflict for a duplicate id.
  std::string submit(const std::string& scenario_id, const ScenarioDocument& doc,
                     std::optional<std::string> run_id = std::nullopt);
  std::optional<RunStatus> status(const std::string& id) const;
  /// Canonical archive document of a finished run.
  std::optional<std::string> archive(const std::string& id) const;
  /// Blocks until every queued run has finished.
  void wait_idle();

 private:
  struct Run {
    RunStatus status;
    ScenarioDocument doc;
    std::optional<std::string> archive;
  };
  void worker();

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::deque<std::string> queue_;
  std::size_t counter_ = 0;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread thread_;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Transport-independent HTTP handlers.
class Api {
 public:
  Api(ScenarioStore& store, RunRegistry& runs) : store_(store), runs_(runs) {}
  HttpResponse handle(std::string_view method, std::string_view target, std::string_view body) const;

 private:
  ScenarioStore& store_;
  RunRegistry& runs_;
};

/// Goal inference for one client: a subtask state machine plus the observed
/// prefix of the current subtask. Not safe for concurrent use.
class InferenceSession {
 public:
  explicit InferenceSession(const ScenarioStore& store) : store_(store) {}

  /// Handles one client message and returns the reply. Never throws for bad
  /// input; problems come back as {"type": "error"} replies.
  nlohmann::json handle(const nlohmann::json& msg);
  nlohmann::json handle_text(std::string_view text);

  bool started() const { return scenario_ != nullptr; }
  const std::vector<Point2>& observed() const { return observed_; }
  Point2 start() const { return start_; }
  const std::vector<Goal>& goals() const { return goals_; }

 private:
  nlohmann::json on_start(const nlohmann::json& msg);
  nlohmann::json on_point(const nlohmann::json& msg);
  nlohmann::json on_complete(const nlohmann::json& msg);
  void refresh_goals();
  nlohmann::json state_json(const char* type) const;

  const ScenarioStore& store_;
  std::shared_ptr<const StoredScenario> scenario_;
  std::unique_ptr<CostModel> model_;
  std::set<std::string> completed_;
  std::vector<Goal> goals_;
  Point2 start_;
  std::vector<Point2> observed_;
  bool committed_ = false;
  std::uint64_t next_seq_ = 0;
};

}  // namespace legws
