#include "legws/api.hpp"

#include <algorithm>
#include <cmath>

#include "legws/task.hpp"

namespace legws {

using nlohmann::json;

namespace {

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  }) && id != "." && id != "..";
}

HttpResponse json_response(int status, const json& body) { return {status, canonical_dump(body) + "\n"}; }

HttpResponse error_response(int status, const std::string& code, const std::string& message,
                            const std::string& path = "") {
  json body = {{"error", code}, {"message", message}};
  if (!path.empty()) body["path"] = path;
  return json_response(status, body);
}

std::vector<std::string> split_path(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < target.size()) {
    while (i < target.size() && target[i] == '/') ++i;
    const std::size_t j = target.find('/', i);
    const std::size_t end = j == std::string_view::npos ? target.size() : j;
    if (end > i) parts.emplace_back(target.substr(i, end - i));
    i = end;
  }
  return parts;
}

json status_json(const RunStatus& s) {
  json out = {
      {"run_id", s.id},
      {"scenario", s.scenario},
      {"status", to_string(s.state)},
      {"iteration", s.iteration},
      {"total_iterations", s.total_iterations},
      {"cells", s.cells},
      {"best_score", s.best_score ? json(*s.best_score) : json(nullptr)},
  };
  if (!s.error.empty()) out["error"] = s.error;
  return out;
}

json belief_json(const Belief& b) {
  json entries = json::object();
  for (const auto& [id, p] : b.entries) entries[id] = p;
  return entries;
}

json point_json(Point2 p) { return json::array({p.x, p.y}); }

json error_reply(const std::string& code, const std::string& message, const json& seq = nullptr) {
  json out = {{"type", "error"}, {"code", code}, {"message", message}};
  if (!seq.is_null()) out["seq"] = seq;
  return out;
}

/// Reads an [x, y] pair; throws ValidationError under `path`.
Point2 read_point(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ValidationError(path, "expected [x, y]");
  }
  const Point2 p{v[0].get<double>(), v[1].get<double>()};
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError(path, "must be finite");
  return p;
}

}  // namespace

// ---------------------------------------------------------------- store

std::vector<std::string> ScenarioStore::load_directory(const std::filesystem::path& dir) {
  std::vector<std::string> problems;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    try {
      add(file.stem().string(), load_scenario_file(file));
    } catch (const std::exception& e) {
      problems.push_back(file.string() + ": " + e.what());
    }
  }
  return problems;
}

void ScenarioStore::add(const std::string& id, ScenarioDocument doc) {
  if (!valid_id(id)) throw std::invalid_argument("id must be 1-128 characters of [A-Za-z0-9_.-]");
  auto stored = std::make_shared<StoredScenario>();
  stored->id = id;
  stored->canonical = save_scenario(doc);
  stored->doc = std::move(doc);
  std::unique_lock lock(mutex_);
  if (!scenarios_.emplace(id, std::move(stored)).second) throw Conflict("scenario '" + id + "' already exists");
}

std::shared_ptr<const StoredScenario> ScenarioStore::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = scenarios_.find(id);
  return it == scenarios_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<const StoredScenario>> ScenarioStore::list() const {
  std::shared_lock lock(mutex_);
  std::vector<std::shared_ptr<const StoredScenario>> out;
  for (const auto& [id, s] : scenarios_) out.push_back(s);
  return out;
}

// ---------------------------------------------------------------- runs

std::string to_string(RunState s) {
  switch (s) {
    case RunState::queued: return "queued";
    case RunState::running: return "running";
    case RunState::done: return "done";
    case RunState::failed: return "failed";
  }
  return "unknown";
}

RunRegistry::RunRegistry() : thread_([this] { worker(); }) {}

RunRegistry::~RunRegistry() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

std::string RunRegistry::submit(const std::string& scenario_id, const ScenarioDocument& doc,
                                std::optional<std::string> run_id) {
  std::lock_guard lock(mutex_);
  std::string id;
  if (run_id) {
    if (!valid_id(*run_id)) throw std::invalid_argument("run_id must be 1-128 characters of [A-Za-z0-9_.-]");
    id = *run_id;
    if (runs_.count(id)) throw Conflict("run '" + id + "' already exists");
  } else {
    do {
      id = "run-" + std::to_string(++counter_);
    } while (runs_.count(id));
  }
  auto run = std::make_shared<Run>();
  run->status.id = id;
  run->status.scenario = scenario_id;
  run->status.total_iterations = doc.qd.total_iterations;
  run->doc = doc;
  runs_.emplace(id, run);
  queue_.push_back(id);
  cv_.notify_all();
  return id;
}

std::optional<RunStatus> RunRegistry::status(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) return std::nullopt;
  return it->second->status;
}

std::optional<std::string> RunRegistry::archive(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) return std::nullopt;
  return it->second->archive;
}

void RunRegistry::wait_idle() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

void RunRegistry::worker() {
  std::unique_lock lock(mutex_);
  while (true) {
    cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
    if (stopping_) return;
    auto run = runs_.at(queue_.front());
    queue_.pop_front();
    busy_ = true;
    run->status.state = RunState::running;
    lock.unlock();

    std::optional<std::string> archive;
    std::string error;
    try {
      const QDConfig config = run->doc.resolved_qd();
      const Objective objective = make_legibility_objective(run->doc.task, config);
      auto progress = [&](std::size_t iteration, const Archive& a) {
        std::lock_guard guard(mutex_);
        if (stopping_) throw Error("cancelled: server shutting down");
        run->status.iteration = iteration;
        run->status.cells = a.size();
        if (!a.empty()) run->status.best_score = -a.best().second.score;
      };
      const MapElitesResult result = map_elites(run->doc.workspace, objective, config, progress);
      archive = save_archive(result.archive);
      std::lock_guard guard(mutex_);
      run->status.cells = result.archive.size();
      run->status.best_score = -result.archive.best().second.score;
    } catch (const std::exception& e) {
      error = e.what();
    }

    lock.lock();
    if (archive) {
      run->archive = std::move(archive);
      run->status.state = RunState::done;
    } else {
      run->status.state = RunState::failed;
      run->status.error = error;
    }
    busy_ = false;
    cv_.notify_all();
  }
}

// ---------------------------------------------------------------- http

HttpResponse Api::handle(std::string_view method, std::string_view target, std::string_view body) const {
  const auto parts = split_path(target);
  if (parts.size() < 2 || parts[0] != "api") return error_response(404, "not_found", "no such endpoint");
  const std::string& resource = parts[1];

  try {
    if (resource == "health" && parts.size() == 2) {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      return json_response(200, {{"status", "ok"}, {"version", LEGWS_VERSION}, {"format_version", kFormatVersion}});
    }

    if (resource == "scenarios") {
      if (parts.size() == 2 && method == "GET") {
        json list = json::array();
        for (const auto& s : store_.list()) {
          json subtasks = json::array();
          for (const auto& st : s->doc.task.subtasks) subtasks.push_back(st.id);
          list.push_back({{"id", s->id},
                          {"template", to_string(s->doc.workspace.templ)},
                          {"items", s->doc.workspace.items.size()},
                          {"subtasks", subtasks}});
        }
        return json_response(200, {{"scenarios", list}});
      }
      if (parts.size() == 2 && method == "POST") {
        json req;
        try {
          req = json::parse(body);
        } catch (const json::parse_error& e) {
          return error_response(400, "parse_error", e.what());
        }
        if (!req.is_object()) return error_response(400, "validation_error", "expected an object", "");
        if (!req.contains("id") || !req["id"].is_string()) {
          return error_response(400, "validation_error", "missing string field", "id");
        }
        if (!req.contains("scenario") || !req["scenario"].is_object()) {
          return error_response(400, "validation_error", "missing object field", "scenario");
        }
        const std::string id = req["id"].get<std::string>();
        if (!valid_id(id)) return error_response(400, "validation_error", "must match [A-Za-z0-9_.-]{1,128}", "id");
        ScenarioDocument doc;
        try {
          doc = load_scenario(req["scenario"].dump());
        } catch (const ValidationError& e) {
          return error_response(400, "validation_error", e.reason(), "scenario." + e.path());
        }
        store_.add(id, std::move(doc));
        return json_response(201, {{"id", id}});
      }
      if (parts.size() == 3 && method == "GET") {
        auto s = store_.get(parts[2]);
        if (!s) return error_response(404, "not_found", "unknown scenario '" + parts[2] + "'");
        return {200, s->canonical};
      }
      return error_response(parts.size() <= 3 ? 405 : 404, "bad_request", "unsupported request");
    }

    if (resource == "runs") {
      if (parts.size() == 2 && method == "POST") {
        json req;
        try {
          req = json::parse(body);
        } catch (const json::parse_error& e) {
          return error_response(400, "parse_error", e.what());
        }
        if (!req.is_object()) return error_response(400, "validation_error", "expected an object", "");
        if (!req.contains("scenario") || !req["scenario"].is_string()) {
          return error_response(400, "validation_error", "missing string field", "scenario");
        }
        const std::string scenario_id = req["scenario"].get<std::string>();
        auto s = store_.get(scenario_id);
        if (!s) return error_response(404, "not_found", "unknown scenario '" + scenario_id + "'");

        ScenarioDocument doc = s->doc;
        if (req.contains("overrides") && !req["overrides"].is_null()) {
          const json& overrides = req["overrides"];
          if (!overrides.is_object()) return error_response(400, "validation_error", "expected an object", "overrides");
          json full = scenario_to_json(doc);
          for (const auto& [key, value] : overrides.items()) {
            if (!full["qd"].contains(key)) {
              return error_response(400, "validation_error", "unknown qd setting", "overrides." + key);
            }
            full["qd"][key] = value;
          }
          try {
            doc = load_scenario(full.dump());
          } catch (const ValidationError& e) {
            std::string path = e.path();
            if (path.rfind("qd.", 0) == 0) path = "overrides." + path.substr(3);
            return error_response(400, "validation_error", e.reason(), path);
          }
        }
        std::optional<std::string> run_id;
        if (req.contains("run_id") && !req["run_id"].is_null()) {
          if (!req["run_id"].is_string()) return error_response(400, "validation_error", "expected a string", "run_id");
          run_id = req["run_id"].get<std::string>();
          if (!valid_id(*run_id)) {
            return error_response(400, "validation_error", "must match [A-Za-z0-9_.-]{1,128}", "run_id");
          }
        }
        const std::string id = runs_.submit(scenario_id, doc, run_id);
        return json_response(202, {{"run_id", id}});
      }
      if (parts.size() == 3 && method == "GET") {
        auto st = runs_.status(parts[2]);
        if (!st) return error_response(404, "not_found", "unknown run '" + parts[2] + "'");
        return json_response(200, status_json(*st));
      }
      if (parts.size() == 4 && parts[3] == "archive" && method == "GET") {
        auto st = runs_.status(parts[2]);
        if (!st) return error_response(404, "not_found", "unknown run '" + parts[2] + "'");
        auto archive = runs_.archive(parts[2]);
        if (!archive) {
          return error_response(409, "not_ready", "run '" + parts[2] + "' is " + to_string(st->state));
        }
        return {200, *archive};
      }
      return error_response(parts.size() <= 4 ? 405 : 404, "bad_request", "unsupported request");
    }
  } catch (const Conflict& e) {
    return error_response(409, "conflict", e.what());
  } catch (const ValidationError& e) {
    return error_response(400, "validation_error", e.reason(), e.path());
  } catch (const std::invalid_argument& e) {
    return error_response(400, "validation_error", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal_error", e.what());
  }
  return error_response(404, "not_found", "no such endpoint");
}

// ---------------------------------------------------------------- inference

json InferenceSession::handle_text(std::string_view text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    return error_reply("parse_error", e.what());
  }
  return handle(msg);
}

json InferenceSession::handle(const json& msg) {
  if (!msg.is_object()) return error_reply("validation_error", "message must be a JSON object");
  const json seq = msg.contains("seq") ? msg["seq"] : json(nullptr);
  if (!msg.contains("type") || !msg["type"].is_string()) {
    return error_reply("validation_error", "type: missing string field", seq);
  }
  const std::string type = msg["type"].get<std::string>();
  try {
    if (type == "start") return on_start(msg);
    if (!started()) return error_reply("not_started", "send a start message first", seq);
    if (type == "point") return on_point(msg);
    if (type == "complete_subtask") return on_complete(msg);
    return error_reply("validation_error", "type: unknown message type '" + type + "'", seq);
  } catch (const ValidationError& e) {
    return error_reply("validation_error", e.what(), seq);
  } catch (const UnreachableGoal& e) {
    return error_reply("unreachable", e.what(), seq);
  } catch (const std::exception& e) {
    return error_reply("error", e.what(), seq);
  }
}

json InferenceSession::on_start(const json& msg) {
  if (!msg.contains("scenario") || !msg["scenario"].is_string()) {
    throw ValidationError("scenario", "missing string field");
  }
  auto scenario = store_.get(msg["scenario"].get<std::string>());
  if (!scenario) return error_reply("not_found", "unknown scenario '" + msg["scenario"].get<std::string>() + "'");
  const ScenarioDocument& doc = scenario->doc;

  std::set<std::string> completed;
  Point2 start = doc.workspace.start;
  if (msg.contains("subtask_state") && !msg["subtask_state"].is_null()) {
    const json& state = msg["subtask_state"];
    if (!state.is_object()) throw ValidationError("subtask_state", "expected an object");
    if (state.contains("completed")) {
      const json& list = state["completed"];
      if (!list.is_array()) throw ValidationError("subtask_state.completed", "expected an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = "subtask_state.completed[" + std::to_string(i) + "]";
        if (!list[i].is_string()) throw ValidationError(path, "expected a string");
        const std::string id = list[i].get<std::string>();
        if (!doc.task.index_of(id)) throw ValidationError(path, "unknown subtask '" + id + "'");
        completed.insert(id);
      }
      for (const auto& [before, after] : doc.task.precedence) {
        if (completed.count(after) && !completed.count(before)) {
          throw ValidationError("subtask_state.completed", "'" + after + "' requires '" + before + "'");
        }
      }
    }
    if (state.contains("start")) start = read_point(state["start"], "subtask_state.start");
  }

  auto model = std::make_unique<CostModel>(doc.workspace, doc.planner());
  const auto cell = model->grid().cell_of(start);
  if (!cell || model->grid().blocked(*cell)) throw ValidationError("subtask_state.start", "not a free position");

  scenario_ = std::move(scenario);
  model_ = std::move(model);
  completed_ = std::move(completed);
  start_ = start;
  observed_ = {start};
  committed_ = false;
  refresh_goals();
  return state_json("started");
}

json InferenceSession::on_point(const json& msg) {
  json seq = msg.contains("seq") ? msg["seq"] : json(nullptr);
  if (seq.is_null()) seq = next_seq_;
  if (!msg.contains("p")) throw ValidationError("p", "missing field");
  const Point2 p = read_point(msg["p"], "p");
  if (goals_.empty()) return error_reply("no_goals", "every subtask is complete", seq);
  const OccupancyGrid& grid = model_->grid();
  if (!scenario_->doc.workspace.bounds.contains(p)) return error_reply("out_of_bounds", "p: outside the workspace", seq);
  const auto cell = grid.cell_of(p);
  if (!cell || grid.blocked(*cell)) return error_reply("blocked", "p: inside an obstacle", seq);

  std::vector<Point2> candidate = observed_;
  candidate.push_back(p);
  const Belief belief = goal_posterior(*model_, start_, candidate, goals_, scenario_->doc.legibility);
  observed_ = std::move(candidate);
  if (seq.is_number_integer() && seq.get<std::int64_t>() >= 0) next_seq_ = seq.get<std::uint64_t>() + 1;
  else ++next_seq_;
  if (belief.max_probability() >= scenario_->doc.sim.confidence_threshold) committed_ = true;
  return {
      {"type", "belief"},
      {"seq", seq},
      {"entries", belief_json(belief)},
      {"argmax", belief.argmax()},
      {"margin", prediction_margin(belief)},
      {"committed", committed_},
  };
}

json InferenceSession::on_complete(const json& msg) {
  if (!msg.contains("id") || !msg["id"].is_string()) throw ValidationError("id", "missing string field");
  const std::string id = msg["id"].get<std::string>();
  const Task& task = scenario_->doc.task;
  const auto index = task.index_of(id);
  if (!index) throw ValidationError("id", "unknown subtask '" + id + "'");
  if (completed_.count(id)) throw ValidationError("id", "subtask '" + id + "' is already complete");
  bool ready = true;
  for (const auto& [before, after] : task.precedence) {
    if (after == id && !completed_.count(before)) ready = false;
  }
  if (!ready) {
    throw ValidationError("id", "subtask '" + id + "' is not eligible yet");
  }
  completed_.insert(id);
  if (!scenario_->doc.sim.return_home) start_ = observed_.back();
  else start_ = scenario_->doc.workspace.start;
  observed_ = {start_};
  committed_ = false;
  refresh_goals();
  return state_json("subtask_completed");
}

void InferenceSession::refresh_goals() {
  goals_.clear();
  const Workspace& ws = scenario_->doc.workspace;
  for (const auto& item : eligible_goals(scenario_->doc.task, completed_)) {
    goals_.push_back({item, ws.find_item(item)->pos});
  }
}

json InferenceSession::state_json(const char* type) const {
  json goals = json::array();
  for (const auto& g : goals_) goals.push_back(g.id);
  json completed = json::array();
  for (const auto& c : completed_) completed.push_back(c);
  return {
      {"type", type},
      {"scenario", scenario_->id},
      {"start", point_json(start_)},
      {"goals", goals},
      {"completed", completed},
      {"return_home", scenario_->doc.sim.return_home},
      {"confidence_threshold", scenario_->doc.sim.confidence_threshold},
  };
}

}  // namespace legws
