#include <doctest.h>

#include "support.hpp"

#include "legws/api.hpp"

using namespace legws;
using namespace support;
using nlohmann::json;

namespace {

struct Fixture {
  ScenarioStore store;
  RunRegistry runs;
  Api api{store, runs};

  Fixture() { REQUIRE(store.load_directory(LEGWS_SCENARIO_DIR).empty()); }

  json call(std::string_view method, std::string_view target, const json& body, int expect) {
    const HttpResponse r = api.handle(method, target, body.is_null() ? "" : body.dump());
    CHECK(r.status == expect);
    return r.content_type == "application/json" ? json::parse(r.body) : json(r.body);
  }
};

json small_run(const std::string& scenario) {
  return {{"scenario", scenario}, {"overrides", {{"total_iterations", 6}, {"init_iterations", 4}, {"descent_depth_cap", 2}}}};
}

}  // namespace

TEST_CASE("health and scenario listing") {
  Fixture f;
  const json h = f.call("GET", "/api/health", nullptr, 200);
  CHECK(h["status"] == "ok");
  CHECK(h["format_version"] == kFormatVersion);
  const json list = f.call("GET", "/api/scenarios", nullptr, 200);
  REQUIRE(list["scenarios"].size() == 2);
  CHECK(list["scenarios"][0]["id"] == "tabletop");
  CHECK(list["scenarios"][1]["id"] == "warehouse");
  CHECK(list["scenarios"][0]["items"] == 6);
}

TEST_CASE("scenario fetch returns the canonical text") {
  Fixture f;
  const HttpResponse r = f.api.handle("GET", "/api/scenarios/tabletop", "");
  CHECK(r.status == 200);
  CHECK(r.body == f.store.get("tabletop")->canonical);
  CHECK(load_scenario(r.body).task == f.store.get("tabletop")->doc.task);
  f.call("GET", "/api/scenarios/nope", nullptr, 404);
}

TEST_CASE("scenario upload") {
  Fixture f;
  const json doc = json::parse(f.store.get("tabletop")->canonical);
  const json created = f.call("POST", "/api/scenarios", {{"id", "mine"}, {"scenario", doc}}, 201);
  CHECK(created["id"] == "mine");
  CHECK(f.store.get("mine"));
  f.call("POST", "/api/scenarios", {{"id", "mine"}, {"scenario", doc}}, 409);
  f.call("POST", "/api/scenarios", {{"id", "../x"}, {"scenario", doc}}, 400);
  f.call("POST", "/api/scenarios", {{"scenario", doc}}, 400);

  json bad = doc;
  bad["task"]["subtasks"][0]["goal_item"] = "ghost";
  const json err = f.call("POST", "/api/scenarios", {{"id", "bad"}, {"scenario", bad}}, 400);
  CHECK(err["error"] == "validation_error");
  CHECK(err["path"] == "scenario.task.subtasks[0].goal_item");

  const HttpResponse r = f.api.handle("POST", "/api/scenarios", "{oops");
  CHECK(r.status == 400);
}

TEST_CASE("routing errors") {
  Fixture f;
  f.call("GET", "/api/nothing", nullptr, 404);
  f.call("DELETE", "/api/scenarios", nullptr, 405);
  f.call("GET", "/api/runs/none", nullptr, 404);
  f.call("GET", "/api/health?x=1", nullptr, 200);
}

TEST_CASE("optimization runs") {
  Fixture f;
  const json sub = f.call("POST", "/api/runs", small_run("tabletop"), 202);
  const std::string id = sub["run_id"];
  f.runs.wait_idle();
  const json st = f.call("GET", "/api/runs/" + id, nullptr, 200);
  CHECK(st["status"] == "done");
  CHECK(st["iteration"] == 6);
  CHECK(st["total_iterations"] == 6);
  CHECK(st["cells"].get<int>() >= 1);
  CHECK(st["best_score"].is_number());
  const HttpResponse arch = f.api.handle("GET", "/api/runs/" + id + "/archive", "");
  CHECK(arch.status == 200);
  CHECK(load_archive(arch.body).size() == st["cells"].get<std::size_t>());

  json named = small_run("tabletop");
  named["run_id"] = "r1";
  f.call("POST", "/api/runs", named, 202);
  f.call("POST", "/api/runs", named, 409);
  f.runs.wait_idle();

  json bad = small_run("tabletop");
  bad["overrides"]["bogus"] = 1;
  CHECK(f.call("POST", "/api/runs", bad, 400)["path"] == "overrides.bogus");
  bad = small_run("tabletop");
  bad["overrides"]["init_iterations"] = 100;
  CHECK(f.call("POST", "/api/runs", bad, 400)["path"] == "overrides.init_iterations");
  f.call("POST", "/api/runs", small_run("missing"), 404);
}

TEST_CASE("inference session protocol") {
  Fixture f;
  InferenceSession s(f.store);
  CHECK(s.handle({{"type", "point"}, {"p", {0.4, 0.05}}})["code"] == "not_started");
  CHECK(s.handle_text("{")["code"] == "parse_error");
  CHECK(s.handle({{"type", "dance"}})["type"] == "error");
  CHECK(s.handle({{"type", "start"}, {"scenario", "nope"}})["code"] == "not_found");

  const json started = s.handle({{"type", "start"}, {"scenario", "tabletop"}});
  REQUIRE(started["type"] == "started");
  // Only the three column-1 subtasks are available at first.
  CHECK(started["goals"] == json::array({"blue_square", "red_square", "yellow_circle"}));
  CHECK(started["return_home"] == true);

  CHECK(s.handle({{"type", "point"}, {"p", {5.0, 5.0}}})["code"] == "out_of_bounds");
  const json b = s.handle({{"type", "point"}, {"p", {0.4, 0.05}}, {"seq", 7}});
  CHECK(b["type"] == "belief");
  CHECK(b["seq"] == 7);
  CHECK(b["entries"].size() == 3);
  CHECK(s.handle({{"type", "point"}, {"p", {0.4, 0.06}}})["seq"] == 8);

  CHECK(s.handle({{"type", "complete_subtask"}, {"id", "col2_top"}})["type"] == "error");
  CHECK(s.handle({{"type", "complete_subtask"}, {"id", "ghost"}})["type"] == "error");
  const json done = s.handle({{"type", "complete_subtask"}, {"id", "col1_bottom"}});
  CHECK(done["type"] == "subtask_completed");
  CHECK(done["completed"] == json::array({"col1_bottom"}));
  CHECK(s.observed().size() == 1);
  CHECK(s.observed()[0] == f.store.get("tabletop")->doc.workspace.start);
  CHECK(s.handle({{"type", "complete_subtask"}, {"id", "col1_bottom"}})["type"] == "error");

  const json resumed = s.handle({{"type", "start"},
                                 {"scenario", "tabletop"},
                                 {"subtask_state", {{"completed", {"col1_bottom", "col1_middle", "col1_top"}}, {"start", {0.4, 0.1}}}}});
  REQUIRE(resumed["type"] == "started");
  CHECK(resumed["goals"].size() == 3);
  CHECK(s.start() == Point2{0.4, 0.1});
  // A later subtask cannot be marked complete before its predecessors.
  CHECK(s.handle({{"type", "start"}, {"scenario", "tabletop"}, {"subtask_state", {{"completed", {"col2_top"}}}}})["type"] ==
        "error");
}

TEST_CASE("streamed beliefs equal the batch posterior") {
  Fixture f;
  const ScenarioDocument& doc = f.store.get("tabletop")->doc;
  const OccupancyGrid grid = rasterize(doc.workspace, doc.planner());
  InferenceSession s(f.store);
  REQUIRE(s.handle({{"type", "start"}, {"scenario", "tabletop"}})["type"] == "started");
  const std::vector<Goal> goals = s.goals();
  const Trajectory path = plan_path(grid, doc.workspace.start, goals[1].position);
  std::vector<Point2> observed{doc.workspace.start};
  bool committed = false;
  for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
    const Point2 p = path.waypoints[i];
    observed.push_back(p);
    const json b = s.handle({{"type", "point"}, {"p", {p.x, p.y}}});
    REQUIRE(b["type"] == "belief");
    const auto oracle = oracle_posterior(grid, doc.workspace.bounds.diagonal(), doc.workspace.start, observed, goals,
                                         doc.legibility.beta);
    double top = 0.0;
    for (const auto& [id, prob] : oracle) {
      CHECK(std::abs(b["entries"][id].get<double>() - prob) <= 1e-9);
      top = std::max(top, prob);
    }
    committed = committed || top >= doc.sim.confidence_threshold;
    CHECK(b["committed"] == committed);
  }
  CHECK(s.observed().size() == observed.size());
}
