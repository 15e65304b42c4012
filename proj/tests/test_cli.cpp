#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "support.hpp"

#include "legws/cli.hpp"

using namespace legws;
using namespace support;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "legws");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& leaf = "") const { return (leaf.empty() ? path : path / leaf).string(); }
};

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run({"--version"}).code == 0);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"score"}).code == 1);
  CHECK(run({"score", "/nonexistent/file.json"}).code == 2);

  TempDir dir("legws_cli_codes");
  write_file(dir.path / "broken.json", "{");
  const Result parse = run({"score", dir.str("broken.json")});
  CHECK(parse.code == 1);
  CHECK_FALSE(parse.err.empty());

  json j = json::parse(read_file(scenario_path("tabletop.json")));
  j["task"]["subtasks"][2]["goal_item"] = "ghost";
  write_file(dir.path / "invalid.json", j.dump());
  const Result invalid = run({"score", dir.str("invalid.json")});
  CHECK(invalid.code == 1);
  CHECK(invalid.err.find("task.subtasks[2].goal_item") != std::string::npos);

  j = json::parse(read_file(scenario_path("tabletop.json")));
  j["format_version"] = 99;
  write_file(dir.path / "future.json", j.dump());
  CHECK(run({"score", dir.str("future.json")}).code == 1);
}

TEST_CASE("score output agrees with the library") {
  const ScenarioDocument doc = load_scenario_file(scenario_path("tabletop.json"));
  const Result r = run({"score", scenario_path("tabletop.json"), "--json"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  const QDConfig qd = doc.resolved_qd();
  const double direct = task_legibility_score(doc.workspace, qd.planner, doc.task, qd.legibility, qd.task);
  CHECK(j["score"].get<double>() == doctest::Approx(direct).epsilon(1e-8));
  CHECK(j["total_orders"] == 36);
  CHECK(j["sampled"] == false);
  REQUIRE(j["orders"].size() == 36);
  double sum = 0.0;
  for (const auto& o : j["orders"]) {
    double steps = 0.0;
    for (const auto& st : o["steps"]) {
      double goals = 0.0;
      for (const auto& g : st["goal_scores"]) goals += g.get<double>();
      CHECK(st["score"].get<double>() == doctest::Approx(goals).epsilon(1e-8));
      if (st["agent"] == "robot") CHECK(st["scored_goals"].empty());
      steps += st["score"].get<double>();
    }
    CHECK(o["score"].get<double>() == doctest::Approx(steps).epsilon(1e-8));
    sum += o["score"].get<double>();
  }
  CHECK(j["score"].get<double>() == doctest::Approx(sum / 36).epsilon(1e-8));

  const Result text = run({"score", scenario_path("tabletop.json")});
  CHECK(text.code == 0);
  CHECK(text.out.rfind("task legibility ", 0) == 0);
}

TEST_CASE("optimize writes deterministic outputs") {
  TempDir a("legws_cli_opt_a"), b("legws_cli_opt_b");
  const std::vector<std::string> common{"optimize", scenario_path("tabletop.json"), "--iters", "16", "--init", "8",
                                        "--seed", "3", "--quiet", "--out"};
  auto args_a = common, args_b = common;
  args_a.push_back(a.str());
  args_b.push_back(b.str());
  const Result ra = run(args_a), rb = run(args_b);
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(ra.err.empty());
  for (const char* f : {"archive.json", "archive.csv", "best_scenario.json"}) {
    CHECK(read_file(a.path / f) == read_file(b.path / f));
  }
  const json ma = json::parse(read_file(a.path / "manifest.json"));
  CHECK(ma["seed"] == 3);
  CHECK(ma["config"]["qd"]["total_iterations"] == 16);
  CHECK(ma["outputs"].size() == 3);

  const Archive archive = load_archive(read_file(a.path / "archive.json"));
  CHECK(ra.out.find("cells " + std::to_string(archive.size()) + "\n") != std::string::npos);
  const ScenarioDocument best = load_scenario_file(a.path / "best_scenario.json");
  CHECK(best.metadata["cell"] == to_string(archive.best().first));
  CHECK(best.metadata["score"].get<double>() >= best.metadata["baseline_score"].get<double>() - 1e-9);

  // The best layout scores what the metadata says.
  const Result rescored = run({"score", a.str("best_scenario.json"), "--json"});
  REQUIRE(rescored.code == 0);
  CHECK(json::parse(rescored.out)["score"].get<double>() ==
        doctest::Approx(best.metadata["score"].get<double>()).epsilon(1e-6));

  const Result inspect = run({"archive", "inspect", a.str("archive.json"), "--json", "--top", "3"});
  REQUIRE(inspect.code == 0);
  const json ij = json::parse(inspect.out);
  CHECK(ij["cells"] == archive.size());
  CHECK(ij["best_cell"] == to_string(archive.best().first));
  CHECK(ij["top"].size() == std::min<std::size_t>(3, archive.size()));
  for (std::size_t i = 1; i < ij["top"].size(); ++i) {
    CHECK(ij["top"][i - 1]["score"].get<double>() >= ij["top"][i]["score"].get<double>());
  }
  CHECK(run({"archive", "inspect", a.str("missing.json")}).code == 2);
}

TEST_CASE("optimize reports progress unless quiet") {
  TempDir dir("legws_cli_progress");
  const Result r = run({"optimize", scenario_path("tabletop.json"), "--iters", "4", "--init", "2", "--out", dir.str()});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("iteration 4/4") != std::string::npos);
  CHECK(run({"optimize", scenario_path("tabletop.json"), "--iters", "2", "--init", "4", "--out", dir.str()}).code == 1);
}

TEST_CASE("simulate with one seed has zero spread") {
  TempDir dir("legws_cli_sim");
  const std::string s = scenario_path("tabletop.json");
  const Result r = run({"simulate", s, s, "--seeds", "1", "--json", "--out", dir.str()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["n_seeds"] == 1);
  for (const auto& [name, m] : j["metrics"].items()) {
    CHECK(m["baseline"]["stddev"] == 0.0);
    CHECK(m["sign_test"]["p_value"] == 1.0);
  }
  for (const char* f : {"report.json", "report.txt", "episodes_baseline.jsonl", "episodes_optimized.jsonl",
                        "manifest.json"}) {
    CHECK(fs::exists(dir.path / f));
  }
  CHECK(read_file(dir.path / "episodes_baseline.jsonl") == read_file(dir.path / "episodes_optimized.jsonl"));

  const Result again = run({"simulate", s, s, "--seeds", "1", "--json"});
  CHECK(again.out == r.out);
  CHECK(run({"simulate", s, scenario_path("warehouse.json"), "--seeds", "1"}).code != 0);
  CHECK(run({"simulate", s, s, "--threshold", "0.2"}).code == 1);
}
