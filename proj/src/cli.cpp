#include "legws/cli.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "legws/io.hpp"
#include "legws/server.hpp"
#include "legws/sim.hpp"

namespace legws {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void validate_config(const ScenarioDocument& doc) {
  try {
    doc.resolved_qd().validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto space = msg.find(' ');
    if (space == std::string::npos) throw ValidationError("", msg);
    throw ValidationError(msg.substr(0, space), msg.substr(space + 1));
  }
}

/// Settings every run depends on, with defaults materialized.
json resolved_config(const ScenarioDocument& doc) {
  const json full = scenario_to_json(doc);
  const PlannerSettings planner = doc.planner();
  return {
      {"legibility", full["legibility"]},
      {"qd", full["qd"]},
      {"sim", full["sim"]},
      {"planner", {{"resolution", planner.resolution}, {"agent_radius", planner.agent_radius}}},
  };
}

json manifest(const std::string& command, const std::vector<std::string>& args, const json& scenarios,
              std::uint64_t seed, const json& config, const std::string& started, const json& outputs) {
  return {
      {"format_version", kFormatVersion},
      {"tool", "legws"},
      {"version", LEGWS_VERSION},
      {"command", command},
      {"argv", args},
      {"scenario", scenarios},
      {"seed", seed},
      {"config", config},
      {"started_at", started},
      {"finished_at", utc_now()},
      {"outputs", outputs},
  };
}

double template_score(const ScenarioDocument& doc) {
  const QDConfig config = doc.resolved_qd();
  return task_legibility_score(doc.workspace, config.planner, doc.task, config.legibility, config.task);
}

// ---------------------------------------------------------------- optimize

struct OptimizeArgs {
  std::string scenario;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> init;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool quiet = false;
};

int cmd_optimize(const OptimizeArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  ScenarioDocument doc = load_scenario_file(a.scenario);
  if (a.iters) doc.qd.total_iterations = *a.iters;
  if (a.init) doc.qd.init_iterations = *a.init;
  if (a.seed) doc.qd.seed = *a.seed;
  validate_config(doc);

  const QDConfig config = doc.resolved_qd();
  const Objective objective = make_legibility_objective(doc.task, config);
  const auto t0 = std::chrono::steady_clock::now();
  auto last = t0 - std::chrono::seconds(1);
  auto progress = [&](std::size_t iteration, const Archive& archive) {
    if (a.quiet) return;
    const auto now = std::chrono::steady_clock::now();
    if (now - last < std::chrono::milliseconds(500) && iteration != config.total_iterations) return;
    last = now;
    const double elapsed = std::chrono::duration<double>(now - t0).count();
    err << "iteration " << iteration << "/" << config.total_iterations << "  cells " << archive.size();
    if (!archive.empty()) err << "  best " << fixed(-archive.best().second.score);
    err << "  " << fixed(elapsed, 1) << "s\n" << std::flush;
  };
  const MapElitesResult result = map_elites(doc.workspace, objective, config, progress);
  const auto& [best_key, best] = result.archive.best();

  ScenarioDocument best_doc = doc;
  best_doc.workspace = best.workspace;
  best_doc.metadata = doc.metadata.is_object() ? doc.metadata : json::object();
  best_doc.metadata["score"] = -best.score;
  best_doc.metadata["baseline_score"] = template_score(doc);
  best_doc.metadata["cell"] = to_string(best_key);
  best_doc.metadata["seed"] = config.seed;

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  write_file(dir / "archive.json", save_archive(result.archive));
  write_file(dir / "archive.csv", archive_csv(result.archive));
  write_file(dir / "best_scenario.json", save_scenario(best_doc));
  const json outputs = {"archive.json", "archive.csv", "best_scenario.json"};
  write_file(dir / "manifest.json",
             canonical_dump(manifest("optimize", argv, a.scenario, config.seed, resolved_config(doc), started, outputs)));

  out << "cells " << result.archive.size() << "\n"
      << "best_score " << fixed(-best.score) << "\n"
      << "best_cell " << to_string(best_key) << "\n"
      << "baseline_score " << fixed(best_doc.metadata["baseline_score"].get<double>()) << "\n"
      << "placement_failures " << result.placement_failures << "\n"
      << "output " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- score

json score_json(const TaskScore& s) {
  json orders = json::array();
  for (const auto& o : s.orders) {
    json steps = json::array();
    for (const auto& st : o.steps) {
      steps.push_back({
          {"subtask", st.subtask},
          {"agent", to_string(st.agent)},
          {"start", json::array({st.start.x, st.start.y})},
          {"goals", st.goals},
          {"scored_goals", st.scored_goals},
          {"goal_scores", st.goal_scores},
          {"score", st.score},
      });
    }
    orders.push_back({{"order", o.order}, {"score", o.score}, {"steps", steps}});
  }
  return {{"score", s.total}, {"total_orders", s.total_orders}, {"sampled", s.sampled}, {"orders", orders}};
}

int cmd_score(const std::string& path, std::optional<std::uint64_t> seed, bool as_json, std::ostream& out) {
  ScenarioDocument doc = load_scenario_file(path);
  if (seed) doc.qd.seed = *seed;
  const QDConfig config = doc.resolved_qd();
  const CostModel model(doc.workspace, config.planner);
  const TaskScore score = task_legibility(model, doc.workspace, doc.task, config.legibility, config.task);
  if (as_json) {
    out << canonical_dump(score_json(score)) << "\n";
    return 0;
  }
  out << "task legibility " << fixed(score.total, 6) << "\n"
      << "orders " << score.orders.size() << " of " << score.total_orders << (score.sampled ? " (sampled)" : "")
      << "\n";
  for (std::size_t i = 0; i < score.orders.size(); ++i) {
    const auto& o = score.orders[i];
    out << "\norder " << i + 1 << ": ";
    for (std::size_t k = 0; k < o.order.size(); ++k) out << (k ? " > " : "") << o.order[k];
    out << "  score " << fixed(o.score, 6) << "\n";
    for (const auto& st : o.steps) {
      out << "  " << std::left << std::setw(16) << st.subtask << std::setw(6) << to_string(st.agent);
      if (st.scored_goals.empty()) {
        out << "  (not scored)\n";
        continue;
      }
      out << "  " << fixed(st.score, 6) << "  [";
      for (std::size_t k = 0; k < st.scored_goals.size(); ++k) {
        out << (k ? ", " : "") << st.scored_goals[k] << " " << fixed(st.goal_scores[k]);
      }
      out << "]\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string baseline;
  std::string optimized;
  std::size_t seeds = 100;
  std::uint64_t seed = 0;
  bool noise = false;
  double sigma = 0.0;
  std::optional<double> threshold;
  bool as_json = false;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const std::string started = utc_now();
  const ScenarioDocument base = load_scenario_file(a.baseline);
  const ScenarioDocument opt = load_scenario_file(a.optimized);
  if (!(base.task == opt.task)) throw ValidationError("task", "the two scenarios must share the same task");
  if (a.seeds == 0) throw ValidationError("--seeds", "must be positive");
  if (a.sigma < 0.0) throw ValidationError("--sigma", "must be non-negative");

  RobotPolicy policy;
  policy.confidence_threshold = a.threshold.value_or(base.sim.confidence_threshold);
  try {
    policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError("--threshold", e.what());
  }
  HumanModel human;
  human.kind = a.noise ? HumanModelKind::noisy : HumanModelKind::optimal;
  human.sigma = a.sigma;
  const SimContext ctx{base.legibility, base.planner(), base.sim.return_home};

  const ComparisonReport report =
      compare_conditions(base.workspace, opt.workspace, base.task, policy, human, ctx, a.seeds, a.seed);
  json report_doc = report_to_json(report);
  report_doc["human"] = a.noise ? "noisy" : "optimal";
  report_doc["confidence_threshold"] = policy.confidence_threshold;

  if (!a.out.empty()) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file(dir / "report.json", canonical_dump(report_doc));
    write_file(dir / "report.txt", report_table(report));
    std::string logs[2];
    const Workspace* conditions[2] = {&base.workspace, &opt.workspace};
    for (std::size_t i = 0; i < a.seeds; ++i) {
      for (int c = 0; c < 2; ++c) {
        Rng rng(a.seed + i);
        const EpisodeLog log = simulate_episode(*conditions[c], base.task, policy, human, ctx, rng);
        json summary = episode_summary_json(log);
        summary["seed"] = a.seed + i;
        logs[c] += summary.dump() + "\n";
      }
    }
    write_file(dir / "episodes_baseline.jsonl", logs[0]);
    write_file(dir / "episodes_optimized.jsonl", logs[1]);
    json config = resolved_config(base);
    config["sim"]["human"] = report_doc["human"];
    config["sim"]["sigma"] = a.sigma;
    config["sim"]["confidence_threshold"] = policy.confidence_threshold;
    const json outputs = {"report.json", "report.txt", "episodes_baseline.jsonl", "episodes_optimized.jsonl"};
    write_file(dir / "manifest.json",
               canonical_dump(manifest("simulate", argv, {a.baseline, a.optimized}, a.seed, config, started, outputs)));
  }
  if (a.as_json) out << canonical_dump(report_doc) << "\n";
  else out << report_table(report);
  return 0;
}

// ---------------------------------------------------------------- archive

int cmd_archive_inspect(const std::string& path, std::size_t top, bool as_json, std::ostream& out) {
  const Archive archive = load_archive(read_file(path));
  if (archive.empty()) throw ValidationError("cells", "archive has no elites");
  std::vector<std::pair<CellKey, double>> ranked;
  for (const auto& [key, elite] : archive.cells()) ranked.emplace_back(key, -elite.score);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  double sum = 0.0;
  for (const auto& r : ranked) sum += r.second;
  const std::size_t shown = std::min(top, ranked.size());

  if (as_json) {
    json cells = json::array();
    for (std::size_t i = 0; i < shown; ++i) {
      const Elite& e = archive.cells().at(ranked[i].first);
      cells.push_back({{"cell", to_string(ranked[i].first)},
                       {"score", ranked[i].second},
                       {"min_distance", e.features.min_distance},
                       {"ordering_rank", e.features.ordering_rank},
                       {"obstacles", e.workspace.virtual_obstacles.size()}});
    }
    out << canonical_dump({{"cells", archive.size()},
                           {"best_cell", to_string(ranked.front().first)},
                           {"best_score", ranked.front().second},
                           {"worst_score", ranked.back().second},
                           {"mean_score", sum / ranked.size()},
                           {"top", cells}})
        << "\n";
    return 0;
  }
  out << "cells " << archive.size() << "\n"
      << "best " << fixed(ranked.front().second) << " at " << to_string(ranked.front().first) << "\n"
      << "worst " << fixed(ranked.back().second) << "\n"
      << "mean " << fixed(sum / ranked.size()) << "\n\n"
      << std::left << std::setw(10) << "cell" << std::right << std::setw(10) << "score" << std::setw(14)
      << "min_distance" << std::setw(10) << "ordering" << std::setw(11) << "obstacles" << "\n";
  for (std::size_t i = 0; i < shown; ++i) {
    const Elite& e = archive.cells().at(ranked[i].first);
    out << std::left << std::setw(10) << to_string(ranked[i].first) << std::right << std::setw(10)
        << fixed(ranked[i].second) << std::setw(14) << fixed(e.features.min_distance) << std::setw(10)
        << e.features.ordering_rank << std::setw(11) << e.workspace.virtual_obstacles.size() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- serve

int cmd_serve(const ServerConfig& config, std::ostream& out, std::ostream& err) {
  Server server(config);
  for (const auto& p : server.load_problems()) err << "skipped " << p << "\n";
  const auto port = server.start();
  out << "listening on http://" << config.address << ":" << port << "\n" << std::flush;
  server.run_until_signal();
  err << "shut down\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Legible workspace optimization", "legws"};
  app.set_version_flag("--version", std::string(LEGWS_VERSION));
  app.require_subcommand(1);

  OptimizeArgs opt;
  auto* optimize = app.add_subcommand("optimize", "Search layouts with MAP-Elites and write the archive");
  optimize->add_option("scenario", opt.scenario, "Scenario file")->required();
  optimize->add_option("--iters", opt.iters, "Total iterations (default from scenario)");
  optimize->add_option("--init", opt.init, "Initialization iterations (default from scenario)");
  optimize->add_option("--seed", opt.seed, "Random seed (default from scenario)");
  optimize->add_option("--out", opt.out, "Output directory")->capture_default_str();
  optimize->add_flag("--quiet", opt.quiet, "No progress output");

  std::string score_path;
  std::optional<std::uint64_t> score_seed;
  bool score_json_flag = false;
  auto* score = app.add_subcommand("score", "Print the task legibility of a scenario");
  score->add_option("scenario", score_path, "Scenario file")->required();
  score->add_option("--seed", score_seed, "Seed for order sampling (default from scenario)");
  score->add_flag("--json", score_json_flag, "Machine-readable output");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Compare robot inference on two layouts");
  simulate->add_option("baseline", sim.baseline, "Baseline scenario")->required();
  simulate->add_option("optimized", sim.optimized, "Optimized scenario")->required();
  simulate->add_option("--seeds", sim.seeds, "Number of episodes per condition")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "First episode seed")->capture_default_str();
  simulate->add_flag("--noise", sim.noise, "Noisy human model");
  simulate->add_option("--sigma", sim.sigma, "Noisy waypoint jitter in meters (0: half a grid cell)");
  simulate->add_option("--threshold", sim.threshold, "Commit threshold (default from scenario)");
  simulate->add_flag("--json", sim.as_json, "Machine-readable output");
  simulate->add_option("--out", sim.out, "Directory for report, episode logs and manifest");

  auto* archive_cmd = app.add_subcommand("archive", "Archive tools");
  archive_cmd->require_subcommand(1);
  std::string archive_path;
  std::size_t top = 10;
  bool archive_json = false;
  auto* inspect = archive_cmd->add_subcommand("inspect", "Summarize an archive file");
  inspect->add_option("archive", archive_path, "archive.json")->required();
  inspect->add_option("--top", top, "Cells to list")->capture_default_str();
  inspect->add_flag("--json", archive_json, "Machine-readable output");

  ServerConfig serve_config;
  std::uint16_t port = 8080;
  std::size_t idle = 300;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP and WebSocket API");
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--address", serve_config.address, "Listen address")->capture_default_str();
  serve->add_option("--scenario-dir", serve_config.scenario_dir, "Directory of scenario files");
  serve->add_option("--idle-timeout", idle, "WebSocket idle timeout in seconds")->capture_default_str();
  serve->add_option("--threads", serve_config.threads, "I/O threads")->capture_default_str();

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (optimize->parsed()) return cmd_optimize(opt, args, out, err);
    if (score->parsed()) return cmd_score(score_path, score_seed, score_json_flag, out);
    if (simulate->parsed()) return cmd_simulate(sim, args, out);
    if (inspect->parsed()) return cmd_archive_inspect(archive_path, top, archive_json, out);
    if (serve->parsed()) {
      serve_config.port = port;
      serve_config.idle_timeout = std::chrono::seconds(idle);
      return cmd_serve(serve_config, out, err);
    }
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const VersionError& e) {
    err << "version error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace legws
