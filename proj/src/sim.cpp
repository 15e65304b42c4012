#include "legws/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "legws/planner.hpp"

namespace legws {

void RobotPolicy::validate() const {
  if (!(confidence_threshold > 0.5 && confidence_threshold <= 1.0)) {
    throw std::invalid_argument("sim.confidence_threshold must lie in (0.5, 1]");
  }
}

const MetricComparison& ComparisonReport::metric(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  throw std::out_of_range("no metric named '" + name + "'");
}

namespace {

// Points every `spacing` of arc length along the polyline, excluding its
// first point and ending exactly on its last.
std::vector<Point2> resample(const std::vector<Point2>& poly, double spacing) {
  std::vector<Point2> out;
  if (poly.size() < 2) return out;
  double next = spacing;
  double walked = 0.0;
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const double len = distance(poly[i - 1], poly[i]);
    while (len > 0.0 && next < walked + len - 1e-9) {
      const double t = (next - walked) / len;
      out.push_back(poly[i - 1] + t * (poly[i] - poly[i - 1]));
      next += spacing;
    }
    walked += len;
  }
  if (out.empty() || !(out.back() == poly.back())) out.push_back(poly.back());
  return out;
}

// Nearest cell center to `p` that is free and reachable in `field`.
Point2 project_to_free(const OccupancyGrid& grid, const DistanceField& field, Point2 p) {
  const auto c = grid.cell_of(p);
  if (c && field.reachable(*c)) return p;
  double best = std::numeric_limits<double>::infinity();
  Point2 out = p;
  for (int row = 0; row < grid.height(); ++row) {
    for (int col = 0; col < grid.width(); ++col) {
      if (!field.reachable({col, row})) continue;
      const Point2 center = grid.center({col, row});
      const double d = distance(center, p);
      if (d < best) {
        best = d;
        out = center;
      }
    }
  }
  return out;
}

}  // namespace

EpisodeLog simulate_episode(const Workspace& ws, const Task& task, const RobotPolicy& policy,
                            const HumanModel& human, const SimContext& ctx, Rng& rng) {
  policy.validate();
  if (auto v = check_task(task, &ws)) throw std::invalid_argument(v->path + ": " + v->reason);
  const CostModel model(ws, ctx.planner);
  const OccupancyGrid& grid = model.grid();
  const double sigma = human.sigma > 0.0 ? human.sigma : 0.5 * grid.resolution();

  EpisodeLog log;
  log.order = valid_orders(task, 1, rng).front();
  Rng noise = rng.fork(1);

  std::set<std::string> completed;
  Point2 here = ws.start;
  std::size_t tick = 0;
  for (std::size_t k = 0; k < log.order.size(); ++k) {
    const Subtask& st = task.subtasks[*task.index_of(log.order[k])];
    if (st.agent != Agent::human) {
      completed.insert(st.id);
      continue;
    }
    const Item& target = *ws.find_item(st.goal_item);
    std::vector<Goal> goals;
    for (const auto& id : eligible_goals(task, completed)) goals.push_back({id, ws.find_item(id)->pos});

    std::vector<Point2> walk = resample(plan_path(grid, here, target.pos).waypoints, grid.resolution());
    if (human.kind == HumanModelKind::noisy && walk.size() > 1) {
      const DistanceField& from_start = model.field_to(model.cell_of(here));
      for (std::size_t i = 0; i + 1 < walk.size(); ++i) {
        const Point2 jittered{walk[i].x + noise.normal(0.0, sigma), walk[i].y + noise.normal(0.0, sigma)};
        walk[i] = project_to_free(grid, from_start, jittered);
      }
    }

    SubtaskOutcome outcome;
    outcome.subtask = st.id;
    outcome.goal = st.goal_item;
    outcome.steps = walk.size();
    std::vector<Point2> observed{here};
    std::string previous;
    for (std::size_t step = 0; step <= walk.size(); ++step) {
      if (step > 0) observed.push_back(walk[step - 1]);
      StepRecord rec;
      rec.tick = tick++;
      rec.subtask_index = k;
      rec.subtask = st.id;
      rec.step = step;
      rec.position = observed.back();
      rec.belief = goal_posterior(model, here, observed, goals, ctx.legibility);
      rec.argmax = rec.belief.argmax();
      if (!outcome.steps_to_commit) {
        if (rec.belief.max_probability() >= policy.confidence_threshold) {
          rec.commit = true;
          outcome.steps_to_commit = step;
          outcome.committed_goal = rec.argmax;
          outcome.correct = rec.argmax == st.goal_item;
        }
      } else if (policy.replan_on_argmax_change && rec.argmax != previous) {
        rec.replan = true;
        ++outcome.replans;
      }
      previous = rec.argmax;
      log.records.push_back(std::move(rec));
    }
    log.replan_count += outcome.replans;
    log.subtasks.push_back(std::move(outcome));
    completed.insert(st.id);
    here = ctx.return_home ? ws.start : target.pos;
  }
  return log;
}

double episode_steps_to_commit(const EpisodeLog& log) {
  if (log.subtasks.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : log.subtasks) sum += static_cast<double>(s.steps_to_commit.value_or(s.steps));
  return sum / static_cast<double>(log.subtasks.size());
}

std::optional<double> episode_commit_accuracy(const EpisodeLog& log) {
  std::size_t committed = 0, correct = 0;
  for (const auto& s : log.subtasks) {
    if (!s.steps_to_commit) continue;
    ++committed;
    if (s.correct) ++correct;
  }
  if (committed == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(committed);
}

double sign_test_p_value(std::size_t a, std::size_t b) {
  const std::size_t n = a + b;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(a, b);
  // P(X <= k) for X ~ Binomial(n, 1/2), summed in log space.
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double log_term = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(i) + 1.0) -
                            std::lgamma(static_cast<double>(n - i) + 1.0) - static_cast<double>(n) * std::log(2.0);
    tail += std::exp(log_term);
  }
  return std::min(1.0, 2.0 * tail);
}

namespace {

MetricSummary summarize(const std::vector<std::optional<double>>& values) {
  MetricSummary out;
  double sum = 0.0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++out.count;
  }
  if (out.count == 0) return out;
  const double mean = sum / static_cast<double>(out.count);
  out.mean = mean;
  if (out.count > 1) {
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) ss += (*v - mean) * (*v - mean);
    }
    out.stddev = std::sqrt(ss / static_cast<double>(out.count - 1));
  }
  return out;
}

MetricComparison compare_metric(std::string name, const std::vector<std::optional<double>>& base,
                                const std::vector<std::optional<double>>& opt) {
  MetricComparison m;
  m.name = std::move(name);
  m.baseline = summarize(base);
  m.optimized = summarize(opt);
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!base[i] || !opt[i]) continue;
    if (*opt[i] < *base[i]) {
      ++m.lower;
    } else if (*opt[i] > *base[i]) {
      ++m.higher;
    } else {
      ++m.ties;
    }
  }
  m.p_value = sign_test_p_value(m.lower, m.higher);
  m.direction = m.lower > m.higher ? "lower" : (m.higher > m.lower ? "higher" : "equal");
  return m;
}

}  // namespace

ComparisonReport compare_conditions(const Workspace& baseline, const Workspace& optimized, const Task& task,
                                    const RobotPolicy& policy, const HumanModel& human, const SimContext& ctx,
                                    std::size_t n_seeds, std::uint64_t first_seed) {
  if (n_seeds == 0) throw std::invalid_argument("n_seeds must be positive");
  std::vector<std::optional<double>> commit[2], accuracy[2], replans[2];
  const Workspace* conditions[2] = {&baseline, &optimized};
  for (std::size_t i = 0; i < n_seeds; ++i) {
    for (int c = 0; c < 2; ++c) {
      Rng rng(first_seed + i);
      const EpisodeLog log = simulate_episode(*conditions[c], task, policy, human, ctx, rng);
      commit[c].push_back(episode_steps_to_commit(log));
      accuracy[c].push_back(episode_commit_accuracy(log));
      replans[c].push_back(static_cast<double>(log.replan_count));
    }
  }
  ComparisonReport report;
  report.n_seeds = n_seeds;
  report.first_seed = first_seed;
  report.metrics.push_back(compare_metric("steps_to_commit", commit[0], commit[1]));
  report.metrics.push_back(compare_metric("commit_accuracy", accuracy[0], accuracy[1]));
  report.metrics.push_back(compare_metric("replans", replans[0], replans[1]));
  return report;
}

nlohmann::json step_to_json(const StepRecord& rec) {
  nlohmann::json belief = nlohmann::json::object();
  for (const auto& [id, p] : rec.belief.entries) belief[id] = p;
  return {{"tick", rec.tick},
          {"subtask_index", rec.subtask_index},
          {"subtask", rec.subtask},
          {"step", rec.step},
          {"position", {rec.position.x, rec.position.y}},
          {"belief", belief},
          {"argmax", rec.argmax},
          {"commit", rec.commit},
          {"replan", rec.replan}};
}

std::string episode_jsonl(const EpisodeLog& log) {
  std::string out;
  for (const auto& rec : log.records) out += step_to_json(rec).dump() + "\n";
  return out;
}

nlohmann::json episode_summary_json(const EpisodeLog& log) {
  nlohmann::json subtasks = nlohmann::json::array();
  for (const auto& s : log.subtasks) {
    subtasks.push_back({{"subtask", s.subtask},
                        {"goal", s.goal},
                        {"steps", s.steps},
                        {"steps_to_commit", s.steps_to_commit ? nlohmann::json(*s.steps_to_commit) : nullptr},
                        {"committed_goal", s.committed_goal ? nlohmann::json(*s.committed_goal) : nullptr},
                        {"correct", s.correct},
                        {"replans", s.replans}});
  }
  return {{"order", log.order}, {"subtasks", subtasks}, {"replan_count", log.replan_count}};
}

namespace {

nlohmann::json summary_json(const MetricSummary& s) {
  return {{"mean", s.mean ? nlohmann::json(*s.mean) : nullptr}, {"stddev", s.stddev}, {"count", s.count}};
}

std::string fmt(const MetricSummary& s) {
  if (!s.mean) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f +/- %.3f", *s.mean, s.stddev);
  return buf;
}

}  // namespace

nlohmann::json report_to_json(const ComparisonReport& report) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& m : report.metrics) {
    metrics[m.name] = {{"baseline", summary_json(m.baseline)},
                       {"optimized", summary_json(m.optimized)},
                       {"sign_test",
                        {{"lower", m.lower},
                         {"higher", m.higher},
                         {"ties", m.ties},
                         {"p_value", m.p_value},
                         {"direction", m.direction}}}};
  }
  return {{"n_seeds", report.n_seeds}, {"first_seed", report.first_seed}, {"metrics", metrics}};
}

std::string report_table(const ComparisonReport& report) {
  std::vector<std::vector<std::string>> rows{
      {"metric", "baseline", "optimized", "lower/higher/ties", "p", "direction"}};
  for (const auto& m : report.metrics) {
    char p[32];
    std::snprintf(p, sizeof p, "%.3g", m.p_value);
    rows.push_back({m.name, fmt(m.baseline), fmt(m.optimized),
                    std::to_string(m.lower) + "/" + std::to_string(m.higher) + "/" + std::to_string(m.ties), p,
                    m.direction});
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out += r[i];
      if (i + 1 < r.size()) out += std::string(width[i] - r[i].size() + 2, ' ');
    }
    out += "\n";
  }
  return out;
}

}  // namespace legws
