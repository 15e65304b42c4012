#include <doctest.h>

#include "support.hpp"

#include "legws/error.hpp"

using namespace legws;
using namespace support;

namespace {

const PlannerSettings kFree{0.1, 0.0};

Point2 center_of(Cell c) { return {(c.col + 0.5) * 0.1, (c.row + 0.5) * 0.1}; }

Task make_task(std::size_t m, const std::vector<std::pair<int, int>>& edges) {
  Task t;
  for (std::size_t i = 0; i < m; ++i) t.subtasks.push_back({"s" + std::to_string(i), "i" + std::to_string(i), Agent::human});
  for (auto [a, b] : edges) t.precedence.push_back({"s" + std::to_string(a), "s" + std::to_string(b)});
  return t;
}

// Every permutation of the subtask ids that respects the precedence pairs.
std::set<Order> brute_orders(const Task& t) {
  std::vector<std::string> ids;
  for (const auto& s : t.subtasks) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  std::set<Order> out;
  do {
    bool ok = true;
    for (const auto& [a, b] : t.precedence) {
      const auto pa = std::find(ids.begin(), ids.end(), a), pb = std::find(ids.begin(), ids.end(), b);
      if (pa > pb) ok = false;
    }
    if (ok) out.insert(ids);
  } while (std::next_permutation(ids.begin(), ids.end()));
  return out;
}

// Square-corner layout: S and three goals on the corners of an 11-cell square,
// so every leg between them is a pure axis or pure diagonal move.
const Cell kS{3, 3}, kG1{14, 3}, kG2{3, 14}, kG3{14, 14};

Workspace corner_workspace() {
  return open_workspace(1.8, 1.8, center_of(kS),
                        {{"g1", center_of(kG1), 0.02}, {"g2", center_of(kG2), 0.02}, {"g3", center_of(kG3), 0.02}});
}

// Task legibility by enumeration with closed-form step scores.
double oracle_task_score(const Task& task, bool return_home, const LegibilityParams& params, double diagonal) {
  const std::map<std::string, Cell> cell{{"g1", kG1}, {"g2", kG2}, {"g3", kG3}};
  const auto orders = brute_orders(task);
  double sum = 0.0;
  for (const Order& order : orders) {
    std::set<std::string> done;
    Cell human = kS;
    for (const std::string& id : order) {
      const Subtask& st = task.subtasks[*task.index_of(id)];
      if (st.agent == Agent::human) {
        std::vector<std::string> goal_ids = eligible_goals(task, done);
        std::vector<Cell> cells;
        for (const auto& g : goal_ids) cells.push_back(cell.at(g));
        for (std::size_t k = 0; k < cells.size(); ++k) {
          sum += oracle_env_legibility_free(human, cells, k, params, 0.1, diagonal);
        }
        human = return_home ? kS : cell.at(st.goal_item);
      }
      done.insert(id);
    }
  }
  return sum / orders.size();
}

}  // namespace

TEST_CASE("valid_orders examples") {
  Rng rng(0);
  CHECK(valid_orders(make_task(3, {}), 500, rng).size() == 6);
  const auto chain = valid_orders(make_task(3, {{0, 1}, {1, 2}}), 500, rng);
  REQUIRE(chain.size() == 1);
  CHECK(chain[0] == Order{"s0", "s1", "s2"});
  const auto partial = valid_orders(make_task(3, {{0, 1}}), 500, rng);
  CHECK(partial.size() == 3);
  CHECK(partial.front() == Order{"s0", "s1", "s2"});
  CHECK_THROWS_AS(valid_orders(make_task(2, {{0, 1}, {1, 0}}), 500, rng), CyclicPrecedence);
  CHECK_THROWS_AS(count_orders(make_task(3, {{0, 1}, {1, 2}, {2, 0}})), CyclicPrecedence);
  CHECK(count_orders(make_task(4, {})) == 24);
}

TEST_CASE("valid_orders agrees with permutation filtering on random DAGs") {
  Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng.index(7);
    std::vector<std::pair<int, int>> edges;
    // Edges go from lower to higher position in a random permutation, so the
    // graph is acyclic.
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        if (rng.uniform() < 0.3) edges.push_back({perm[a], perm[b]});
    const Task t = make_task(m, edges);
    const auto expected = brute_orders(t);
    const auto got = valid_orders(t, 100000, rng);
    CHECK(std::set<Order>(got.begin(), got.end()) == expected);
    CHECK(got.size() == expected.size());
    CHECK(count_orders(t) == expected.size());
    CHECK(std::is_sorted(got.begin(), got.end(), [&](const Order& x, const Order& y) {
      std::vector<std::size_t> a, b;
      for (const auto& id : x) a.push_back(*t.index_of(id));
      for (const auto& id : y) b.push_back(*t.index_of(id));
      return a < b;
    }));
  }
}

TEST_CASE("valid_orders samples distinct orders when there are too many") {
  const Task t = make_task(6, {});
  Rng rng(3);
  const auto got = valid_orders(t, 50, rng);
  CHECK(got.size() == 50);
  CHECK(std::set<Order>(got.begin(), got.end()).size() == 50);
  const auto all = brute_orders(t);
  for (const auto& o : got) CHECK(all.count(o) == 1);
  Rng again(3);
  CHECK(valid_orders(t, 50, again) == got);
  CHECK_THROWS_AS(valid_orders(t, 0, rng), std::invalid_argument);
}

TEST_CASE("eligible_goals examples") {
  Task t = make_task(3, {{0, 1}});
  CHECK(eligible_goals(t, {}) == std::vector<std::string>{"i0", "i2"});
  CHECK(eligible_goals(t, {"s0"}) == std::vector<std::string>{"i1", "i2"});
  CHECK(eligible_goals(t, {"s0", "s1", "s2"}).empty());
  t.subtasks[2].goal_item = "i0";
  CHECK(eligible_goals(t, {}) == std::vector<std::string>{"i0"});
}

TEST_CASE("check_task and find_cycle") {
  CHECK_FALSE(check_task(make_task(3, {{0, 1}}), nullptr));
  const auto cyc = check_task(make_task(3, {{0, 1}, {1, 2}, {2, 0}}), nullptr);
  REQUIRE(cyc);
  CHECK(cyc->path == "task.precedence");
  const auto cycle = find_cycle(make_task(3, {{0, 1}, {1, 2}, {2, 0}}));
  REQUIRE(cycle);
  CHECK(cycle->size() == 4);
  CHECK(cycle->front() == cycle->back());
  CHECK(check_task(Task{}, nullptr)->path == "task.subtasks");
  Task dup = make_task(2, {});
  dup.subtasks[1].id = "s0";
  CHECK(check_task(dup, nullptr));
  CHECK(check_task(make_task(2, {{0, 5}}), nullptr));
  const Workspace ws = corner_workspace();
  const auto missing = check_task(make_task(1, {}), &ws);
  REQUIRE(missing);
  CHECK(missing->path == "task.subtasks[0].goal_item");
}

TEST_CASE("task legibility of a single subtask is one") {
  const Workspace ws = corner_workspace();
  const double v = task_legibility_score(ws, kFree, all_human({"g1"}), {}, {});
  CHECK(v == 1.0);
}

TEST_CASE("task legibility of coincident goals") {
  Workspace ws = corner_workspace();
  ws.items[1].pos = ws.items[0].pos;
  // Step one: two tied goals, each penalized. Step two: one goal, margin one.
  const double v = task_legibility_score(ws, kFree, all_human({"g1", "g2"}, {}), {}, {});
  CHECK(v == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("task legibility matches the closed-form oracle on square corners") {
  const Workspace ws = corner_workspace();
  const double diagonal = ws.bounds.diagonal();
  const std::vector<std::vector<std::pair<std::string, std::string>>> precedences{
      {}, {{"g1", "g2"}, {"g2", "g3"}}, {{"g1", "g3"}}, {{"g3", "g1"}}};
  for (const auto& prec : precedences) {
    for (bool home : {false, true}) {
      for (double beta : {2.0, 5.0, 12.0}) {
        LegibilityParams params;
        params.beta = beta;
        TaskConfig config;
        config.return_home = home;
        const Task task = all_human({"g1", "g2", "g3"}, prec);
        const double expected = oracle_task_score(task, home, params, diagonal);
        const double got = task_legibility_score(ws, kFree, task, params, config);
        CHECK(std::abs(got - expected) <= 1e-9);
      }
    }
  }
}

TEST_CASE("robot subtasks keep the human in place and score nothing") {
  const Workspace ws = corner_workspace();
  Task task = all_human({"g1", "g2", "g3"}, {{"g1", "g2"}, {"g2", "g3"}});
  task.subtasks[1].agent = Agent::robot;
  const CostModel model(ws, kFree);
  const TaskScore s = task_legibility(model, ws, task, {}, {});
  REQUIRE(s.orders.size() == 1);
  const auto& steps = s.orders[0].steps;
  REQUIRE(steps.size() == 3);
  CHECK(steps[1].score == 0.0);
  CHECK(steps[1].scored_goals.empty());
  CHECK(steps[2].start == ws.items[0].pos);
  CHECK(steps[2].score == 1.0);
  CHECK(s.total == doctest::Approx(steps[0].score + 1.0));

  // Same as the oracle with the robot step removed from scoring.
  const double oracle = oracle_task_score(task, false, {}, ws.bounds.diagonal());
  CHECK(std::abs(s.total - oracle) <= 1e-9);
}

TEST_CASE("score_current_goal_only scores the subtask's own goal") {
  const Workspace ws = corner_workspace();
  const Task task = all_human({"g1", "g2", "g3"}, {{"g1", "g2"}, {"g2", "g3"}});
  TaskConfig config;
  config.score_current_goal_only = true;
  const CostModel model(ws, kFree);
  const TaskScore s = task_legibility(model, ws, task, {}, config);
  REQUIRE(s.orders.size() == 1);
  for (const auto& step : s.orders[0].steps) CHECK(step.scored_goals.size() == 1);
  CHECK(s.total == doctest::Approx(3.0));
}

TEST_CASE("task legibility is invariant to declaration order") {
  Rng rng(21);
  const Workspace base = corner_workspace();
  const Task task = all_human({"g1", "g2", "g3"}, {{"g1", "g3"}});
  const double ref = task_legibility_score(base, kFree, task, {}, {});
  for (int trial = 0; trial < 10; ++trial) {
    Workspace ws = base;
    Task t = task;
    for (std::size_t i = ws.items.size(); i > 1; --i) std::swap(ws.items[i - 1], ws.items[rng.index(i)]);
    for (std::size_t i = t.subtasks.size(); i > 1; --i) std::swap(t.subtasks[i - 1], t.subtasks[rng.index(i)]);
    CHECK(std::abs(task_legibility_score(ws, kFree, t, {}, {}) - ref) <= 1e-12);
  }
}

TEST_CASE("task legibility bounds and seed independence on random layouts") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Item> items;
    std::vector<std::string> ids;
    while (items.size() < 4) {
      const Point2 p{rng.uniform(0.1, 1.7), rng.uniform(0.1, 1.7)};
      bool ok = true;
      for (const auto& it : items) ok = ok && distance(it.pos, p) > 0.1;
      if (!ok) continue;
      ids.push_back("k" + std::to_string(items.size()));
      items.push_back({ids.back(), p, 0.02});
    }
    const Workspace ws = open_workspace(1.8, 1.8, {0.9, 0.05}, items);
    const Task task = all_human(ids, {{"k0", "k1"}});
    LegibilityParams params;
    params.penalty_c = rng.uniform(0, 2);
    TaskConfig a, b;
    a.seed = 1;
    b.seed = 99;
    const double va = task_legibility_score(ws, kFree, task, params, a);
    CHECK(va == task_legibility_score(ws, kFree, task, params, b));
    // Each order scores at most one per eligible goal per step: 3 + 3 + 2 + 1.
    CHECK(va <= 9.0 + 1e-12);
    CHECK(va >= -9.0 * params.penalty_c - 1e-12);
  }
}

TEST_CASE("sampled orders are reported and reproducible") {
  std::vector<Item> items;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    ids.push_back("k" + std::to_string(i));
    items.push_back({ids.back(), {0.2 + 0.25 * i, 1.2 + 0.1 * (i % 2)}, 0.02});
  }
  const Workspace ws = open_workspace(1.8, 1.8, {0.9, 0.05}, items);
  const Task task = all_human(ids);
  TaskConfig config;
  config.max_orders = 40;
  config.seed = 5;
  const CostModel model(ws, kFree);
  const TaskScore s = task_legibility(model, ws, task, {}, config);
  CHECK(s.sampled);
  CHECK(s.total_orders == 720);
  CHECK(s.orders.size() == 40);
  CHECK(task_legibility(model, ws, task, {}, config).total == s.total);
  CHECK(task_legibility_score(ws, kFree, task, {}, config) == s.total);
}
