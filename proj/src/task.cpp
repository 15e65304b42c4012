#include "legws/task.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "legws/error.hpp"

namespace legws {

std::string to_string(Agent a) { return a == Agent::human ? "human" : "robot"; }

Agent agent_from_string(const std::string& name) {
  if (name == "human") return Agent::human;
  if (name == "robot") return Agent::robot;
  throw std::invalid_argument("unknown agent '" + name + "'");
}

std::optional<std::size_t> Task::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < subtasks.size(); ++i) {
    if (subtasks[i].id == id) return i;
  }
  return std::nullopt;
}

namespace {

// Predecessor bitmask per subtask. Precedence must reference known ids.
std::vector<std::uint32_t> predecessor_masks(const Task& task) {
  if (task.subtasks.size() > kMaxSubtasks) {
    throw std::invalid_argument("tasks are limited to " + std::to_string(kMaxSubtasks) + " subtasks");
  }
  std::vector<std::uint32_t> pred(task.subtasks.size(), 0);
  for (const auto& [first, second] : task.precedence) {
    const auto a = task.index_of(first);
    const auto b = task.index_of(second);
    if (!a || !b) throw std::invalid_argument("precedence references unknown subtask");
    pred[*b] |= 1u << *a;
  }
  return pred;
}

// completions[mask] = number of ways to finish the task once `mask` is done.
std::vector<std::uint64_t> completion_counts(const std::vector<std::uint32_t>& pred) {
  const std::size_t m = pred.size();
  const std::uint32_t full = m == 32 ? ~0u : ((1u << m) - 1u);
  std::vector<std::uint64_t> counts(std::size_t{1} << m, 0);
  counts[full] = 1;
  for (std::int64_t mask = static_cast<std::int64_t>(full) - 1; mask >= 0; --mask) {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint32_t bit = 1u << i;
      if ((mask & bit) || (pred[i] & ~static_cast<std::uint32_t>(mask))) continue;
      total += counts[static_cast<std::size_t>(mask) | bit];
    }
    counts[static_cast<std::size_t>(mask)] = total;
  }
  return counts;
}

Order unrank(const Task& task, const std::vector<std::uint32_t>& pred, const std::vector<std::uint64_t>& counts,
             std::uint64_t rank) {
  Order out;
  std::uint32_t mask = 0;
  for (std::size_t step = 0; step < pred.size(); ++step) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const std::uint32_t bit = 1u << i;
      if ((mask & bit) || (pred[i] & ~mask)) continue;
      const std::uint64_t c = counts[mask | bit];
      if (rank < c) {
        out.push_back(task.subtasks[i].id);
        mask |= bit;
        break;
      }
      rank -= c;
    }
  }
  return out;
}

}  // namespace

std::optional<std::vector<std::string>> find_cycle(const Task& task) {
  const std::size_t m = task.subtasks.size();
  std::vector<std::vector<std::size_t>> succ(m);
  for (const auto& [first, second] : task.precedence) {
    const auto a = task.index_of(first);
    const auto b = task.index_of(second);
    if (a && b) succ[*a].push_back(*b);
  }
  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> state(m, 0);
  std::vector<std::size_t> stack;
  std::optional<std::vector<std::string>> cycle;

  auto dfs = [&](auto&& self, std::size_t v) -> bool {
    state[v] = 1;
    stack.push_back(v);
    for (std::size_t w : succ[v]) {
      if (state[w] == 1) {
        const auto from = std::find(stack.begin(), stack.end(), w);
        std::vector<std::string> ids;
        for (auto it = from; it != stack.end(); ++it) ids.push_back(task.subtasks[*it].id);
        ids.push_back(task.subtasks[w].id);
        cycle = std::move(ids);
        return true;
      }
      if (state[w] == 0 && self(self, w)) return true;
    }
    stack.pop_back();
    state[v] = 2;
    return false;
  };
  for (std::size_t v = 0; v < m; ++v) {
    if (state[v] == 0 && dfs(dfs, v)) break;
  }
  return cycle;
}

std::optional<Violation> check_task(const Task& task, const Workspace* ws) {
  if (task.subtasks.empty()) return Violation{"task.subtasks", "task has no subtasks"};
  if (task.subtasks.size() > kMaxSubtasks) {
    return Violation{"task.subtasks", "at most " + std::to_string(kMaxSubtasks) + " subtasks are supported"};
  }
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < task.subtasks.size(); ++i) {
    const Subtask& st = task.subtasks[i];
    const std::string path = "task.subtasks[" + std::to_string(i) + "]";
    if (st.id.empty()) return Violation{path + ".id", "subtask id is empty"};
    if (!ids.insert(st.id).second) return Violation{path + ".id", "duplicate subtask id '" + st.id + "'"};
    if (ws && !ws->find_item(st.goal_item)) {
      return Violation{path + ".goal_item", "unknown item '" + st.goal_item + "'"};
    }
  }
  for (std::size_t k = 0; k < task.precedence.size(); ++k) {
    const auto& [first, second] = task.precedence[k];
    const std::string path = "task.precedence[" + std::to_string(k) + "]";
    if (!task.index_of(first)) return Violation{path, "unknown subtask '" + first + "'"};
    if (!task.index_of(second)) return Violation{path, "unknown subtask '" + second + "'"};
  }
  if (const auto cycle = find_cycle(task)) {
    std::string text = "cycle ";
    for (std::size_t i = 0; i < cycle->size(); ++i) text += (i ? "→" : "") + (*cycle)[i];
    return Violation{"task.precedence", text};
  }
  return std::nullopt;
}

std::uint64_t count_orders(const Task& task) {
  if (find_cycle(task)) throw CyclicPrecedence("precedence constraints contain a cycle");
  const auto pred = predecessor_masks(task);
  return completion_counts(pred)[0];
}

std::vector<Order> valid_orders(const Task& task, std::size_t max_orders, Rng& rng) {
  if (find_cycle(task)) throw CyclicPrecedence("precedence constraints contain a cycle");
  if (max_orders == 0) throw std::invalid_argument("max_orders must be positive");
  const auto pred = predecessor_masks(task);
  const auto counts = completion_counts(pred);
  const std::uint64_t total = counts[0];

  std::vector<std::uint64_t> ranks;
  if (total <= max_orders) {
    ranks.resize(total);
    for (std::uint64_t r = 0; r < total; ++r) ranks[r] = r;
  } else {
    // Floyd's sampling of max_orders distinct ranks.
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = total - max_orders; j < total; ++j) {
      const std::uint64_t t = rng.index(j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    ranks.assign(chosen.begin(), chosen.end());
  }
  std::vector<Order> out;
  out.reserve(ranks.size());
  for (std::uint64_t r : ranks) out.push_back(unrank(task, pred, counts, r));
  return out;
}

std::vector<std::string> eligible_goals(const Task& task, const std::set<std::string>& completed) {
  std::set<std::string> goals;
  for (const Subtask& st : task.subtasks) {
    if (completed.count(st.id)) continue;
    const bool ready = std::all_of(task.precedence.begin(), task.precedence.end(), [&](const auto& edge) {
      return edge.second != st.id || completed.count(edge.first);
    });
    if (ready) goals.insert(st.goal_item);
  }
  return {goals.begin(), goals.end()};
}

namespace {

TaskScore evaluate(const CostModel& model, const Workspace& ws, const Task& task, const LegibilityParams& params,
                   const TaskConfig& config, bool detail, const OrderSample* sample) {
  std::optional<OrderSample> own;
  if (!sample) sample = &own.emplace(sample_orders(task, config));
  const auto& orders = sample->orders;
  const auto pred = predecessor_masks(task);
  const std::size_t m = task.subtasks.size();

  std::vector<std::size_t> item_of(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto idx = ws.item_index(task.subtasks[i].goal_item);
    if (!idx) throw std::invalid_argument("subtask references unknown item '" + task.subtasks[i].goal_item + "'");
    item_of[i] = *idx;
  }

  // Eligible goal items for a completed-subtask mask, sorted by id.
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> eligible;
  auto eligible_items = [&](std::uint32_t done) -> const std::vector<std::size_t>& {
    auto it = eligible.find(done);
    if (it != eligible.end()) return it->second;
    std::vector<std::size_t> items;
    for (std::size_t i = 0; i < m; ++i) {
      if (!(done & (1u << i)) && !(pred[i] & ~done)) items.push_back(item_of[i]);
    }
    std::sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) { return ws.items[a].id < ws.items[b].id; });
    items.erase(std::unique(items.begin(), items.end()), items.end());
    return eligible.emplace(done, std::move(items)).first->second;
  };

  // Per-goal legibility only depends on where the human stands, which goals
  // are eligible and which one is true; orders share most of those states.
  // With a shared grid cache the value is also kept across workspaces: it
  // depends on nothing but the grid, the cells involved and the parameters.
  std::map<std::tuple<std::size_t, std::uint32_t, std::size_t>, double> memo;
  PlanCache::Entry* entry = model.cache_entry();
  std::string params_key;
  if (entry) {
    auto put = [&params_key](double v) { params_key.append(reinterpret_cast<const char*>(&v), sizeof v); };
    put(params.beta);
    put(params.penalty_c);
    for (double c : params.checkpoints) put(c);
    params_key.push_back('|');
  }
  auto score_goal = [&](Point2 start, std::uint32_t done, std::size_t truth) {
    const std::size_t start_idx = model.grid().index(model.cell_of(start));
    const auto k = std::make_tuple(start_idx, done, truth);
    auto it = memo.find(k);
    if (it != memo.end()) return it->second;
    const auto& items = eligible_items(done);
    std::string shared_key;
    if (entry) {
      shared_key = params_key;
      auto put = [&shared_key](std::uint64_t v) { shared_key.append(reinterpret_cast<const char*>(&v), sizeof v); };
      put(start_idx);
      for (std::size_t g : items) put(model.grid().index(model.cell_of(ws.items[g].pos)) * 2 + (g == truth ? 1 : 0));
      if (auto hit = entry->memo.find(shared_key); hit != entry->memo.end()) {
        return memo.emplace(k, hit->second).first->second;
      }
    }
    std::vector<Goal> goals;
    for (std::size_t g : items) goals.push_back({ws.items[g].id, ws.items[g].pos});
    const double v = env_legibility(model, start, ws.items[truth].id, goals, params);
    if (entry) {
      if (entry->memo.size() >= 100000) entry->memo.clear();
      entry->memo.emplace(std::move(shared_key), v);
    }
    return memo.emplace(k, v).first->second;
  };

  TaskScore out;
  out.total_orders = sample->total;
  out.sampled = sample->total > orders.size();
  double sum = 0.0;
  for (const auto& order : orders) {
    OrderBreakdown ob;
    if (detail) {
      for (std::size_t si : order) ob.order.push_back(task.subtasks[si].id);
    }
    std::uint32_t done = 0;
    Point2 human = ws.start;
    for (const std::size_t si : order) {
      const Subtask& st = task.subtasks[si];
      StepBreakdown step;
      if (detail) {
        step.subtask = st.id;
        step.agent = st.agent;
        step.start = human;
      }
      if (st.agent == Agent::human) {
        const auto& goals = eligible_items(done);
        std::vector<std::size_t> scored;
        if (config.score_current_goal_only) {
          scored.push_back(item_of[si]);
        } else {
          scored = goals;
        }
        for (std::size_t g : scored) {
          const double v = score_goal(human, done, g);
          step.score += v;
          if (detail) {
            step.scored_goals.push_back(ws.items[g].id);
            step.goal_scores.push_back(v);
          }
        }
        if (detail) {
          for (std::size_t g : goals) step.goals.push_back(ws.items[g].id);
        }
        human = config.return_home ? ws.start : ws.items[item_of[si]].pos;
      }
      done |= 1u << si;
      ob.score += step.score;
      if (detail) ob.steps.push_back(std::move(step));
    }
    sum += ob.score;
    if (detail) out.orders.push_back(std::move(ob));
  }
  out.total = sum / static_cast<double>(orders.size());
  return out;
}

}  // namespace

TaskScore task_legibility(const CostModel& model, const Workspace& ws, const Task& task,
                          const LegibilityParams& params, const TaskConfig& config) {
  return evaluate(model, ws, task, params, config, true, nullptr);
}

OrderSample sample_orders(const Task& task, const TaskConfig& config) {
  Rng rng(config.seed);
  OrderSample out;
  out.total = count_orders(task);
  for (const Order& order : valid_orders(task, config.max_orders, rng)) {
    std::vector<std::size_t> idx;
    for (const std::string& id : order) idx.push_back(*task.index_of(id));
    out.orders.push_back(std::move(idx));
  }
  return out;
}

double task_legibility_score(const Workspace& ws, const PlannerSettings& settings, const Task& task,
                             const LegibilityParams& params, const TaskConfig& config, PlanCache* cache,
                             const OrderSample* orders) {
  const CostModel model(ws, settings, cache);
  return evaluate(model, ws, task, params, config, false, orders).total;
}

}  // namespace legws
