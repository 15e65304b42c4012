#include "legws/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "legws/error.hpp"

namespace legws {

using nlohmann::json;

namespace {

// A json node plus the dotted path used in validation messages.
class Field {
 public:
  Field(const json& node, std::string path) : node_(&node), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *node_; }

  [[noreturn]] void fail(const std::string& reason) const { throw ValidationError(path_, reason); }

  Field at(const std::string& key) const {
    if (!node_->is_object()) fail("expected an object");
    auto it = node_->find(key);
    if (it == node_->end()) throw ValidationError(child_path(key), "missing field");
    return {*it, child_path(key)};
  }
  std::optional<Field> find(const std::string& key) const {
    if (!node_->is_object()) fail("expected an object");
    auto it = node_->find(key);
    if (it == node_->end()) return std::nullopt;
    return Field{*it, child_path(key)};
  }
  Field operator[](std::size_t i) const { return {(*node_)[i], path_ + "[" + std::to_string(i) + "]"}; }
  std::size_t size() const {
    if (!node_->is_array()) fail("expected an array");
    return node_->size();
  }

  double number() const {
    if (!node_->is_number()) fail("expected a number");
    const double v = node_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  std::int64_t integer() const {
    if (!node_->is_number_integer()) fail("expected an integer");
    return node_->get<std::int64_t>();
  }
  std::uint64_t count() const {
    const std::int64_t v = integer();
    if (v < 0) fail("expected a non-negative integer");
    return static_cast<std::uint64_t>(v);
  }
  bool boolean() const {
    if (!node_->is_boolean()) fail("expected a boolean");
    return node_->get<bool>();
  }
  std::string string() const {
    if (!node_->is_string()) fail("expected a string");
    return node_->get<std::string>();
  }
  Point2 point() const {
    if (size() != 2) fail("expected [x, y]");
    return {(*this)[0].number(), (*this)[1].number()};
  }

 private:
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json* node_;
  std::string path_;
};

json point_json(Point2 p) { return json::array({p.x, p.y}); }

json polygons_json(const std::vector<ConvexPolygon>& polys) {
  json out = json::array();
  for (const auto& poly : polys) {
    json verts = json::array();
    for (const Point2& v : poly.vertices()) verts.push_back(point_json(v));
    out.push_back({{"vertices", verts}});
  }
  return out;
}

std::vector<ConvexPolygon> polygons_from(const Field& f) {
  std::vector<ConvexPolygon> out;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Field verts = f[k].at("vertices");
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < verts.size(); ++i) pts.push_back(verts[i].point());
    try {
      out.push_back(ConvexPolygon::from_vertices(std::move(pts)));
    } catch (const DegenerateInput& e) {
      verts.fail(e.what());
    }
  }
  return out;
}

void dump_number(std::string& out, const json& j) {
  if (j.is_number_integer()) {
    out += j.dump();
    return;
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw std::invalid_argument("cannot serialize a non-finite number");
  if (v == 0.0) {
    out += "0";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out += buf;
}

bool is_scalar_array(const json& j) {
  for (const auto& e : j) {
    if (e.is_structured()) return false;
  }
  return true;
}

void dump(std::string& out, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ",\n";
      first = false;
      out += inner + json(it.key()).dump() + ": ";
      dump(out, it.value(), indent + 1);
    }
    out += "\n" + pad + "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    if (is_scalar_array(j)) {
      out += "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ", ";
        dump(out, j[i], indent + 1);
      }
      out += "]";
      return;
    }
    bool points = true;
    for (const auto& e : j) points = points && e.is_array() && is_scalar_array(e);
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += inner;
      dump(out, j[i], indent + 1);
    }
    out += "\n" + pad + "]";
    (void)points;
  } else if (j.is_number()) {
    dump_number(out, j);
  } else {
    out += j.dump();
  }
}

json qd_to_json(const QDConfig& qd) {
  return {
      {"total_iterations", qd.total_iterations},
      {"init_iterations", qd.init_iterations},
      {"seed", qd.seed},
      {"gaussian_sigma", qd.gaussian_sigma},
      {"item_samples_per_item", qd.item_samples_per_item},
      {"obstacle_add_samples", qd.obstacle_add_samples},
      {"obstacle_side", qd.obstacle_side},
      {"max_obstacles", qd.max_obstacles},
      {"placement_retries", qd.placement_retries},
      {"descent_depth_cap", qd.descent_depth_cap},
      {"movable_items", qd.movable_items},
      {"include_baseline", qd.include_baseline},
      {"min_distance_bins", qd.measure.min_distance_bins},
      {"min_distance_range", json::array({qd.measure.min_distance_lo, qd.measure.min_distance_hi})},
      {"ordering_cap", qd.measure.ordering_cap},
      {"row_tolerance", qd.measure.row_tolerance},
      {"max_orders", qd.task.max_orders},
      {"score_current_goal_only", qd.task.score_current_goal_only},
  };
}

QDConfig qd_from(const std::optional<Field>& f, const Workspace& ws) {
  QDConfig qd = default_qd_config(ws);
  if (!f) return qd;
  auto opt = [&](const char* key) { return f->find(key); };
  if (auto v = opt("total_iterations")) qd.total_iterations = v->count();
  if (auto v = opt("init_iterations")) qd.init_iterations = v->count();
  if (auto v = opt("seed")) qd.seed = v->count();
  if (auto v = opt("gaussian_sigma")) qd.gaussian_sigma = v->number();
  if (auto v = opt("item_samples_per_item")) qd.item_samples_per_item = static_cast<int>(v->count());
  if (auto v = opt("obstacle_add_samples")) qd.obstacle_add_samples = static_cast<int>(v->count());
  if (auto v = opt("obstacle_side")) qd.obstacle_side = v->number();
  if (auto v = opt("max_obstacles")) qd.max_obstacles = v->count();
  if (auto v = opt("placement_retries")) qd.placement_retries = v->count();
  if (auto v = opt("descent_depth_cap")) qd.descent_depth_cap = v->count();
  if (auto v = opt("movable_items")) qd.movable_items = v->boolean();
  if (auto v = opt("include_baseline")) qd.include_baseline = v->boolean();
  if (auto v = opt("min_distance_bins")) qd.measure.min_distance_bins = static_cast<int>(v->count());
  if (auto v = opt("min_distance_range")) {
    if (v->size() != 2) v->fail("expected [lo, hi]");
    qd.measure.min_distance_lo = (*v)[0].number();
    qd.measure.min_distance_hi = (*v)[1].number();
  }
  if (auto v = opt("ordering_cap")) qd.measure.ordering_cap = v->count();
  if (auto v = opt("row_tolerance")) qd.measure.row_tolerance = v->number();
  if (auto v = opt("max_orders")) qd.task.max_orders = v->count();
  if (auto v = opt("score_current_goal_only")) qd.task.score_current_goal_only = v->boolean();
  return qd;
}

// Library validators report "<path> must ..."; recover the path.
[[noreturn]] void rethrow_as_validation(const std::invalid_argument& e) {
  const std::string msg = e.what();
  const auto space = msg.find(' ');
  if (space == std::string::npos) throw ValidationError("", msg);
  throw ValidationError(msg.substr(0, space), msg.substr(space + 1));
}

}  // namespace

std::string canonical_dump(const json& j) {
  std::string out;
  dump(out, j, 0);
  out += "\n";
  return out;
}

QDConfig ScenarioDocument::resolved_qd() const {
  QDConfig q = qd;
  q.legibility = legibility;
  q.task.return_home = sim.return_home;
  q.task.seed = qd.seed;
  q.planner = planner();
  return q;
}

json workspace_to_json(const Workspace& ws) {
  json items = json::array();
  for (const Item& it : ws.items) items.push_back({{"id", it.id}, {"pos", point_json(it.pos)}, {"radius", it.radius}});
  return {
      {"bounds", {{"min", point_json(ws.bounds.min)}, {"max", point_json(ws.bounds.max)}}},
      {"start", point_json(ws.start)},
      {"items", items},
      {"virtual_obstacles", polygons_json(ws.virtual_obstacles)},
      {"fixed_obstacles", polygons_json(ws.fixed_obstacles)},
      {"template", to_string(ws.templ)},
  };
}

Workspace workspace_from_json(const json& j, const std::string& path) {
  const Field f(j, path);
  Workspace ws;
  const Field bounds = f.at("bounds");
  ws.bounds = {bounds.at("min").point(), bounds.at("max").point()};
  ws.start = f.at("start").point();
  const Field items = f.at("items");
  for (std::size_t i = 0; i < items.size(); ++i) {
    ws.items.push_back({items[i].at("id").string(), items[i].at("pos").point(), items[i].at("radius").number()});
  }
  if (auto v = f.find("virtual_obstacles")) ws.virtual_obstacles = polygons_from(*v);
  if (auto v = f.find("fixed_obstacles")) ws.fixed_obstacles = polygons_from(*v);
  const Field templ = f.at("template");
  try {
    ws.templ = template_from_string(templ.string());
  } catch (const std::invalid_argument& e) {
    templ.fail(e.what());
  }
  return ws;
}

json scenario_to_json(const ScenarioDocument& doc) {
  json subtasks = json::array();
  for (const Subtask& st : doc.task.subtasks) {
    subtasks.push_back({{"id", st.id}, {"goal_item", st.goal_item}, {"agent", to_string(st.agent)}});
  }
  json precedence = json::array();
  for (const auto& [a, b] : doc.task.precedence) precedence.push_back(json::array({a, b}));
  json out = {
      {"format_version", doc.format_version},
      {"workspace", workspace_to_json(doc.workspace)},
      {"task", {{"subtasks", subtasks}, {"precedence", precedence}}},
      {"legibility",
       {{"beta", doc.legibility.beta}, {"penalty_c", doc.legibility.penalty_c}, {"checkpoints", doc.legibility.checkpoints}}},
      {"qd", qd_to_json(doc.qd)},
      {"sim", {{"return_home", doc.sim.return_home}, {"confidence_threshold", doc.sim.confidence_threshold}}},
  };
  if (!doc.metadata.is_null()) out["metadata"] = doc.metadata;
  return out;
}

ScenarioDocument load_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario must be a JSON object");
  const Field root(j, "");
  {
    auto v = root.find("format_version");
    if (!v || !v->raw().is_number_integer()) throw VersionError("format_version is missing or not an integer");
    if (v->raw().get<std::int64_t>() != kFormatVersion) {
      throw VersionError("unsupported format_version " + v->raw().dump() + " (expected " +
                         std::to_string(kFormatVersion) + ")");
    }
  }

  ScenarioDocument doc;
  doc.workspace = workspace_from_json(root.at("workspace").raw(), "workspace");

  const Field task = root.at("task");
  const Field subtasks = task.at("subtasks");
  for (std::size_t i = 0; i < subtasks.size(); ++i) {
    Subtask st{subtasks[i].at("id").string(), subtasks[i].at("goal_item").string(), Agent::human};
    if (auto a = subtasks[i].find("agent")) {
      try {
        st.agent = agent_from_string(a->string());
      } catch (const std::invalid_argument& e) {
        a->fail(e.what());
      }
    }
    doc.task.subtasks.push_back(std::move(st));
  }
  if (auto prec = task.find("precedence")) {
    for (std::size_t k = 0; k < prec->size(); ++k) {
      const Field edge = (*prec)[k];
      if (edge.size() != 2) edge.fail("expected [before, after]");
      doc.task.precedence.emplace_back(edge[0].string(), edge[1].string());
    }
  }

  if (auto leg = root.find("legibility")) {
    if (auto v = leg->find("beta")) doc.legibility.beta = v->number();
    if (auto v = leg->find("penalty_c")) doc.legibility.penalty_c = v->number();
    if (auto v = leg->find("checkpoints")) {
      doc.legibility.checkpoints.clear();
      for (std::size_t i = 0; i < v->size(); ++i) doc.legibility.checkpoints.push_back((*v)[i].number());
    }
  }
  doc.sim.return_home = doc.workspace.templ == Template::tabletop;
  if (auto sim = root.find("sim")) {
    if (auto v = sim->find("return_home")) doc.sim.return_home = v->boolean();
    if (auto v = sim->find("confidence_threshold")) {
      doc.sim.confidence_threshold = v->number();
      if (!(doc.sim.confidence_threshold > 0.5 && doc.sim.confidence_threshold <= 1.0)) {
        v->fail("must lie in (0.5, 1]");
      }
    }
  }
  doc.qd = qd_from(root.find("qd"), doc.workspace);
  if (auto meta = root.find("metadata")) doc.metadata = meta->raw();

  if (auto v = check_task(doc.task, &doc.workspace)) throw ValidationError(v->path, v->reason);
  try {
    doc.legibility.validate();
    doc.resolved_qd().validate();
  } catch (const std::invalid_argument& e) {
    rethrow_as_validation(e);
  }
  if (auto v = check_workspace(doc.workspace, doc.planner())) throw ValidationError(v->path, v->reason);
  return doc;
}

ScenarioDocument load_scenario_file(const std::filesystem::path& path) { return load_scenario(read_file(path)); }

std::string save_scenario(const ScenarioDocument& doc) { return canonical_dump(scenario_to_json(doc)); }

json archive_to_json(const Archive& archive) {
  json cells = json::object();
  for (const auto& [key, elite] : archive.cells()) {
    cells[to_string(key)] = {
        {"score", -elite.score},
        {"objective", elite.score},
        {"features", {{"min_distance", elite.features.min_distance}, {"ordering_rank", elite.features.ordering_rank}}},
        {"workspace", workspace_to_json(elite.workspace)},
    };
  }
  return {{"format_version", kFormatVersion}, {"cells", cells}};
}

std::string save_archive(const Archive& archive) { return canonical_dump(archive_to_json(archive)); }

Archive load_archive(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  const Field root(j, "");
  if (root.at("format_version").integer() != kFormatVersion) throw VersionError("unsupported archive format_version");
  const Field cells = root.at("cells");
  if (!cells.raw().is_object()) cells.fail("expected an object");
  Archive out;
  for (auto it = cells.raw().begin(); it != cells.raw().end(); ++it) {
    const Field cell(it.value(), "cells." + it.key());
    CellKey key;
    const auto comma = it.key().find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      key.distance_bin = std::stoi(it.key().substr(0, comma));
      key.ordering_bin = std::stoull(it.key().substr(comma + 1));
    } catch (const std::exception&) {
      cell.fail("cell key must look like \"i,j\"");
    }
    Elite elite;
    elite.score = cell.at("objective").number();
    elite.features.min_distance = cell.at("features").at("min_distance").number();
    elite.features.ordering_rank = cell.at("features").at("ordering_rank").count();
    elite.workspace = workspace_from_json(cell.at("workspace").raw(), cell.path() + ".workspace");
    out.offer(key, std::move(elite));
  }
  return out;
}

std::string archive_csv(const Archive& archive) {
  std::string out = "distance_bin,ordering_bin,score\n";
  for (const auto& [key, elite] : archive.cells()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", -elite.score == 0.0 ? 0.0 : -elite.score);
    out += std::to_string(key.distance_bin) + "," + std::to_string(key.ordering_bin) + "," + buf + "\n";
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace legws
