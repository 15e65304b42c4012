#include "legws/workspace.hpp"

#include <cstring>
#include <stdexcept>
#include <unordered_set>

#include "legws/planner.hpp"

namespace legws {

std::string to_string(Template t) { return t == Template::tabletop ? "tabletop" : "navigation"; }

Template template_from_string(const std::string& name) {
  if (name == "tabletop") return Template::tabletop;
  if (name == "navigation") return Template::navigation;
  throw std::invalid_argument("unknown template '" + name + "'");
}

const Item* Workspace::find_item(const std::string& id) const {
  for (const Item& it : items) {
    if (it.id == id) return &it;
  }
  return nullptr;
}

std::optional<std::size_t> Workspace::item_index(const std::string& id) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id == id) return i;
  }
  return std::nullopt;
}

PlannerSettings default_planner_settings(Template t) {
  if (t == Template::navigation) return {0.1, 0.3};
  return {0.02, 0.04};
}

namespace {

std::string item_path(std::size_t i) { return "workspace.items[" + std::to_string(i) + "]"; }

std::optional<Violation> check_polygons(const std::vector<ConvexPolygon>& polys, const Bounds& bounds,
                                        const std::string& field) {
  for (std::size_t k = 0; k < polys.size(); ++k) {
    for (const Point2& v : polys[k].vertices()) {
      if (!bounds.contains(v)) {
        return Violation{"workspace." + field + "[" + std::to_string(k) + "].vertices", "vertex outside bounds"};
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<Violation> check_workspace(const Workspace& ws, const PlannerSettings& settings, PlanCache* cache) {
  const Bounds& b = ws.bounds;
  if (!is_finite(b.min) || !is_finite(b.max) || !(b.width() > 0.0) || !(b.height() > 0.0)) {
    return Violation{"workspace.bounds", "bounds must have positive finite extent"};
  }
  if (!is_finite(ws.start) || !b.contains(ws.start)) return Violation{"workspace.start", "start outside bounds"};

  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < ws.items.size(); ++i) {
    const Item& it = ws.items[i];
    if (it.id.empty()) return Violation{item_path(i) + ".id", "item id is empty"};
    if (!ids.insert(it.id).second) return Violation{item_path(i) + ".id", "duplicate item id '" + it.id + "'"};
    if (!(it.radius > 0.0) || !std::isfinite(it.radius)) return Violation{item_path(i) + ".radius", "radius must be positive"};
    if (!is_finite(it.pos) || it.pos.x - it.radius < b.min.x - kGeomEps || it.pos.x + it.radius > b.max.x + kGeomEps ||
        it.pos.y - it.radius < b.min.y - kGeomEps || it.pos.y + it.radius > b.max.y + kGeomEps) {
      return Violation{item_path(i) + ".pos", "item footprint leaves the bounds"};
    }
    for (std::size_t j = 0; j < i; ++j) {
      const Item& other = ws.items[j];
      if (distance(it.pos, other.pos) < it.radius + other.radius - kGeomEps) {
        return Violation{item_path(i) + ".pos", "overlaps " + item_path(j).substr(10)};
      }
    }
  }
  if (auto v = check_polygons(ws.virtual_obstacles, b, "virtual_obstacles")) return v;
  if (auto v = check_polygons(ws.fixed_obstacles, b, "fixed_obstacles")) return v;

  for (std::size_t i = 0; i < ws.items.size(); ++i) {
    const Disc disc{ws.items[i].pos, ws.items[i].radius};
    for (std::size_t k = 0; k < ws.virtual_obstacles.size(); ++k) {
      if (disc_intersects(disc, ws.virtual_obstacles[k])) {
        return Violation{item_path(i) + ".pos", "inside virtual_obstacles[" + std::to_string(k) + "]"};
      }
    }
    for (std::size_t k = 0; k < ws.fixed_obstacles.size(); ++k) {
      if (disc_intersects(disc, ws.fixed_obstacles[k])) {
        return Violation{item_path(i) + ".pos", "inside fixed_obstacles[" + std::to_string(k) + "]"};
      }
    }
  }

  std::shared_ptr<PlanCache::Entry> entry;
  std::optional<OccupancyGrid> own_grid;
  if (cache) {
    entry = cache->entry_for(ws, settings);
  } else {
    own_grid = rasterize(ws, settings);
  }
  const OccupancyGrid& grid = cache ? *entry->grid : *own_grid;
  const auto start_cell = grid.cell_of(ws.start);
  if (!start_cell || grid.blocked(*start_cell)) return Violation{"workspace.start", "start lies in a blocked cell"};
  const auto field_ptr =
      cache ? cache->field(*entry, *start_cell) : std::make_shared<const DistanceField>(grid, *start_cell);
  const DistanceField& field = *field_ptr;
  for (std::size_t i = 0; i < ws.items.size(); ++i) {
    const auto cell = grid.cell_of(ws.items[i].pos);
    if (!cell || !field.reachable(*cell)) return Violation{item_path(i), "unreachable from start"};
  }
  return std::nullopt;
}

std::string workspace_fingerprint(const Workspace& ws) {
  std::string out;
  auto put = [&out](double v) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof v);
    out.append(buf, sizeof buf);
  };
  auto put_point = [&](Point2 p) {
    put(p.x);
    put(p.y);
  };
  put_point(ws.bounds.min);
  put_point(ws.bounds.max);
  put_point(ws.start);
  out.push_back(static_cast<char>(ws.templ));
  for (const Item& it : ws.items) {
    out += it.id;
    out.push_back('\0');
    put_point(it.pos);
    put(it.radius);
  }
  for (const auto* list : {&ws.virtual_obstacles, &ws.fixed_obstacles}) {
    out.push_back('|');
    for (const auto& poly : *list) {
      out.push_back('#');
      for (const Point2& v : poly.vertices()) put_point(v);
    }
  }
  return out;
}

}  // namespace legws
