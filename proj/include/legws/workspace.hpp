#pragma once

#include <optional>
#include <string>
#include <vector>

#include "legws/geometry.hpp"

namespace legws {

enum class Template { tabletop, navigation };

std::string to_string(Template t);
/// Throws std::invalid_argument for unknown names.
Template template_from_string(const std::string& name);

struct Bounds {
  Point2 min;
  Point2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  double diagonal() const { return std::hypot(width(), height()); }
  bool contains(Point2 p, double eps = kGeomEps) const {
    return p.x >= min.x - eps && p.x <= max.x + eps && p.y >= min.y - eps && p.y <= max.y + eps;
  }

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct Item {
  std::string id;
  Point2 pos;
  double radius = 0.0;

  friend bool operator==(const Item&, const Item&) = default;
};

struct Workspace {
  Bounds bounds;
  Point2 start;
  std::vector<Item> items;
  std::vector<ConvexPolygon> virtual_obstacles;
  std::vector<ConvexPolygon> fixed_obstacles;
  Template templ = Template::tabletop;

  const Item* find_item(const std::string& id) const;
  std::optional<std::size_t> item_index(const std::string& id) const;

  friend bool operator==(const Workspace&, const Workspace&) = default;
};

/// Grid discretization used for the human trajectory generator.
struct PlannerSettings {
  double resolution = 0.02;
  double agent_radius = 0.04;

  friend bool operator==(const PlannerSettings&, const PlannerSettings&) = default;
};

PlannerSettings default_planner_settings(Template t);

/// One broken workspace invariant; `path` is a dotted field path.
struct Violation {
  std::string path;
  std::string reason;
};

/// Checks bounds containment, item separation, item/obstacle clearance,
/// start clearance and reachability of every item from the start. Returns
/// the first violation found, in that order.
class PlanCache;

/// `cache`, when given, supplies and keeps the rasterized grid.
std::optional<Violation> check_workspace(const Workspace& ws, const PlannerSettings& settings,
                                         PlanCache* cache = nullptr);

inline bool workspace_valid(const Workspace& ws, const PlannerSettings& settings, PlanCache* cache = nullptr) {
  return !check_workspace(ws, settings, cache).has_value();
}

/// Exact byte representation of all workspace values (doubles bitwise), used
/// as a cache key.
std::string workspace_fingerprint(const Workspace& ws);

}  // namespace legws
