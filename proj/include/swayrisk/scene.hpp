#pragma once

// Static scene geometry for the synthetic depth sensor.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "swayrisk/core.hpp"

namespace swayrisk {

enum class ScenarioKind { Treadmill, Indoor, OutdoorCluttered, OutdoorFree };

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_from_string(const std::string& name);

/// Vertical wall standing on z = 0 between two ground points.
struct Wall {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  double height = 3.0;
};

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

/// Vertical cylinder on z = 0.
struct Pillar {
  Vec2 center = Vec2::Zero();
  double radius = 0.2;
  double height = 3.0;
};

struct Scene {
  std::string name;
  std::vector<Wall> walls;
  std::vector<Box> boxes;
  std::vector<Pillar> pillars;
  bool ground = false;

  /// Distance along a unit ray to the nearest surface, if any lies within max_range.
  std::optional<double> raycast(const Vec3& origin, const Vec3& direction, double max_range) const;
};

/// Built-in scene for a scenario label; the cluttered scene is seeded.
Scene default_scene(ScenarioKind kind, unsigned seed = 0);

/// Straight corridor along +X with walls at y = +-half_width.
Scene corridor_scene(double half_width, double x_min, double x_max, double height = 3.0);

// JSON scene file:
//   {"name": ..., "ground": bool,
//    "walls":   [{"a": [x, y], "b": [x, y], "height": h}],
//    "boxes":   [{"min": [x, y, z], "max": [x, y, z]}],
//    "pillars": [{"center": [x, y], "radius": r, "height": h}]}
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

}  // namespace swayrisk
