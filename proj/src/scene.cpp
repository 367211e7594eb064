#include "swayrisk/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "swayrisk/error.hpp"

namespace swayrisk {

namespace {

constexpr double kHitEpsilon = 1e-9;

std::optional<double> hit_wall(const Wall& w, const Vec3& o, const Vec3& d) {
  const Vec2 e = w.b - w.a;
  const Vec2 dxy = d.head<2>();
  const double denom = dxy.x() * e.y() - dxy.y() * e.x();
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const Vec2 r = w.a - o.head<2>();
  const double t = (r.x() * e.y() - r.y() * e.x()) / denom;
  const double s = (r.x() * dxy.y() - r.y() * dxy.x()) / denom;
  if (t <= kHitEpsilon || s < 0.0 || s > 1.0) return std::nullopt;
  const double z = o.z() + t * d.z();
  if (z < 0.0 || z > w.height) return std::nullopt;
  return t;
}

std::optional<double> hit_box(const Box& b, const Vec3& o, const Vec3& d) {
  double t0 = kHitEpsilon;
  double t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < b.min[i] || o[i] > b.max[i]) return std::nullopt;
      continue;
    }
    double ta = (b.min[i] - o[i]) / d[i];
    double tb = (b.max[i] - o[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

std::optional<double> hit_pillar(const Pillar& p, const Vec3& o, const Vec3& d) {
  const Vec2 dxy = d.head<2>();
  const Vec2 m = o.head<2>() - p.center;
  const double a = dxy.squaredNorm();
  if (a < 1e-15) return std::nullopt;
  const double b = m.dot(dxy);
  const double c = m.squaredNorm() - p.radius * p.radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / a, (-b + sq) / a}) {
    if (t <= kHitEpsilon) continue;
    const double z = o.z() + t * d.z();
    if (z >= 0.0 && z <= p.height) return t;
  }
  return std::nullopt;
}

Vec2 vec2_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
Vec3 vec3_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

void add_rectangle(Scene& s, double x0, double y0, double x1, double y1, double height) {
  s.walls.push_back({{x0, y0}, {x1, y0}, height});
  s.walls.push_back({{x1, y0}, {x1, y1}, height});
  s.walls.push_back({{x1, y1}, {x0, y1}, height});
  s.walls.push_back({{x0, y1}, {x0, y0}, height});
}

}  // namespace

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Treadmill: return "treadmill";
    case ScenarioKind::Indoor: return "indoor";
    case ScenarioKind::OutdoorCluttered: return "outdoor_cluttered";
    case ScenarioKind::OutdoorFree: return "outdoor_free";
  }
  return "unknown";
}

ScenarioKind scenario_from_string(const std::string& name) {
  if (name == "treadmill") return ScenarioKind::Treadmill;
  if (name == "indoor") return ScenarioKind::Indoor;
  if (name == "outdoor_cluttered") return ScenarioKind::OutdoorCluttered;
  if (name == "outdoor_free") return ScenarioKind::OutdoorFree;
  fail(ErrorCode::InvalidInput, "unknown scenario '" + name + "'");
}

std::optional<double> Scene::raycast(const Vec3& origin, const Vec3& direction, double max_range) const {
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](std::optional<double> t) {
    if (t && *t < best) best = *t;
  };
  for (const Wall& w : walls) consider(hit_wall(w, origin, direction));
  for (const Box& b : boxes) consider(hit_box(b, origin, direction));
  for (const Pillar& p : pillars) consider(hit_pillar(p, origin, direction));
  if (ground && direction.z() < -1e-12 && origin.z() > 0.0) consider(-origin.z() / direction.z());
  if (best > max_range) return std::nullopt;
  return best;
}

Scene corridor_scene(double half_width, double x_min, double x_max, double height) {
  Scene s;
  s.name = "corridor";
  s.walls.push_back({{x_min, half_width}, {x_max, half_width}, height});
  s.walls.push_back({{x_min, -half_width}, {x_max, -half_width}, height});
  return s;
}

Scene default_scene(ScenarioKind kind, unsigned seed) {
  Scene s;
  s.name = to_string(kind);
  switch (kind) {
    case ScenarioKind::Treadmill:
      add_rectangle(s, -3.0, -3.0, 5.0, 3.0, 3.0);
      break;
    case ScenarioKind::Indoor:
      // Ring corridor, 3 m wide, around a solid block.
      add_rectangle(s, -3.0, -3.0, 27.0, 17.0, 3.0);
      s.boxes.push_back({{0.0, 0.0, 0.0}, {24.0, 14.0, 3.0}});
      break;
    case ScenarioKind::OutdoorCluttered: {
      s.ground = true;
      std::mt19937 rng(seed);
      std::uniform_real_distribution<double> ux(-5.0, 40.0);
      std::uniform_real_distribution<double> uy(-15.0, 30.0);
      std::uniform_real_distribution<double> size(0.3, 1.2);
      for (int i = 0; i < 40; ++i) {
        const Vec2 c(ux(rng), uy(rng));
        if (i % 2 == 0) {
          s.pillars.push_back({c, 0.5 * size(rng), 2.5});
        } else {
          const double h = size(rng);
          s.boxes.push_back({{c.x() - h, c.y() - h, 0.0}, {c.x() + h, c.y() + h, h}});
        }
      }
      break;
    }
    case ScenarioKind::OutdoorFree:
      s.ground = true;
      s.walls.push_back({{-10.0, 25.0}, {45.0, 25.0}, 8.0});
      s.walls.push_back({{45.0, -15.0}, {45.0, 25.0}, 8.0});
      break;
  }
  return s;
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene s;
    s.name = j.value("name", std::string("scene"));
    s.ground = j.value("ground", false);
    for (const auto& w : j.value("walls", nlohmann::json::array())) {
      s.walls.push_back({vec2_from(w.at("a")), vec2_from(w.at("b")), w.value("height", 3.0)});
    }
    for (const auto& b : j.value("boxes", nlohmann::json::array())) {
      s.boxes.push_back({vec3_from(b.at("min")), vec3_from(b.at("max"))});
    }
    for (const auto& p : j.value("pillars", nlohmann::json::array())) {
      s.pillars.push_back({vec2_from(p.at("center")), p.value("radius", 0.2), p.value("height", 3.0)});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("bad scene description: ") + e.what());
  }
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["name"] = scene.name;
  j["ground"] = scene.ground;
  j["walls"] = nlohmann::json::array();
  for (const Wall& w : scene.walls) {
    j["walls"].push_back({{"a", {w.a.x(), w.a.y()}}, {"b", {w.b.x(), w.b.y()}}, {"height", w.height}});
  }
  j["boxes"] = nlohmann::json::array();
  for (const Box& b : scene.boxes) {
    j["boxes"].push_back({{"min", {b.min.x(), b.min.y(), b.min.z()}}, {"max", {b.max.x(), b.max.y(), b.max.z()}}});
  }
  j["pillars"] = nlohmann::json::array();
  for (const Pillar& p : scene.pillars) {
    j["pillars"].push_back({{"center", {p.center.x(), p.center.y()}}, {"radius", p.radius}, {"height", p.height}});
  }
  return j;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Io, "cannot open scene file " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, "scene file " + path.string() + " is not valid JSON: " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace swayrisk
