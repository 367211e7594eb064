#include "swayrisk/simgait.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "swayrisk/error.hpp"

namespace swayrisk {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kGravity = 9.81;

struct PathPoint {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  double curvature = 0.0;  // 1/m, positive for left turns
};

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

/// Arc-length parameterized polyline.
class Polyline {
 public:
  explicit Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
    arc_.resize(points_.size(), 0.0);
    for (std::size_t i = 1; i < points_.size(); ++i) arc_[i] = arc_[i - 1] + (points_[i] - points_[i - 1]).norm();
  }

  double length() const { return arc_.back(); }

  Vec2 at(double s) const {
    s = std::clamp(s, 0.0, length());
    const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    const std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - arc_.begin(), 1), points_.size() - 1);
    const double seg = arc_[i] - arc_[i - 1];
    const double u = seg > 0.0 ? (s - arc_[i - 1]) / seg : 0.0;
    return points_[i - 1] + u * (points_[i] - points_[i - 1]);
  }

  double heading(double s, double half_span = 0.1) const {
    const Vec2 d = at(s + half_span) - at(s - half_span);
    return std::atan2(d.y(), d.x());
  }

  PathPoint sample(double s) const {
    constexpr double kCurvatureSpan = 0.25;
    PathPoint p;
    p.position = at(s);
    p.heading = heading(s);
    const double lo = std::max(0.0, s - kCurvatureSpan);
    const double hi = std::min(length(), s + kCurvatureSpan);
    if (hi - lo > 1e-6) p.curvature = wrap_angle(heading(hi) - heading(lo)) / (hi - lo);
    return p;
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> arc_;
};

class Jitter {
 public:
  Jitter(double sigma, double rho, std::mt19937_64& rng) : sigma_(sigma), rho_(rho), rng_(rng) {
    value_ = Vec2(normal_(rng_), normal_(rng_)) * sigma_;
  }

  Vec2 next() {
    const double innovation = std::sqrt(1.0 - rho_ * rho_) * sigma_;
    value_ = rho_ * value_ + innovation * Vec2(normal_(rng_), normal_(rng_));
    return value_;
  }

 private:
  double sigma_;
  double rho_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vec2 value_;
};

double impulse_shape(double tau, double duration, double recovery) {
  if (tau < 0.0) return 0.0;
  if (tau < duration) return 0.5 * (1.0 - std::cos(M_PI * tau / duration));
  return std::exp(-(tau - duration) / recovery);
}

std::array<double, kJointCount> joint_template(double t, double step_frequency) {
  const double phase = M_PI * step_frequency * t;  // stride = two steps
  std::array<double, kJointCount> j{};
  j[0] = 0.35 * std::sin(phase);                         // hip flexion L
  j[1] = 0.35 * std::sin(phase + M_PI);                  // hip flexion R
  j[2] = 0.05 * std::sin(phase + M_PI / 2);              // hip abduction L
  j[3] = -0.05 * std::sin(phase + M_PI / 2);             // hip abduction R
  j[4] = 0.08 * std::sin(phase);                         // hip rotation L
  j[5] = 0.08 * std::sin(phase + M_PI);                  // hip rotation R
  j[6] = 0.6 + 0.5 * std::sin(phase - M_PI / 2);         // knee flexion L
  j[7] = 0.6 + 0.5 * std::sin(phase + M_PI / 2);         // knee flexion R
  j[8] = 0.1 * std::sin(phase);                          // thigh roll L - R
  return j;
}

UnitQuaternion tilt_rotation(const Vec2& tilt) {
  const double angle = tilt.norm();
  if (angle < 1e-15) return UnitQuaternion::identity();
  return UnitQuaternion::from_axis_angle(Vec3(-tilt.y(), tilt.x(), 0.0), angle);
}

void validate(const WalkConfig& cfg) {
  if (!(cfg.speed > 0.0)) fail(ErrorCode::InvalidInput, "walk speed must be positive");
  if (!(cfg.duration > 0.0)) fail(ErrorCode::InvalidInput, "walk duration must be positive");
  if (!(cfg.dt > 0.0)) fail(ErrorCode::InvalidInput, "tick spacing must be positive");
  if (!(cfg.step_frequency >= 0.0)) fail(ErrorCode::InvalidInput, "step frequency must be non-negative");
  if (!(cfg.recovery_time_constant > 0.0)) fail(ErrorCode::InvalidInput, "recovery time constant must be positive");
  if (cfg.sway_noise_scale < 0.0) fail(ErrorCode::InvalidInput, "sway noise scale must be non-negative");
}

void validate_schedule(std::span<const PerturbationSpec> perturbations) {
  std::vector<PerturbationSpec> sorted(perturbations.begin(), perturbations.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.onset < b.onset; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].onset.seconds < 0.0 || !(sorted[i].duration > 0.0)) {
      fail(ErrorCode::InvalidSchedule, "perturbation needs onset >= 0 and positive duration");
    }
    if (i > 0 && sorted[i].onset.seconds < sorted[i - 1].onset.seconds + sorted[i - 1].duration) {
      std::ostringstream os;
      os << "perturbations at " << sorted[i - 1].onset.seconds << " s and " << sorted[i].onset.seconds
         << " s overlap";
      fail(ErrorCode::InvalidSchedule, os.str());
    }
  }
}

using PathFn = std::function<PathPoint(double t)>;

SimTrial run_walker(const WalkConfig& cfg, std::span<const PerturbationSpec> perturbations, const PathFn& path,
                    std::size_t ticks) {
  std::mt19937_64 rng(cfg.seed);
  const double rho = std::exp(-cfg.dt / cfg.jitter_time_constant);
  Jitter jitter(cfg.jitter_deg * kDegToRad * cfg.sway_noise_scale, rho, rng);
  const Vec2 gait_axis = Vec2(1.0, 1.0).normalized();
  const Vec2 gait_cross(-gait_axis.y(), gait_axis.x());

  const Scene scene = cfg.scene_geometry ? *cfg.scene_geometry : default_scene(cfg.scene, unsigned(cfg.seed));
  SwayWindow sway(cfg.sway);

  SimTrial trial;
  trial.scenario = cfg.scene;
  trial.truth.assign(perturbations.begin(), perturbations.end());
  trial.states.reserve(ticks);

  // The walker is already in steady gait when recording starts, so the sway
  // window is primed with window_len - 1 earlier ticks.
  const long preroll = static_cast<long>(cfg.sway.window_len) - 1;
  for (long k = -preroll; k < static_cast<long>(ticks); ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const PathPoint pp = path(std::max(t, 0.0));

    const double amplitude = cfg.gait_amplitude_deg * kDegToRad * (1.0 + cfg.curvature_sway_gain * std::abs(pp.curvature));
    const double phase = 2.0 * M_PI * cfg.step_frequency * t;
    Vec2 tilt = amplitude * (std::sin(phase) * gait_axis + cfg.gait_ellipticity * std::cos(phase) * gait_cross);
    tilt.y() += std::atan(cfg.speed * cfg.speed * pp.curvature / kGravity);
    tilt += jitter.next();
    for (const PerturbationSpec& p : perturbations) {
      const double peak = cfg.tilt_deg_per_body_weight * p.magnitude * kDegToRad;
      tilt += peak * impulse_shape(t - p.onset.seconds, p.duration, cfg.recovery_time_constant) *
              direction_vector(p.direction);
    }

    StateVector s;
    s.timestamp = Timestamp{t};
    s.position = Vec3(pp.position.x(), pp.position.y(),
                      cfg.torso_height + 0.015 * std::sin(2.0 * M_PI * cfg.step_frequency * t));
    s.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), pp.heading) * tilt_rotation(tilt);
    s.step_frequency = cfg.step_frequency;
    s.joint_angles = joint_template(t, cfg.step_frequency);

    const auto sample = sway.push({s.timestamp, project_torso_vertical(s.orientation)});
    if (k < 0) continue;
    s.sway_area = sample ? sample->sigma_z : 0.0;
    trial.states.push_back(s);
  }
  fill_velocities(trial.states, cfg.dt);

  if (cfg.emit_clouds) {
    trial.clouds.reserve(trial.states.size());
    for (const StateVector& s : trial.states) {
      trial.clouds.push_back(sense_scene(scene, Pose{s.timestamp, s.position, s.orientation}, cfg.sensor));
    }
  }
  return trial;
}

std::vector<Vec2> filleted_rectangle_route(const Vec2& origin, double width, double height, double radius,
                                           double spacing) {
  if (!(radius > 0.0) || 2.0 * radius > std::min(width, height) || !(spacing > 0.0)) {
    fail(ErrorCode::InvalidInput, "fillet radius must be positive and fit inside the rectangle");
  }
  std::vector<Vec2> out;
  auto straight = [&](const Vec2& a, const Vec2& b) {
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * (double(i) / n));
  };
  auto arc = [&](const Vec2& center, double start_angle) {
    const int n = std::max(2, static_cast<int>(std::ceil(0.5 * M_PI * radius / spacing)));
    for (int i = 0; i < n; ++i) {
      const double a = start_angle + 0.5 * M_PI * double(i) / n;
      out.push_back(center + radius * Vec2(std::cos(a), std::sin(a)));
    }
  };
  const double x0 = origin.x(), y0 = origin.y(), x1 = x0 + width, y1 = y0 + height;
  straight({x0 + radius, y0}, {x1 - radius, y0});
  arc({x1 - radius, y0 + radius}, -0.5 * M_PI);
  straight({x1, y0 + radius}, {x1, y1 - radius});
  arc({x1 - radius, y1 - radius}, 0.0);
  straight({x1 - radius, y1}, {x0 + radius, y1});
  arc({x0 + radius, y1 - radius}, 0.5 * M_PI);
  straight({x0, y1 - radius}, {x0, y0 + radius});
  arc({x0 + radius, y0 + radius}, M_PI);
  out.push_back({x0 + radius, y0});
  return out;
}

}  // namespace

const char* to_string(Direction d) {
  switch (d) {
    case Direction::Front: return "front";
    case Direction::Back: return "back";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "unknown";
}

Direction direction_from_string(const std::string& name) {
  if (name == "front") return Direction::Front;
  if (name == "back") return Direction::Back;
  if (name == "left") return Direction::Left;
  if (name == "right") return Direction::Right;
  fail(ErrorCode::InvalidInput, "unknown perturbation direction '" + name + "'");
}

Vec2 direction_vector(Direction d) {
  switch (d) {
    case Direction::Front: return {1.0, 0.0};
    case Direction::Back: return {-1.0, 0.0};
    case Direction::Left: return {0.0, 1.0};
    case Direction::Right: return {0.0, -1.0};
  }
  return Vec2::Zero();
}

std::vector<PerturbationSpec> schedule_perturbations(double duration, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(kMinPerturbationGap, kMaxPerturbationGap);
  std::uniform_int_distribution<int> direction(0, 3);
  std::uniform_int_distribution<int> magnitude(0, 1);
  std::vector<PerturbationSpec> out;
  double onset = gap(rng);
  while (onset + kPerturbationSeconds <= duration) {
    PerturbationSpec p;
    p.onset = Timestamp{onset};
    p.direction = static_cast<Direction>(direction(rng));
    p.magnitude = magnitude(rng) == 0 ? 0.075 : 0.15;
    out.push_back(p);
    onset += gap(rng);
  }
  return out;
}

SimTrial simulate_treadmill_trial(const WalkConfig& cfg, std::span<const PerturbationSpec> perturbations) {
  validate(cfg);
  validate_schedule(perturbations);
  const std::size_t ticks = static_cast<std::size_t>(std::floor(cfg.duration / cfg.dt + 1e-9)) + 1;
  const PathFn fixed = [](double) { return PathPoint{}; };
  SimTrial trial = run_walker(cfg, perturbations, fixed, ticks);
  trial.id = "treadmill_" + std::to_string(cfg.seed);
  return trial;
}

std::vector<Vec2> smooth_path(std::span<const Vec2> waypoints, double spacing) {
  if (waypoints.size() < 2) fail(ErrorCode::InvalidInput, "a walk needs at least 2 waypoints");
  if (!(spacing > 0.0)) fail(ErrorCode::InvalidInput, "path spacing must be positive");
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if ((waypoints[i] - waypoints[i - 1]).norm() < 1e-9) {
      std::ostringstream os;
      os << "waypoints " << i - 1 << " and " << i << " coincide";
      fail(ErrorCode::InvalidInput, os.str());
    }
  }

  const std::size_t n = waypoints.size();
  auto point = [&](long i) -> Vec2 {
    if (i < 0) return 2.0 * waypoints[0] - waypoints[1];
    if (i >= long(n)) return 2.0 * waypoints[n - 1] - waypoints[n - 2];
    return waypoints[std::size_t(i)];
  };

  // Centripetal Catmull-Rom (Barry-Goldman pyramid), alpha = 0.5.
  std::vector<Vec2> out;
  for (std::size_t seg = 0; seg + 1 < n; ++seg) {
    const Vec2 p0 = point(long(seg) - 1), p1 = point(long(seg)), p2 = point(long(seg) + 1), p3 = point(long(seg) + 2);
    const double t0 = 0.0;
    const double t1 = t0 + std::sqrt((p1 - p0).norm());
    const double t2 = t1 + std::sqrt((p2 - p1).norm());
    const double t3 = t2 + std::sqrt((p3 - p2).norm());
    const int steps = std::max(2, static_cast<int>(std::ceil((p2 - p1).norm() / spacing)));
    for (int k = 0; k < steps; ++k) {
      const double t = t1 + (t2 - t1) * double(k) / steps;
      const Vec2 a1 = (t1 - t) / (t1 - t0) * p0 + (t - t0) / (t1 - t0) * p1;
      const Vec2 a2 = (t2 - t) / (t2 - t1) * p1 + (t - t1) / (t2 - t1) * p2;
      const Vec2 a3 = (t3 - t) / (t3 - t2) * p2 + (t - t2) / (t3 - t2) * p3;
      const Vec2 b1 = (t2 - t) / (t2 - t0) * a1 + (t - t0) / (t2 - t0) * a2;
      const Vec2 b2 = (t3 - t) / (t3 - t1) * a2 + (t - t1) / (t3 - t1) * a3;
      out.push_back((t2 - t) / (t2 - t1) * b1 + (t - t1) / (t2 - t1) * b2);
    }
  }
  out.push_back(waypoints.back());
  return out;
}

std::vector<Vec2> filleted_square_route(const Vec2& origin, double side, double radius, double point_spacing) {
  return filleted_rectangle_route(origin, side, side, radius, point_spacing);
}

std::vector<Vec2> default_route(ScenarioKind kind, std::uint64_t seed) {
  switch (kind) {
    case ScenarioKind::Treadmill:
      return {{0.0, 0.0}, {1.0, 0.0}};
    case ScenarioKind::Indoor:
      return filleted_rectangle_route({-1.5, -1.5}, 27.0, 17.0, 1.2, 0.25);
    case ScenarioKind::OutdoorCluttered: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> turn(-1.0, 1.0);
      std::uniform_real_distribution<double> leg(4.0, 8.0);
      std::vector<Vec2> route{{0.0, 0.0}};
      double heading = 0.0;
      for (int i = 0; i < 8; ++i) {
        heading += turn(rng);
        route.push_back(route.back() + leg(rng) * Vec2(std::cos(heading), std::sin(heading)));
      }
      return route;
    }
    case ScenarioKind::OutdoorFree:
      return {{0.0, 0.0}, {15.0, 0.0}, {25.0, 8.0}, {35.0, 10.0}};
  }
  return {};
}

SimTrial simulate_walk_scene(const WalkConfig& cfg, std::span<const Vec2> waypoints) {
  validate(cfg);
  const Polyline path(smooth_path(waypoints));
  const double walk_time = std::min(cfg.duration, path.length() / cfg.speed);
  const std::size_t ticks = static_cast<std::size_t>(std::floor(walk_time / cfg.dt + 1e-9)) + 1;
  const PathFn follow = [&](double t) { return path.sample(cfg.speed * t); };
  SimTrial trial = run_walker(cfg, {}, follow, ticks);
  trial.id = std::string(to_string(cfg.scene)) + "_" + std::to_string(cfg.seed);
  return trial;
}

PointCloud sense_scene(const Scene& scene, const Pose& pose, const SensorConfig& sensor) {
  PointCloud cloud;
  cloud.timestamp = pose.timestamp;
  cloud.source_pose = pose;
  const Mat3 r = pose.orientation.matrix();
  const int n_az = static_cast<int>(std::floor(sensor.horizontal_fov_deg / sensor.horizontal_step_deg + 1e-9)) + 1;
  const int n_el = static_cast<int>(std::floor(sensor.vertical_fov_deg / sensor.vertical_step_deg + 1e-9)) + 1;
  const double az0 = -0.5 * sensor.horizontal_fov_deg;
  const double el0 = -0.5 * sensor.vertical_fov_deg;
  for (int i = 0; i < n_el; ++i) {
    const double el = (el0 + i * sensor.vertical_step_deg) * kDegToRad;
    for (int j = 0; j < n_az; ++j) {
      const double az = (az0 + j * sensor.horizontal_step_deg) * kDegToRad;
      const Vec3 ray = r * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      if (const auto hit = scene.raycast(pose.position, ray, sensor.range)) {
        cloud.points.push_back(pose.position + *hit * ray);
      }
    }
  }
  return cloud;
}

}  // namespace swayrisk
