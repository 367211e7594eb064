#pragma once

// Synthetic walker used as the verification oracle for detection and
// dataset tooling. It is a kinematic toy, not a biomechanical model:
//
//   torso tilt = gait oscillation + turn lean + AR(1) jitter + perturbation impulses
//
// The tilt is a ground-plane vector (radians); the torso orientation is the
// heading yaw composed with a rotation of |tilt| about z x tilt, so the
// ground projection of the up-vector is sin|tilt| * tilt/|tilt|.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swayrisk/core.hpp"
#include "swayrisk/scene.hpp"
#include "swayrisk/sway.hpp"

namespace swayrisk {

enum class Direction { Front, Back, Left, Right };

const char* to_string(Direction d);
Direction direction_from_string(const std::string& name);
/// Unit vector in the walker's heading frame (+X forward, +Y left).
Vec2 direction_vector(Direction d);

inline constexpr double kPerturbationSeconds = 0.3;
inline constexpr double kMinPerturbationGap = 16.0;
inline constexpr double kMaxPerturbationGap = 21.0;

struct PerturbationSpec {
  Timestamp onset;
  Direction direction = Direction::Front;
  double magnitude = 0.15;  // fraction of body weight
  double duration = kPerturbationSeconds;
};

/// Forward-facing depth camera mounted at the torso origin.
struct SensorConfig {
  double horizontal_fov_deg = 87.0;
  double vertical_fov_deg = 58.0;
  double horizontal_step_deg = 2.0;
  double vertical_step_deg = 3.0;
  double range = 10.0;
};

struct WalkConfig {
  double speed = 1.25;          // m/s
  double step_frequency = 1.9;  // Hz
  double duration = 60.0;       // s
  std::uint64_t seed = 0;
  ScenarioKind scene = ScenarioKind::Treadmill;
  double sway_noise_scale = 1.0;
  double recovery_time_constant = 1.0;  // s

  double gait_amplitude_deg = 2.0;
  /// Quadrature component of the gait oscillation relative to its main
  /// axis; 0 gives a straight-line sway trace, 1 a circle.
  double gait_ellipticity = 0.0;
  /// Peak tilt per unit body-weight fraction: 7.5% -> 4 deg, 15% -> 8 deg.
  double tilt_deg_per_body_weight = 4.0 / 0.075;
  double jitter_deg = 0.25;             // AR(1) std at sway_noise_scale = 1
  double jitter_time_constant = 2.0;    // s
  double curvature_sway_gain = 1.0;     // m; gait amplitude grows by (1 + gain * |kappa|)
  double torso_height = 1.3;            // m
  double dt = kTickSeconds;
  SwayOptions sway;

  bool emit_clouds = true;
  SensorConfig sensor;
  /// Overrides default_scene(scene) when set.
  std::optional<Scene> scene_geometry;
};

struct SimTrial {
  std::string id;
  ScenarioKind scenario = ScenarioKind::Treadmill;
  std::vector<StateVector> states;  // 20 Hz grid starting at t = 0
  std::vector<PointCloud> clouds;   // one per state tick when clouds are emitted
  std::vector<PerturbationSpec> truth;
};

/// Auto-scheduled onsets with i.i.d. gaps in [16, 21] s, random direction and magnitude.
std::vector<PerturbationSpec> schedule_perturbations(double duration, std::uint64_t seed);

SimTrial simulate_treadmill_trial(const WalkConfig& cfg, std::span<const PerturbationSpec> perturbations);

/// Walk along a centripetal Catmull-Rom spline through `waypoints` at cfg.speed.
/// The trial ends at the path end or after cfg.duration, whichever is first.
SimTrial simulate_walk_scene(const WalkConfig& cfg, std::span<const Vec2> waypoints);

/// Densely sampled spline through the waypoints; exposed for tests and routing.
std::vector<Vec2> smooth_path(std::span<const Vec2> waypoints, double spacing = 0.02);

/// Closed square route of side `side` with circular corner fillets of `radius`.
std::vector<Vec2> filleted_square_route(const Vec2& origin, double side, double radius, double point_spacing = 0.25);

/// Built-in route that stays inside default_scene(kind).
std::vector<Vec2> default_route(ScenarioKind kind, std::uint64_t seed);

/// Point cloud seen by the sensor at `pose`.
PointCloud sense_scene(const Scene& scene, const Pose& pose, const SensorConfig& sensor);

}  // namespace swayrisk
