#pragma once

// Sway covariance ellipse: ground-plane shadow of the torso's up-vector,
// sliding-window Gaussian fit, 95% prediction ellipse and its area.

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "swayrisk/core.hpp"

namespace swayrisk {

/// chi^2 quantile with 2 degrees of freedom at p = 0.95.
inline constexpr double kChiSquare95 = 5.991;
inline constexpr std::size_t kDefaultSwayWindow = 50;

struct GroundProjection {
  Timestamp timestamp;
  Vec2 point = Vec2::Zero();
};

struct Gaussian2 {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
};

struct SwayEllipse {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
  double major_axis = 0.0;  // m1
  double minor_axis = 0.0;  // m2
  double rotation = 0.0;    // radians
  double area = 0.0;        // sigma_z
};

struct SwaySample {
  Timestamp timestamp;
  double sigma_z = 0.0;
  double delta_sigma_z = 0.0;  // area units per second
};

struct SwayOptions {
  std::size_t window_len = kDefaultSwayWindow;
  double dt = kTickSeconds;
  double chi_square = kChiSquare95;
};

Vec2 project_torso_vertical(const UnitQuaternion& orientation);
std::vector<GroundProjection> project_stream(std::span<const Pose> poses);

/// Sample mean and unbiased (n - 1) covariance. Needs at least 3 points.
Gaussian2 fit_gaussian(std::span<const Vec2> points);

SwayEllipse ellipse_from_cov(const Vec2& mean, const Mat2& cov, double chi_square = kChiSquare95);

/// Incremental form of sway_series: one window buffer per stream.
class SwayWindow {
 public:
  explicit SwayWindow(SwayOptions options = {});

  /// Returns a sample once the window is full, nothing during warm-up.
  std::optional<SwaySample> push(const GroundProjection& projection);
  void reset();

  const SwayOptions& options() const { return options_; }

 private:
  SwayOptions options_;
  std::deque<Vec2> window_;
  std::vector<Vec2> scratch_;
  std::optional<double> last_sigma_;
};

std::vector<SwaySample> sway_series(std::span<const GroundProjection> projections,
                                    const SwayOptions& options = {});

struct TiltSample {
  Timestamp timestamp;
  double theta_z = 0.0;        // radians from the ground normal
  double delta_theta_z = 0.0;  // rad/s
};

std::vector<TiltSample> torso_tilt_series(std::span<const Pose> poses, double dt = kTickSeconds);

}  // namespace swayrisk
