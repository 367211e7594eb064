#include "swayrisk/sway.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "swayrisk/error.hpp"

namespace swayrisk {

namespace {

constexpr double kEigenClamp = 1e-12;

}  // namespace

Vec2 project_torso_vertical(const UnitQuaternion& orientation) {
  const Vec3 up = rotate_vector(orientation, Vec3::UnitZ());
  return up.head<2>();
}

std::vector<GroundProjection> project_stream(std::span<const Pose> poses) {
  std::vector<GroundProjection> out;
  out.reserve(poses.size());
  for (const Pose& p : poses) out.push_back({p.timestamp, project_torso_vertical(p.orientation)});
  return out;
}

Gaussian2 fit_gaussian(std::span<const Vec2> points) {
  const std::size_t n = points.size();
  if (n < 3) {
    std::ostringstream os;
    os << "Gaussian fit needs at least 3 points, got " << n;
    fail(ErrorCode::InsufficientData, os.str());
  }
  // Shifted by the first point so far-off-origin or constant input loses no precision.
  const Vec2 origin = points.front();
  Vec2 shift = Vec2::Zero();
  for (const Vec2& p : points) {
    if (!p.allFinite()) fail(ErrorCode::InvalidInput, "non-finite point in Gaussian fit");
    shift += p - origin;
  }
  shift /= static_cast<double>(n);
  Gaussian2 g;
  g.mean = origin + shift;
  for (const Vec2& p : points) {
    const Vec2 d = (p - origin) - shift;
    g.cov += d * d.transpose();
  }
  g.cov /= static_cast<double>(n - 1);
  return g;
}

SwayEllipse ellipse_from_cov(const Vec2& mean, const Mat2& cov, double chi_square) {
  const double a = cov(0, 0);
  const double b = cov(0, 1);
  const double c = cov(1, 1);
  const double scale = std::max({1.0, std::abs(a), std::abs(c)});
  if (!cov.allFinite() || std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * scale) {
    fail(ErrorCode::InvalidCovariance, "covariance is not symmetric");
  }

  // Closed-form eigenvalues of [a b; b c], lambda1 >= lambda2.
  const double half_trace = 0.5 * (a + c);
  const double radius = std::hypot(0.5 * (a - c), b);
  double lambda1 = half_trace + radius;
  double lambda2 = half_trace - radius;
  if (lambda2 < -kEigenClamp * scale) {
    std::ostringstream os;
    os << "covariance is indefinite (eigenvalue " << lambda2 << ")";
    fail(ErrorCode::InvalidCovariance, os.str());
  }
  lambda1 = std::max(lambda1, 0.0);
  lambda2 = std::max(lambda2, 0.0);

  SwayEllipse e;
  e.mean = mean;
  e.cov = cov;
  e.major_axis = std::sqrt(chi_square * lambda1);
  e.minor_axis = std::sqrt(chi_square * lambda2);
  // atan2(lambda1 - a, b) is undefined for isotropic diagonal covariances.
  e.rotation = (b == 0.0 && a == c) ? 0.0 : std::atan2(lambda1 - a, b);
  e.area = M_PI * e.major_axis * e.minor_axis;
  return e;
}

SwayWindow::SwayWindow(SwayOptions options) : options_(options) {
  if (options_.window_len < 3) fail(ErrorCode::InvalidInput, "sway window must hold at least 3 points");
  if (!(options_.dt > 0.0)) fail(ErrorCode::InvalidInput, "sway dt must be positive");
  scratch_.reserve(options_.window_len);
}

std::optional<SwaySample> SwayWindow::push(const GroundProjection& projection) {
  window_.push_back(projection.point);
  if (window_.size() > options_.window_len) window_.pop_front();
  if (window_.size() < options_.window_len) return std::nullopt;

  scratch_.assign(window_.begin(), window_.end());
  const Gaussian2 g = fit_gaussian(scratch_);
  const double sigma = ellipse_from_cov(g.mean, g.cov, options_.chi_square).area;
  const double delta = last_sigma_ ? (sigma - *last_sigma_) / options_.dt : 0.0;
  last_sigma_ = sigma;
  return SwaySample{projection.timestamp, sigma, delta};
}

void SwayWindow::reset() {
  window_.clear();
  last_sigma_.reset();
}

std::vector<SwaySample> sway_series(std::span<const GroundProjection> projections, const SwayOptions& options) {
  if (projections.size() < options.window_len) {
    std::ostringstream os;
    os << "sway series needs " << options.window_len << " projections, got " << projections.size();
    fail(ErrorCode::InsufficientData, os.str());
  }
  SwayWindow window(options);
  std::vector<SwaySample> out;
  out.reserve(projections.size() - options.window_len + 1);
  for (const GroundProjection& p : projections) {
    if (auto s = window.push(p)) out.push_back(*s);
  }
  return out;
}

std::vector<TiltSample> torso_tilt_series(std::span<const Pose> poses, double dt) {
  if (!(dt > 0.0)) fail(ErrorCode::InvalidInput, "tilt dt must be positive");
  std::vector<TiltSample> out;
  out.reserve(poses.size());
  for (const Pose& p : poses) {
    const double cz = std::clamp(rotate_vector(p.orientation, Vec3::UnitZ()).z(), -1.0, 1.0);
    const double theta = std::acos(cz);
    const double delta = out.empty() ? 0.0 : (theta - out.back().theta_z) / dt;
    out.push_back({p.timestamp, theta, delta});
  }
  return out;
}

}  // namespace swayrisk
