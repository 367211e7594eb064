#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "swayrisk/core.hpp"

namespace testing {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("swayrisk_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

/// States on the tick grid following `xy`, upright, heading along the path.
inline std::vector<swayrisk::StateVector> states_along(const std::vector<swayrisk::Vec2>& xy, double dt = 0.05) {
  std::vector<swayrisk::StateVector> out(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) {
    out[i].timestamp = swayrisk::Timestamp{static_cast<double>(i) * dt};
    out[i].position = swayrisk::Vec3(xy[i].x(), xy[i].y(), 1.3);
    out[i].sway_area = 0.01 * static_cast<double>(i % 7);
    out[i].step_frequency = 1.9;
  }
  swayrisk::fill_velocities(out, dt);
  return out;
}

/// Constant-speed circle sampled on the tick grid.
inline std::vector<swayrisk::Vec2> circle_path(double radius, std::size_t n, double speed = 1.25, double dt = 0.05) {
  std::vector<swayrisk::Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = speed * dt * static_cast<double>(i) / radius;
    out[i] = swayrisk::Vec2(radius * std::cos(a), radius * std::sin(a));
  }
  return out;
}

inline std::vector<swayrisk::Vec2> line_path(std::size_t n, double speed = 1.25, double dt = 0.05,
                                             const swayrisk::Vec2& dir = swayrisk::Vec2(1.0, 0.0)) {
  std::vector<swayrisk::Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = dir.normalized() * speed * dt * static_cast<double>(i);
  return out;
}

inline swayrisk::UnitQuaternion random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return swayrisk::UnitQuaternion::normalized(n(rng), n(rng), n(rng), n(rng));
}

}  // namespace testing
