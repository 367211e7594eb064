#pragma once

#include <array>
#include <compare>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace swayrisk {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Canonical publishing interval of the pre-processor (20 Hz).
inline constexpr double kTickSeconds = 0.05;

/// Seconds since trajectory start.
struct Timestamp {
  double seconds = 0.0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Rotation stored as a unit quaternion, canonicalized to w >= 0.
///
/// Construction from raw components validates |q| = 1 within kNormTolerance;
/// use normalized() for components that came out of arithmetic or files.
class UnitQuaternion {
 public:
  static constexpr double kNormTolerance = 1e-9;

  UnitQuaternion() = default;
  UnitQuaternion(double w, double x, double y, double z);

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion normalized(double w, double x, double y, double z);
  static UnitQuaternion from_eigen(const Eigen::Quaterniond& q);
  /// Right-handed rotation of `angle` radians about `axis` (need not be unit length).
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  const Eigen::Quaterniond& eigen() const { return q_; }

  UnitQuaternion inverse() const;
  Mat3 matrix() const { return q_.toRotationMatrix(); }

  friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);
  friend bool operator==(const UnitQuaternion& a, const UnitQuaternion& b) {
    return a.q_.coeffs() == b.q_.coeffs();
  }

 private:
  explicit UnitQuaternion(const Eigen::Quaterniond& q);
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

/// Torso pose in the start frame (+X forward, +Y left, +Z up).
struct Pose {
  Timestamp timestamp;
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;  // torso -> start frame
};

inline constexpr std::size_t kStateDim = 24;
inline constexpr std::size_t kJointCount = 9;

/// Per-tick user state. Serialized layout (24 values) follows state_channel_names().
struct StateVector {
  Timestamp timestamp;
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double sway_area = 0.0;
  double step_frequency = 0.0;
  std::array<double, kJointCount> joint_angles{};

  std::array<double, kStateDim> to_array() const;
  /// Inverse of to_array(); the quaternion block is re-normalized.
  static StateVector from_array(Timestamp t, std::span<const double, kStateDim> values);
};

const std::array<std::string_view, kStateDim>& state_channel_names();

/// Offsets into the serialized StateVector layout.
namespace channel {
inline constexpr std::size_t kPosition = 0;
inline constexpr std::size_t kOrientation = 3;
inline constexpr std::size_t kLinearVelocity = 7;
inline constexpr std::size_t kAngularVelocity = 10;
inline constexpr std::size_t kSwayArea = 13;
inline constexpr std::size_t kStepFrequency = 14;
inline constexpr std::size_t kJointAngles = 15;
}  // namespace channel

struct PointCloud {
  Timestamp timestamp;
  std::vector<Vec3> points;  // start frame, meters
  Pose source_pose;
};

Vec3 rotate_vector(const UnitQuaternion& q, const Vec3& v);

/// Expresses every point of `cloud` in the frame of `target`.
PointCloud transform_to_frame(const PointCloud& cloud, const Pose& target);

/// Pose whose frame transform undoes `pose` (position -R^-1 p, orientation q^-1).
Pose inverse(const Pose& pose);

/// Recomputes linear and angular velocities by central differences on the
/// tick grid (one-sided at the ends).
void fill_velocities(std::span<StateVector> states, double dt);

/// Body-frame angular velocity that carries `from` into `to` over `dt` seconds.
Vec3 angular_velocity_between(const UnitQuaternion& from, const UnitQuaternion& to, double dt);

}  // namespace swayrisk
