#include "swayrisk/core.hpp"

#include <cmath>
#include <sstream>

#include "swayrisk/error.hpp"

namespace swayrisk {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid input";
    case ErrorCode::InsufficientData: return "insufficient data";
    case ErrorCode::InvalidCovariance: return "invalid covariance";
    case ErrorCode::InvalidSchedule: return "invalid schedule";
    case ErrorCode::Gap: return "gap";
    case ErrorCode::Schema: return "schema mismatch";
    case ErrorCode::Shape: return "shape mismatch";
    case ErrorCode::NanPayload: return "NaN payload";
    case ErrorCode::UndefinedRatio: return "undefined ratio";
    case ErrorCode::Io: return "I/O error";
    case ErrorCode::Internal: return "internal error";
  }
  return "unknown error";
}

namespace {

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

}  // namespace

UnitQuaternion::UnitQuaternion(const Eigen::Quaterniond& q) : q_(canonical(q)) {}

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const Eigen::Quaterniond q(w, x, y, z);
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > kNormTolerance) {
    std::ostringstream os;
    os << "quaternion norm " << n << " is not 1 within " << kNormTolerance;
    fail(ErrorCode::InvalidInput, os.str());
  }
  q_ = canonical(q);
}

UnitQuaternion UnitQuaternion::normalized(double w, double x, double y, double z) {
  Eigen::Quaterniond q(w, x, y, z);
  const double n = q.norm();
  if (!std::isfinite(n) || n < 1e-12) fail(ErrorCode::InvalidInput, "quaternion has zero or non-finite norm");
  q.coeffs() /= n;
  return UnitQuaternion(q);
}

UnitQuaternion UnitQuaternion::from_eigen(const Eigen::Quaterniond& q) {
  return normalized(q.w(), q.x(), q.y(), q.z());
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n < 1e-15) return identity();
  return UnitQuaternion(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis / n)));
}

UnitQuaternion UnitQuaternion::inverse() const { return UnitQuaternion(q_.conjugate()); }

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  Eigen::Quaterniond q = a.q_ * b.q_;
  // Products drift off the unit sphere by ~1 ulp per multiply; pull them back.
  q.normalize();
  return UnitQuaternion(q);
}

std::array<double, kStateDim> StateVector::to_array() const {
  std::array<double, kStateDim> out{};
  for (int i = 0; i < 3; ++i) {
    out[channel::kPosition + i] = position[i];
    out[channel::kLinearVelocity + i] = linear_velocity[i];
    out[channel::kAngularVelocity + i] = angular_velocity[i];
  }
  out[channel::kOrientation + 0] = orientation.w();
  out[channel::kOrientation + 1] = orientation.x();
  out[channel::kOrientation + 2] = orientation.y();
  out[channel::kOrientation + 3] = orientation.z();
  out[channel::kSwayArea] = sway_area;
  out[channel::kStepFrequency] = step_frequency;
  for (std::size_t j = 0; j < kJointCount; ++j) out[channel::kJointAngles + j] = joint_angles[j];
  return out;
}

StateVector StateVector::from_array(Timestamp t, std::span<const double, kStateDim> v) {
  StateVector s;
  s.timestamp = t;
  for (int i = 0; i < 3; ++i) {
    s.position[i] = v[channel::kPosition + i];
    s.linear_velocity[i] = v[channel::kLinearVelocity + i];
    s.angular_velocity[i] = v[channel::kAngularVelocity + i];
  }
  const std::size_t o = channel::kOrientation;
  s.orientation = UnitQuaternion::normalized(v[o], v[o + 1], v[o + 2], v[o + 3]);
  s.sway_area = v[channel::kSwayArea];
  s.step_frequency = v[channel::kStepFrequency];
  for (std::size_t j = 0; j < kJointCount; ++j) s.joint_angles[j] = v[channel::kJointAngles + j];
  return s;
}

const std::array<std::string_view, kStateDim>& state_channel_names() {
  static constexpr std::array<std::string_view, kStateDim> names = {
      "pos_x",           "pos_y",           "pos_z",             "quat_w",
      "quat_x",          "quat_y",          "quat_z",            "vel_x",
      "vel_y",           "vel_z",           "angvel_x",          "angvel_y",
      "angvel_z",        "sway_area",       "step_frequency",    "hip_flexion_l",
      "hip_flexion_r",   "hip_abduction_l", "hip_abduction_r",   "hip_rotation_l",
      "hip_rotation_r",  "knee_flexion_l",  "knee_flexion_r",    "thigh_roll_diff",
  };
  return names;
}

Vec3 rotate_vector(const UnitQuaternion& q, const Vec3& v) { return q.eigen() * v; }

PointCloud transform_to_frame(const PointCloud& cloud, const Pose& target) {
  PointCloud out;
  out.timestamp = cloud.timestamp;
  out.source_pose = cloud.source_pose;
  out.points.reserve(cloud.points.size());
  const Mat3 inv = target.orientation.matrix().transpose();
  for (const Vec3& p : cloud.points) out.points.push_back(inv * (p - target.position));
  return out;
}

Pose inverse(const Pose& pose) {
  Pose out;
  out.timestamp = pose.timestamp;
  out.orientation = pose.orientation.inverse();
  out.position = -rotate_vector(out.orientation, pose.position);
  return out;
}

Vec3 angular_velocity_between(const UnitQuaternion& from, const UnitQuaternion& to, double dt) {
  if (!(dt > 0.0)) fail(ErrorCode::InvalidInput, "angular velocity needs dt > 0");
  const Eigen::AngleAxisd delta(from.eigen().conjugate() * to.eigen());
  double angle = delta.angle();
  // AngleAxis may hand back the long way round; take the short rotation.
  if (angle > M_PI) angle -= 2.0 * M_PI;
  return delta.axis() * (angle / dt);
}

void fill_velocities(std::span<StateVector> states, double dt) {
  const std::size_t n = states.size();
  if (n < 2) {
    for (StateVector& s : states) {
      s.linear_velocity.setZero();
      s.angular_velocity.setZero();
    }
    return;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k + 1 == n ? k : k + 1;
    const double span = dt * static_cast<double>(hi - lo);
    states[k].linear_velocity = (states[hi].position - states[lo].position) / span;
    states[k].angular_velocity = angular_velocity_between(states[lo].orientation, states[hi].orientation, span);
  }
}

}  // namespace swayrisk
