#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "swayrisk/core.hpp"
#include "swayrisk/error.hpp"

using namespace swayrisk;
using testing::deg;

namespace {

bool close(const Vec3& a, const Vec3& b, double tol) { return (a - b).norm() <= tol; }

// Rodrigues' formula, independent of the quaternion code path.
Vec3 rodrigues(const Vec3& axis, double angle, const Vec3& v) {
  const Vec3 k = axis.normalized();
  return v * std::cos(angle) + k.cross(v) * std::sin(angle) + k * k.dot(v) * (1.0 - std::cos(angle));
}

}  // namespace

TEST_CASE("rotate_vector examples") {
  CHECK(close(rotate_vector(UnitQuaternion::identity(), Vec3(1, 2, 3)), Vec3(1, 2, 3), 0.0));
  CHECK(close(rotate_vector(UnitQuaternion::from_axis_angle(Vec3::UnitZ(), deg(90)), Vec3(1, 0, 0)), Vec3(0, 1, 0),
              1e-15));
  CHECK(close(rotate_vector(UnitQuaternion::from_axis_angle(Vec3::UnitX(), deg(180)), Vec3(0, 0, 1)),
              Vec3(0, 0, -1), 1e-15));
}

TEST_CASE("rotate_vector agrees with Rodrigues") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis(n(rng), n(rng), n(rng));
    const double angle = a(rng);
    const Vec3 v(n(rng), n(rng), n(rng));
    CHECK(close(rotate_vector(UnitQuaternion::from_axis_angle(axis, angle), v), rodrigues(axis, angle, v), 1e-12));
  }
}

TEST_CASE("rotation preserves length and composes") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int i = 0; i < 500; ++i) {
    const UnitQuaternion q1 = testing::random_quaternion(rng);
    const UnitQuaternion q2 = testing::random_quaternion(rng);
    const Vec3 v(n(rng), n(rng), n(rng));
    CHECK(std::abs(rotate_vector(q1, v).norm() - v.norm()) <= 1e-12);
    CHECK(close(rotate_vector(q2, rotate_vector(q1, v)), rotate_vector(q2 * q1, v), 1e-9));
  }
}

TEST_CASE("quaternion validation and canonical sign") {
  CHECK_THROWS_AS(UnitQuaternion(1.0, 0.1, 0.0, 0.0), Error);
  CHECK_THROWS_AS(UnitQuaternion::normalized(0, 0, 0, 0), Error);
  const UnitQuaternion q(-1.0, 0.0, 0.0, 0.0);
  CHECK(q.w() == 1.0);
  const UnitQuaternion r = UnitQuaternion::normalized(-0.5, 0.5, -0.5, 0.5);
  CHECK(r.w() >= 0.0);
  CHECK(r.x() == doctest::Approx(-0.5));
}

TEST_CASE("transform_to_frame examples") {
  PointCloud c;
  c.points = {Vec3(2, 0, 0), Vec3(0, 1, 0), Vec3(-3, 4, 5)};

  const PointCloud same = transform_to_frame(c, Pose{});
  for (std::size_t i = 0; i < c.points.size(); ++i) CHECK(close(same.points[i], c.points[i], 0.0));

  Pose shifted;
  shifted.position = Vec3(1, 0, 0);
  CHECK(close(transform_to_frame(c, shifted).points[0], Vec3(1, 0, 0), 1e-15));

  Pose yawed;
  yawed.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), deg(90));
  CHECK(close(transform_to_frame(c, yawed).points[1], Vec3(1, 0, 0), 1e-15));
}

TEST_CASE("transform_to_frame round-trips through the inverse pose") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    Pose p;
    p.position = Vec3(n(rng), n(rng), n(rng)) * 5.0;
    p.orientation = testing::random_quaternion(rng);
    PointCloud c;
    for (int i = 0; i < 20; ++i) c.points.emplace_back(n(rng) * 3, n(rng) * 3, n(rng) * 3);
    const PointCloud back = transform_to_frame(transform_to_frame(c, p), inverse(p));
    for (std::size_t i = 0; i < c.points.size(); ++i) CHECK(close(back.points[i], c.points[i], 1e-9));
  }
}

TEST_CASE("state vector layout") {
  const auto& names = state_channel_names();
  CHECK(names.size() == 24);
  CHECK(names[channel::kPosition] == "pos_x");
  CHECK(names[channel::kSwayArea] == "sway_area");
  CHECK(names[channel::kStepFrequency] == "step_frequency");

  StateVector s;
  s.position = Vec3(1, 2, 3);
  s.orientation = UnitQuaternion::from_axis_angle(Vec3(1, 1, 0), 0.3);
  s.linear_velocity = Vec3(4, 5, 6);
  s.angular_velocity = Vec3(7, 8, 9);
  s.sway_area = 0.25;
  s.step_frequency = 1.9;
  for (std::size_t j = 0; j < kJointCount; ++j) s.joint_angles[j] = 0.1 * double(j);

  const auto a = s.to_array();
  CHECK(a[0] == 1.0);
  CHECK(a[3] == s.orientation.w());
  CHECK(a[13] == 0.25);
  CHECK(a[23] == doctest::Approx(0.8));
  const StateVector back = StateVector::from_array(Timestamp{1.5}, a);
  const auto b = back.to_array();
  for (std::size_t i = 0; i < kStateDim; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-15));
  CHECK(back.timestamp.seconds == 1.5);
}

TEST_CASE("fill_velocities on a ramp") {
  std::vector<StateVector> states(10);
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].timestamp = Timestamp{0.05 * double(i)};
    states[i].position = Vec3(1.25 * 0.05 * double(i), 0, 0);
  }
  fill_velocities(states, 0.05);
  for (const auto& s : states) CHECK(s.linear_velocity.x() == doctest::Approx(1.25));
}

TEST_CASE("angular velocity of a constant yaw rate") {
  const UnitQuaternion a = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.1);
  const UnitQuaternion b = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.15);
  const Vec3 w = angular_velocity_between(a, b, 0.05);
  CHECK(w.z() == doctest::Approx(1.0));
  CHECK(std::abs(w.x()) < 1e-12);
  CHECK_THROWS_AS(angular_velocity_between(a, b, 0.0), Error);
}
