#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "corridor_oracle.hpp"
#include "support.hpp"
#include "swayrisk/dataset.hpp"
#include "swayrisk/error.hpp"
#include "swayrisk/panorama.hpp"
#include "swayrisk/simgait.hpp"

using namespace swayrisk;

namespace {

PointCloud cloud_of(std::vector<Vec3> pts, double t = 0.0) {
  PointCloud c;
  c.timestamp = Timestamp{t};
  c.points = std::move(pts);
  return c;
}

Trajectory corridor_walk(double duration) {
  WalkConfig cfg;
  cfg.seed = 5;
  cfg.scene = ScenarioKind::Indoor;
  cfg.scene_geometry = corridor_scene(1.2, -5.0, 40.0);
  cfg.duration = duration;
  const std::vector<Vec2> route{{0.0, 0.0}, {30.0, 0.0}};
  return trajectory_from_trial(simulate_walk_scene(cfg, route));
}

}  // namespace

TEST_CASE("pixel examples") {
  auto h = project_point_to_pixel(Vec3(5, 0, 0));
  REQUIRE(h);
  CHECK(h->row == 90);
  CHECK(h->col == 180);
  CHECK(h->depth == 5.0);

  h = project_point_to_pixel(Vec3(0, 3, 0));
  REQUIRE(h);
  CHECK(h->row == 90);
  CHECK(h->col == 270);
  CHECK(h->depth == 3.0);

  CHECK_FALSE(project_point_to_pixel(Vec3(11, 0, 0)));
  CHECK_FALSE(project_point_to_pixel(Vec3(0, 0, 0)));
  CHECK(project_point_to_pixel(Vec3(10, 0, 0)));

  // Poles and the back seam clamp into the grid.
  CHECK(project_point_to_pixel(Vec3(0, 0, 2))->row == 0);
  CHECK(project_point_to_pixel(Vec3(0, 0, -2))->row == 179);
  CHECK(project_point_to_pixel(Vec3(-1, 0, 0))->col == 359);
  CHECK(project_point_to_pixel(Vec3(-1, -1e-9, 0))->col == 0);
}

TEST_CASE("cloud queue") {
  CloudQueue q(3);
  for (int i = 1; i <= 4; ++i) q.push(cloud_of({}, i));
  REQUIRE(q.size() == 3);
  CHECK(q.entries()[0].timestamp.seconds == 2.0);
  CHECK(q.entries()[2].timestamp.seconds == 4.0);

  CloudQueue one(5);
  one.push(cloud_of({}));
  CHECK(one.size() == 1);

  CloudQueue none(0);
  for (int i = 0; i < 3; ++i) none.push(cloud_of({Vec3(1, 0, 0)}));
  CHECK(none.empty());
}

TEST_CASE("build_panorama examples") {
  CloudQueue q;
  const DepthPanorama empty = build_panorama(q, Pose{});
  CHECK(empty.data().size() == 64800);
  CHECK(std::all_of(empty.data().begin(), empty.data().end(), [](float d) { return d == 10.0f; }));
  CHECK(panorama_coverage(empty) == 0.0);

  q.push(cloud_of({Vec3(5, 0, 0)}));
  const DepthPanorama one = build_panorama(q, Pose{});
  CHECK(one.at(90, 180) == 5.0f);
  CHECK(std::count(one.data().begin(), one.data().end(), 10.0f) == 64799);
  CHECK(panorama_coverage(one) == doctest::Approx(1.0 / 64800.0));

  q.push(cloud_of({Vec3(3, 0.001, 0), Vec3(7, 0.002, 0)}));
  CHECK(build_panorama(q, Pose{}).at(90, 180) == static_cast<float>(Vec3(3, 0.001, 0).norm()));
}

TEST_CASE("build_panorama is deterministic and order independent") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  std::vector<PointCloud> clouds;
  for (int c = 0; c < 6; ++c) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 3000; ++i) pts.emplace_back(u(rng), u(rng), u(rng) * 0.3);
    clouds.push_back(cloud_of(pts, c));
  }
  Pose torso;
  torso.position = Vec3(0.5, -0.2, 1.3);
  torso.orientation = UnitQuaternion::from_axis_angle(Vec3(0.1, 0.2, 1.0), 0.8);

  const DepthPanorama a = build_panorama(clouds, torso);
  const DepthPanorama b = build_panorama(clouds, torso);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));

  std::vector<PointCloud> shuffled = clouds;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(build_panorama(shuffled, torso) == a);
}

TEST_CASE("cell-center round trip stays within the quantization bound") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-9.0, 9.0);
  const double half_pixel = std::tan(0.5 * std::numbers::pi / 180.0);
  for (int i = 0; i < 5000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const auto hit = project_point_to_pixel(p);
    if (!hit) continue;
    const Vec3 back = cell_center_ray(hit->row, hit->col) * hit->depth;
    CHECK((back - p).norm() <= hit->depth * half_pixel * std::sqrt(2.0) + 1e-12);
  }
}

TEST_CASE("analytic corridor panorama") {
  const testing::Corridor corridor;
  const Vec3 position(1.0, 0.3, 1.3);
  const Vec3 axis(0.2, -0.1, 1.0);
  const double angle = 0.35;
  const auto expected = corridor.expected(position, axis, angle);
  REQUIRE(expected.size() > 1000);

  std::vector<Vec3> pts;
  for (const auto& e : expected) pts.push_back(e.world);
  Pose torso;
  torso.position = position;
  torso.orientation = UnitQuaternion::from_axis_angle(axis, angle);
  const DepthPanorama pano = build_panorama(std::vector<PointCloud>{cloud_of(pts)}, torso);

  for (const auto& e : expected) {
    bool found = false;
    for (int dr = -1; dr <= 1 && !found; ++dr) {
      for (int dc = -1; dc <= 1 && !found; ++dc) {
        const int r = e.row + dr, c = e.col + dc;
        if (r < 0 || r >= 180 || c < 0 || c >= 360) continue;
        found = std::abs(pano.at(r, c) - e.depth) <= 1e-4;
      }
    }
    CHECK(found);
  }
  CHECK(panorama_coverage(pano) == doctest::Approx(double(expected.size()) / 64800.0));
}

TEST_CASE("simulated sensor points lie on the corridor walls") {
  const testing::Corridor corridor;
  const Scene scene = corridor_scene(corridor.half_width, corridor.x_min, corridor.x_max, corridor.height);
  Pose pose;
  pose.position = Vec3(2.0, -0.4, 1.3);
  pose.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.6);
  const PointCloud cloud = sense_scene(scene, pose, SensorConfig{});
  REQUIRE(!cloud.points.empty());
  for (const Vec3& p : cloud.points) {
    const Vec3 d = (p - pose.position).normalized();
    const auto t = corridor.cast(pose.position, d);
    REQUIRE(t);
    CHECK(std::abs(*t - (p - pose.position).norm()) <= 1e-4);
  }
}

TEST_CASE("coverage is monotone in queue capacity") {
  const Trajectory walk = corridor_walk(6.0);
  REQUIRE(walk.clouds.size() == walk.states.size());
  const std::size_t capacities[] = {1, 2, 5, 10, 20, 40};
  for (std::size_t tick = 0; tick < walk.states.size(); tick += 3) {
    double previous = -1.0;
    for (std::size_t cap : capacities) {
      PanoramaOptions opts;
      opts.queue_capacity = cap;
      const double cov = panorama_coverage(panorama_at(walk, tick, opts));
      CHECK(cov >= previous);
      previous = cov;
    }
  }
  PanoramaOptions one, forty;
  one.queue_capacity = 1;
  forty.queue_capacity = 40;
  const std::size_t last = walk.states.size() - 1;
  CHECK(panorama_coverage(panorama_at(walk, last, forty)) > panorama_coverage(panorama_at(walk, last, one)));
}

TEST_CASE("panorama file round trip and errors") {
  DepthPanorama p(PanoramaGeometry{4, 8, 10.0f});
  p.at(1, 2) = 3.25f;
  p.at(3, 7) = 0.5f;
  std::stringstream ss;
  write_panorama(ss, p);
  const std::string bytes = ss.str();
  CHECK(bytes.size() == kPanoramaHeaderBytes + 4 * 8 * 4);
  CHECK(bytes.substr(0, 4) == "PANO");

  std::istringstream in(bytes);
  CHECK(read_panorama(in) == p);

  std::istringstream bad("PANX" + bytes.substr(4));
  try {
    read_panorama(bad);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Schema);
  }

  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  try {
    read_panorama(truncated);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Shape);
  }

  testing::TempDir dir("pano");
  save_panorama(dir / "x.pano", p);
  CHECK(load_panorama(dir / "x.pano") == p);
  save_panorama_pgm(dir / "x.pgm", p);
  CHECK(std::filesystem::file_size(dir / "x.pgm") > 32u);
  CHECK_THROWS_AS(load_panorama(dir / "missing.pano"), Error);
}

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS(DepthPanorama(PanoramaGeometry{0, 360, 10.0f}), Error);
  CHECK_THROWS_AS(DepthPanorama(PanoramaGeometry{180, 360, 0.0f}), Error);
}
