// Exercises the shared library through its C header only.
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swayrisk/swayrisk.h"

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("swayrisk_capi_" + name);
  std::filesystem::remove_all(p);
  return p;
}

nlohmann::json call(swr_status (*fn)(const char*, char**), const nlohmann::json& config, swr_status expect = SWR_OK) {
  char* out = nullptr;
  const swr_status s = fn(config.dump().c_str(), &out);
  CHECK_MESSAGE(s == expect, swr_last_error());
  nlohmann::json j;
  if (out != nullptr) {
    j = nlohmann::json::parse(out);
    swr_string_free(out);
  }
  return j;
}

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(std::strlen(swr_version()) > 0);
  CHECK(std::string(swr_status_string(SWR_OK)) == "ok");
  for (int s = SWR_INVALID_INPUT; s <= SWR_INTERNAL; ++s) {
    CHECK(std::strlen(swr_status_string(static_cast<swr_status>(s))) > 0);
  }
}

TEST_CASE("math entry points") {
  const double q[4] = {std::cos(M_PI / 4), 0, 0, std::sin(M_PI / 4)};
  const double v[3] = {1, 0, 0};
  double r[3];
  REQUIRE(swr_rotate_vector(q, v, r) == SWR_OK);
  CHECK(r[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(1.0));

  const double bad_q[4] = {2, 0, 0, 0};
  CHECK(swr_rotate_vector(bad_q, v, r) == SWR_INVALID_INPUT);
  CHECK(std::strlen(swr_last_error()) > 0);

  const double mean[2] = {0, 0};
  const double cov[4] = {2, 1, 1, 2};
  swr_ellipse e;
  REQUIRE(swr_ellipse_from_cov(mean, cov, 5.991, &e) == SWR_OK);
  CHECK(std::string(swr_last_error()).empty());
  CHECK(e.area == doctest::Approx(32.5994).epsilon(1e-5));
  CHECK(e.rotation == doctest::Approx(M_PI / 4));

  const double indefinite[4] = {1, 2, 2, 1};
  CHECK(swr_ellipse_from_cov(mean, indefinite, 5.991, &e) == SWR_INVALID_COVARIANCE);

  const double two[4] = {0, 0, 1, 1};
  CHECK(swr_fit_ellipse(two, 2, 5.991, &e) == SWR_INSUFFICIENT_DATA);
  const double square[8] = {0, 0, 1, 0, 0, 1, 1, 1};
  REQUIRE(swr_fit_ellipse(square, 4, 5.991, &e) == SWR_OK);
  CHECK(e.cov[0] == doctest::Approx(1.0 / 3.0));

  CHECK(swr_fit_ellipse(nullptr, 4, 5.991, &e) == SWR_INVALID_INPUT);
}

TEST_CASE("sway series, noise floor, turning radius") {
  std::vector<double> quats(4 * 60, 0.0);
  for (std::size_t i = 0; i < 60; ++i) quats[4 * i] = 1.0;
  std::vector<double> sigma(60), delta(60);
  size_t emitted = 0;
  REQUIRE(swr_sway_series(quats.data(), 60, 50, 0.05, 5.991, sigma.data(), delta.data(), &emitted) == SWR_OK);
  CHECK(emitted == 11);
  for (size_t i = 0; i < emitted; ++i) CHECK(sigma[i] == 0.0);
  CHECK(swr_sway_series(quats.data(), 10, 50, 0.05, 5.991, sigma.data(), delta.data(), &emitted) ==
        SWR_INSUFFICIENT_DATA);

  std::vector<double> flat(200, 1.0);
  double nf = -1;
  REQUIRE(swr_noise_floor(flat.data(), flat.size(), &nf) == SWR_OK);
  CHECK(nf == 0.0);
  CHECK(swr_noise_floor(flat.data(), 50, &nf) == SWR_INSUFFICIENT_DATA);

  std::vector<double> line(2 * 100);
  for (int i = 0; i < 100; ++i) line[2 * i] = 0.0625 * i;
  double radius = 0;
  REQUIRE(swr_min_turning_radius(line.data(), 100, &radius) == SWR_OK);
  CHECK(std::isinf(radius));
}

TEST_CASE("cloud queue and panorama handles") {
  swr_cloud_queue* q = nullptr;
  REQUIRE(swr_cloud_queue_create(2, &q) == SWR_OK);
  const double origin[3] = {0, 0, 0};
  const double identity[4] = {1, 0, 0, 0};
  const float pts[6] = {5, 0, 0, 0, 3, 0};
  for (int i = 0; i < 3; ++i) REQUIRE(swr_cloud_queue_push(q, 0.05 * i, origin, identity, pts, 2) == SWR_OK);
  size_t n = 0;
  REQUIRE(swr_cloud_queue_size(q, &n) == SWR_OK);
  CHECK(n == 2);
  const float nan_pt[3] = {NAN, 0, 0};
  CHECK(swr_cloud_queue_push(q, 1.0, origin, identity, nan_pt, 1) == SWR_INVALID_INPUT);

  swr_panorama* p = nullptr;
  REQUIRE(swr_panorama_build(q, origin, identity, 0, 0, 0.0f, &p) == SWR_OK);
  const float* data = nullptr;
  uint16_t rows = 0, cols = 0;
  REQUIRE(swr_panorama_data(p, &data, &rows, &cols) == SWR_OK);
  CHECK(rows == 180);
  CHECK(cols == 360);
  CHECK(data[90 * 360 + 180] == 5.0f);
  CHECK(data[90 * 360 + 270] == 3.0f);
  double coverage = 0;
  REQUIRE(swr_panorama_coverage(p, &coverage) == SWR_OK);
  CHECK(coverage == doctest::Approx(2.0 / 64800.0));

  const auto dir = scratch("pano");
  std::filesystem::create_directories(dir);
  const std::string file = (dir / "p.pano").string();
  REQUIRE(swr_panorama_save(p, file.c_str()) == SWR_OK);
  swr_panorama* loaded = nullptr;
  REQUIRE(swr_panorama_load(file.c_str(), &loaded) == SWR_OK);
  const float* data2 = nullptr;
  REQUIRE(swr_panorama_data(loaded, &data2, nullptr, nullptr) == SWR_OK);
  CHECK(std::memcmp(data, data2, 64800 * sizeof(float)) == 0);
  CHECK(swr_panorama_load((dir / "missing").string().c_str(), &loaded) == SWR_IO);

  swr_panorama_destroy(loaded);
  swr_panorama_destroy(p);
  swr_cloud_queue_destroy(q);
  swr_panorama_destroy(nullptr);
  swr_cloud_queue_destroy(nullptr);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pipelines through JSON") {
  CHECK(swr_simulate("{not json", nullptr) == SWR_INVALID_INPUT);
  CHECK(swr_simulate(nullptr, nullptr) == SWR_INVALID_INPUT);

  const auto dir = scratch("pipe");
  call(swr_simulate, {{"output", dir.string()}, {"bogus", 1}}, SWR_INVALID_INPUT);
  call(swr_simulate, {{"output", dir.string()}, {"duration", 0}}, SWR_INVALID_INPUT);

  const auto sim = call(swr_simulate, {{"output", (dir / "sim").string()},
                                       {"trials", 2},
                                       {"seed", 3},
                                       {"duration", 40},
                                       {"controls", 1},
                                       {"jobs", 2}});
  CHECK(sim["trials"] == 2);
  CHECK(sim["controls"] == 1);
  CHECK(std::filesystem::exists(dir / "sim/run_config.json"));

  const auto det = call(swr_detect, {{"input", (dir / "sim").string()}, {"output", (dir / "det").string()}});
  CHECK(det["trials"] == 3);
  CHECK(det.contains("warning"));
  CHECK(std::filesystem::exists(dir / "det/report.json"));

  call(swr_detect, {{"input", (dir / "nowhere").string()}, {"output", (dir / "x").string()}}, SWR_IO);
  std::filesystem::remove_all(dir);
}
