#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "swayrisk/dataset.hpp"
#include "swayrisk/error.hpp"
#include "swayrisk/simgait.hpp"

using namespace swayrisk;
using testing::circle_path;
using testing::line_path;
using testing::states_along;

namespace {

Trajectory traj_of(std::size_t n, const std::string& id = "traj") {
  Trajectory t;
  t.id = id;
  t.scenario = ScenarioKind::Indoor;
  t.states = states_along(circle_path(1.5, n));
  return t;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Internal;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("window protocol constants") {
  const WindowOptions w;
  CHECK(w.input_ticks == 150);
  CHECK(w.label_ticks == 50);
  CHECK(w.length() == 200);
  CHECK(w.input_ticks * kTickSeconds == doctest::Approx(7.5));
  CHECK(kCurvatureFilterRadius == 2.0);
}

TEST_CASE("resample_20hz") {
  SUBCASE("20 Hz input is unchanged") {
    const auto raw = states_along(line_path(100));
    const auto out = resample_20hz(raw);
    REQUIRE(out.size() == raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(out[i].timestamp.seconds == doctest::Approx(raw[i].timestamp.seconds));
      CHECK(out[i].to_array() == raw[i].to_array());
    }
  }
  SUBCASE("100 Hz ramp keeps its slope") {
    std::vector<StateVector> raw(501);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i].timestamp = Timestamp{0.01 * double(i)};
      raw[i].position = Vec3(1.25 * 0.01 * double(i), 0, 0);
    }
    const auto out = resample_20hz(raw);
    REQUIRE(out.size() == 101);
    for (std::size_t k = 1; k < out.size(); ++k) {
      CHECK((out[k].position.x() - out[k - 1].position.x()) / 0.05 == doctest::Approx(1.25));
      CHECK(out[k].linear_velocity.x() == doctest::Approx(1.25));
    }
  }
  SUBCASE("a 0.3 s gap is reported with its bounds") {
    std::vector<StateVector> raw(40);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i].timestamp = Timestamp{0.05 * double(i) + (i >= 20 ? 0.25 : 0.0)};
    const auto fn = [&] { resample_20hz(raw); };
    CHECK(code_of(fn) == ErrorCode::Gap);
    const std::string msg = message_of(fn);
    CHECK(msg.find("[0.95, 1.25]") != std::string::npos);
  }
  SUBCASE("zero-order hold never invents values") {
    std::vector<StateVector> raw(3);
    raw[0].timestamp = Timestamp{0.0};
    raw[1].timestamp = Timestamp{0.07};
    raw[1].sway_area = 2.0;
    raw[2].timestamp = Timestamp{0.2};
    raw[2].sway_area = 3.0;
    const auto out = resample_20hz(raw);
    REQUIRE(out.size() == 5);
    CHECK(out[1].sway_area == 0.0);
    CHECK(out[2].sway_area == 2.0);
    CHECK(out[3].sway_area == 2.0);
    CHECK(out[4].sway_area == 3.0);
  }
}

TEST_CASE("window counts") {
  CHECK(window_sequences(traj_of(200)).size() == 1);
  CHECK(window_sequences(traj_of(199)).size() == 0);
  const auto w = window_sequences(traj_of(260));
  REQUIRE(w.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(w[i].start_tick == 20 * i);

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> n_dist(0, 3000), s_dist(1, 60);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = n_dist(rng);
    WindowOptions o;
    o.stride = s_dist(rng);
    std::size_t brute = 0;
    for (std::size_t start = 0; start + 200 <= n; start += o.stride) ++brute;
    CHECK(window_count(n, o) == brute);
  }
  WindowOptions zero;
  zero.stride = 0;
  CHECK_THROWS_AS(window_count(300, zero), Error);
}

TEST_CASE("windows are contiguous and tick-exact") {
  const Trajectory t = traj_of(1000);
  for (const auto& w : window_sequences(t)) {
    REQUIRE(w.input_states.size() == 150);
    REQUIRE(w.label_states.size() == 50);
    CHECK(w.label_states.front().timestamp.seconds - w.input_states.back().timestamp.seconds ==
          doctest::Approx(0.05).epsilon(1e-12));
    for (std::size_t i = 0; i < 150; ++i) CHECK(w.input_states[i].to_array() == t.states[w.start_tick + i].to_array());
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(w.label_states[i].to_array() == t.states[w.start_tick + 150 + i].to_array());
    }
    CHECK(w.source_id == "traj");
    CHECK(w.scenario == ScenarioKind::Indoor);
  }
}

TEST_CASE("min_turning_radius on analytic paths") {
  CHECK(std::isinf(min_turning_radius(line_path(200))));
  CHECK(std::isinf(min_turning_radius(line_path(200, 1.25, 0.05, Vec2(1, -2)))));
  CHECK(min_turning_radius(circle_path(1.5, 200)) == doctest::Approx(1.5).epsilon(0.1 / 1.5));
  CHECK(min_turning_radius(circle_path(5.0, 200)) == doctest::Approx(5.0).epsilon(0.3 / 5.0));
  CHECK_THROWS_AS(min_turning_radius(line_path(22)), Error);
}

TEST_CASE("min_turning_radius is invariant under rigid motion") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (double radius : {1.5, 3.0, 7.0}) {
    const auto path = circle_path(radius, 200);
    const double base = min_turning_radius(path);
    for (int i = 0; i < 10; ++i) {
      const Mat2 r = Eigen::Rotation2Dd(u(rng)).toRotationMatrix();
      const Vec2 shift(u(rng), u(rng));
      std::vector<Vec2> moved;
      for (const auto& p : path) moved.push_back(r * p + shift);
      CHECK(std::abs(min_turning_radius(moved) - base) <= 1e-6 * base);
    }
  }
}

TEST_CASE("curvature filter") {
  CurvatureFilter f;
  CHECK_FALSE(f.enabled);
  f.enabled = true;
  auto window_for = [](const std::vector<Vec2>& path) {
    Trajectory t;
    t.states = states_along(path);
    return window_sequences(t).front();
  };
  CHECK(f.accepts(window_for(circle_path(1.5, 200))));
  CHECK_FALSE(f.accepts(window_for(circle_path(5.0, 200))));
  CHECK_FALSE(f.accepts(window_for(line_path(200))));
  f.enabled = false;
  CHECK(f.accepts(window_for(line_path(200))));
}

TEST_CASE("state CSV round trip") {
  const auto states = states_along(circle_path(2.0, 30));
  std::stringstream ss;
  write_states_csv(ss, states);
  const auto back = read_states_csv(ss);
  REQUIRE(back.size() == states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    CHECK(back[i].timestamp.seconds == states[i].timestamp.seconds);
    CHECK(back[i].to_array() == states[i].to_array());
  }

  std::istringstream bad_header("t,x,y\n0,1,2\n");
  CHECK(code_of([&] { read_states_csv(bad_header); }) == ErrorCode::Schema);
  std::string short_row = ss.str().substr(0, ss.str().find('\n') + 1) + "0,1,2\n";
  std::istringstream short_in(short_row);
  CHECK(code_of([&] { read_states_csv(short_in); }) == ErrorCode::Shape);
}

TEST_CASE("trial directory round trip") {
  testing::TempDir dir("trial");
  WalkConfig cfg;
  cfg.seed = 4;
  cfg.duration = 40.0;
  cfg.scene = ScenarioKind::Indoor;
  SimTrial trial = simulate_walk_scene(cfg, default_route(cfg.scene, 4));
  trial.truth.push_back({Timestamp{17.5}, Direction::Left, 0.075, 0.3});
  save_trial(dir / "trials/a", trial);

  const SimTrial back = load_trial(dir / "trials/a");
  CHECK(back.id == trial.id);
  CHECK(back.scenario == trial.scenario);
  REQUIRE(back.states.size() == trial.states.size());
  for (std::size_t i = 0; i < trial.states.size(); ++i) CHECK(back.states[i].to_array() == trial.states[i].to_array());
  REQUIRE(back.clouds.size() == trial.clouds.size());
  for (std::size_t i = 0; i < trial.clouds.size(); i += 50) {
    REQUIRE(back.clouds[i].points.size() == trial.clouds[i].points.size());
    for (std::size_t k = 0; k < trial.clouds[i].points.size(); ++k) {
      CHECK((back.clouds[i].points[k] - trial.clouds[i].points[k]).norm() < 1e-5);
    }
  }
  REQUIRE(back.truth.size() == 1);
  CHECK(back.truth[0].direction == Direction::Left);
  CHECK(back.truth[0].magnitude == 0.075);
  CHECK(load_trial(dir / "trials/a", false).clouds.empty());

  const auto found = find_trials(dir.path());
  REQUIRE(found.size() == 1);
  CHECK(found[0].filename() == "a");
  CHECK(code_of([&] { load_trial(dir / "missing"); }) == ErrorCode::Io);
}

TEST_CASE("exchange export and import") {
  testing::TempDir dir("exchange");
  std::vector<SequenceWindow> windows;
  for (const char* id : {"a", "b"}) {
    const auto w = window_sequences(traj_of(260, id));
    windows.insert(windows.end(), w.begin(), w.end());
  }
  export_training_set(dir / "train", windows);
  const ExchangeSet set = ExchangeSet::open(dir / "train");
  REQUIRE(set.window_count() == windows.size());
  CHECK(set.manifest().kind == ExchangeKind::TrainingSet);
  CHECK(std::filesystem::file_size(dir / "train/states.bin") == windows.size() * 200 * 24 * sizeof(float));

  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto values = set.window_values(w);
    for (std::size_t t = 0; t < 200; ++t) {
      const StateVector& s = t < 150 ? windows[w].input_states[t] : windows[w].label_states[t - 150];
      const auto a = s.to_array();
      for (std::size_t c = 0; c < 24; ++c) CHECK(values[t * 24 + c] == static_cast<float>(a[c]));
    }
    CHECK(set.manifest().windows[w].source_id == windows[w].source_id);
    CHECK(set.manifest().windows[w].start_tick == windows[w].start_tick);
    CHECK(set.label_states(w).front().timestamp.seconds == doctest::Approx(0.05 * double(windows[w].start_tick + 150)));
  }

  write_identity_predictions(set, dir / "pred");
  const ExchangeSet pred = import_predictions(dir / "pred");
  CHECK(pred.manifest().variant == "identity");
  CHECK(pred.manifest().ticks_per_window() == 50);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto p = pred.window_values(w);
    const auto l = set.window_values(w).subspan(150 * 24);
    CHECK(std::equal(p.begin(), p.end(), l.begin()));
  }

  // A training set is not a prediction set.
  CHECK(code_of([&] { import_predictions(dir / "train"); }) == ErrorCode::Schema);
  ExchangeExpectations expect;
  expect.label_ticks = 40;
  CHECK(code_of([&] { ExchangeSet::open(dir / "train", expect); }) == ErrorCode::Shape);
  CHECK(code_of([&] { write_identity_predictions(pred, dir / "again"); }) == ErrorCode::Schema);
}

TEST_CASE("exchange payload errors") {
  testing::TempDir dir("broken");
  const auto windows = window_sequences(traj_of(260));
  export_training_set(dir / "x", windows);
  const auto states = dir / "x/states.bin";
  const std::string bytes = slurp(states);

  SUBCASE("truncated payload") {
    std::ofstream(states, std::ios::binary | std::ios::trunc).write(bytes.data(), std::streamsize(bytes.size() - 4));
    CHECK(code_of([&] { ExchangeSet::open(dir / "x"); }) == ErrorCode::Shape);
  }
  SUBCASE("NaN names window, tick and channel") {
    std::string patched = bytes;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    const std::size_t offset = ((1 * 200 + 3) * 24 + 13) * sizeof(float);
    std::memcpy(patched.data() + offset, &nan, sizeof(float));
    std::ofstream(states, std::ios::binary | std::ios::trunc).write(patched.data(), std::streamsize(patched.size()));
    const auto fn = [&] { ExchangeSet::open(dir / "x"); };
    CHECK(code_of(fn) == ErrorCode::NanPayload);
    const std::string msg = message_of(fn);
    CHECK(msg.find("window 1, tick 3, channel sway_area") != std::string::npos);
  }
  SUBCASE("schema mismatches") {
    nlohmann::json m = nlohmann::json::parse(slurp(dir / "x/manifest.json"));
    auto rewrite = [&](const nlohmann::json& j) { std::ofstream(dir / "x/manifest.json") << j.dump(); };
    nlohmann::json renamed = m;
    renamed["channels"][0] = "position_x";
    rewrite(renamed);
    CHECK(code_of([&] { ExchangeSet::open(dir / "x"); }) == ErrorCode::Schema);
    nlohmann::json future = m;
    future["schema_version"] = 2;
    rewrite(future);
    CHECK(code_of([&] { ExchangeSet::open(dir / "x"); }) == ErrorCode::Schema);
    nlohmann::json other = m;
    other["format"] = "something-else";
    rewrite(other);
    CHECK(code_of([&] { ExchangeSet::open(dir / "x"); }) == ErrorCode::Schema);
  }
  SUBCASE("missing directory") { CHECK(code_of([&] { ExchangeSet::open(dir / "nope"); }) == ErrorCode::Io); }
}

TEST_CASE("manifest JSON round trip") {
  ExchangeManifest m;
  m.kind = ExchangeKind::Predictions;
  m.variant = "v";
  for (auto n : state_channel_names()) m.channels.emplace_back(n);
  m.has_panoramas = true;
  m.geometry = PanoramaGeometry{18, 36, 10.0f};
  m.windows = {{"a", ScenarioKind::OutdoorFree, 40}};
  const ExchangeManifest back = manifest_from_json(to_json(m));
  CHECK(back.kind == m.kind);
  CHECK(back.variant == "v");
  CHECK(back.geometry == m.geometry);
  CHECK(back.windows == m.windows);
  CHECK(back.ticks_per_window() == 50);
}

TEST_CASE("build_exchange with panoramas and the curvature filter") {
  testing::TempDir dir("build");
  WalkConfig cfg;
  cfg.seed = 2;
  cfg.duration = 16.0;
  cfg.scene = ScenarioKind::Indoor;
  std::vector<Trajectory> trajs{trajectory_from_trial(simulate_walk_scene(cfg, default_route(cfg.scene, 2)))};
  Trajectory straight;
  straight.id = "line";
  straight.states = states_along(line_path(260));
  trajs.push_back(straight);

  DatasetOptions opts;
  opts.with_panoramas = true;
  opts.panorama.geometry = PanoramaGeometry{18, 36, 10.0f};
  opts.windows.stride = 40;
  const DatasetSummary s = build_exchange(dir / "a", trajs, opts);
  CHECK(s.trajectories == 2);
  CHECK(s.windows_total == window_count(trajs[0].states.size(), opts.windows) + 2);
  CHECK(s.windows_kept == s.windows_total);

  const ExchangeSet set = ExchangeSet::open(dir / "a");
  REQUIRE(set.manifest().has_panoramas);
  const auto& ref = set.manifest().windows.front();
  for (std::size_t t : {0u, 149u, 199u}) {
    CHECK(set.panorama(0, t) == panorama_at(trajs[0], ref.start_tick + t, opts.panorama));
  }
  // States without clouds give empty panoramas.
  const DepthPanorama empty = set.panorama(set.window_count() - 1, 10);
  CHECK(panorama_coverage(empty) == 0.0);

  opts.jobs = 4;
  build_exchange(dir / "b", trajs, opts);
  CHECK(slurp(dir / "a/states.bin") == slurp(dir / "b/states.bin"));
  CHECK(slurp(dir / "a/panos.bin") == slurp(dir / "b/panos.bin"));
  CHECK(slurp(dir / "a/manifest.json") == slurp(dir / "b/manifest.json"));

  opts.with_panoramas = false;
  opts.filter.enabled = true;
  const DatasetSummary f = build_exchange(dir / "c", trajs, opts);
  CHECK(f.windows_kept < f.windows_total);
  for (const auto& w : ExchangeSet::open(dir / "c").manifest().windows) CHECK(w.source_id != "line");
}

TEST_CASE("split files") {
  testing::TempDir dir("split");
  std::ofstream(dir / "ok.json") << R"({"train": ["a", "b"], "test": ["c"]})";
  const SplitFile s = load_split(dir / "ok.json");
  CHECK(s.contains("train", "a"));
  CHECK(s.contains("test", "c"));
  CHECK_FALSE(s.contains("test", "a"));
  CHECK_THROWS_AS(s.contains("dev", "a"), Error);

  std::ofstream(dir / "both.json") << R"({"train": ["a"], "test": ["a"]})";
  CHECK(code_of([&] { load_split(dir / "both.json"); }) == ErrorCode::Schema);
  std::ofstream(dir / "bad.json") << R"({"train": 3})";
  CHECK(code_of([&] { load_split(dir / "bad.json"); }) == ErrorCode::Schema);
}
