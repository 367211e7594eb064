#include "swayrisk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "swayrisk/dataset.hpp"
#include "swayrisk/detector.hpp"
#include "swayrisk/error.hpp"
#include "swayrisk/eval.hpp"
#include "swayrisk/panorama.hpp"
#include "swayrisk/parallel.hpp"
#include "swayrisk/simgait.hpp"
#include "swayrisk/sway.hpp"

namespace swayrisk::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Reads keys with defaults, records the resolved value of each, and rejects
/// keys nobody asked for.
class Config {
 public:
  explicit Config(const json& j) : in_(j) {
    if (!in_.is_object()) fail(ErrorCode::InvalidInput, "config must be a JSON object");
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    T value = fallback;
    if (in_.contains(key) && !in_.at(key).is_null()) {
      try {
        value = in_.at(key).get<T>();
      } catch (const json::exception&) {
        fail(ErrorCode::InvalidInput, "config key '" + key + "' has the wrong type");
      }
    }
    out_[key] = value;
    return value;
  }

  template <typename T>
  T required(const std::string& key) {
    if (!in_.contains(key) || in_.at(key).is_null()) fail(ErrorCode::InvalidInput, "config key '" + key + "' is required");
    return get<T>(key, T{});
  }

  bool has(const std::string& key) const { return in_.contains(key) && !in_.at(key).is_null(); }

  double positive(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidInput, "'" + key + "' must be positive");
    return v;
  }

  double non_negative(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidInput, "'" + key + "' must be non-negative");
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0) {
    const auto v = get<long long>(key, static_cast<long long>(fallback));
    if (v < static_cast<long long>(min)) {
      fail(ErrorCode::InvalidInput, "'" + key + "' must be at least " + std::to_string(min));
    }
    return static_cast<std::size_t>(v);
  }

  /// Throws on unknown keys and returns the resolved config.
  json finish() const {
    for (const auto& [key, _] : in_.items()) {
      if (!out_.contains(key)) fail(ErrorCode::InvalidInput, "unknown config key '" + key + "'");
    }
    return out_;
  }

 private:
  const json& in_;
  json out_ = json::object();
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) fail(ErrorCode::Io, "failed writing " + path.string());
}

std::size_t jobs_from(Config& c) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return c.count("jobs", hw, 1);
}

SwayOptions sway_options(Config& c) {
  SwayOptions s;
  s.window_len = c.count("window_len", kDefaultSwayWindow, 3);
  s.dt = c.positive("dt", kTickSeconds);
  s.chi_square = c.positive("chi2", kChiSquare95);
  return s;
}

PanoramaGeometry geometry_options(Config& c) {
  PanoramaGeometry g;
  g.rows = static_cast<std::uint16_t>(std::min<std::size_t>(c.count("pano_rows", 180, 1), 65535));
  g.cols = static_cast<std::uint16_t>(std::min<std::size_t>(c.count("pano_cols", 360, 1), 65535));
  g.max_depth = static_cast<float>(c.positive("max_depth", 10.0));
  return g;
}

std::vector<Vec2> route_for(const std::string& route, const WalkConfig& cfg, const json& waypoints) {
  if (!waypoints.is_null()) {
    std::vector<Vec2> out;
    try {
      for (const auto& p : waypoints) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    } catch (const json::exception&) {
      fail(ErrorCode::InvalidInput, "waypoints must be a list of [x, y] pairs");
    }
    return out;
  }
  if (route == "default") return default_route(cfg.scene, cfg.seed);
  if (route == "straight") return {Vec2(0.0, 0.0), Vec2(cfg.speed * cfg.duration, 0.0)};
  if (route == "square") return filleted_square_route(Vec2(0.0, 0.0), 8.0, 1.5);
  fail(ErrorCode::InvalidInput, "unknown route '" + route + "' (default, straight, square)");
}

std::vector<SimTrial> load_trials(const fs::path& input, bool with_clouds, std::size_t jobs) {
  const auto dirs = find_trials(input);
  if (dirs.empty()) fail(ErrorCode::Io, "no trial directories under " + input.string());
  std::vector<SimTrial> trials(dirs.size());
  parallel_for(dirs.size(), jobs, [&](std::size_t i) { trials[i] = load_trial(dirs[i], with_clouds); });
  return trials;
}

}  // namespace

json simulate(const json& config) {
  Config c(config);
  const fs::path output = c.required<std::string>("output");
  const std::string kind = c.get<std::string>("kind", "treadmill");
  const bool batch = c.get<bool>("batch", false);
  const std::size_t trials = c.count("trials", batch ? 192 : 1, 0);
  const auto seed = c.get<std::uint64_t>("seed", 0);
  const std::size_t controls = c.count("controls", 0);
  const auto control_seed = c.get<std::uint64_t>("control_seed", seed + 4000);
  const std::string magnitude = c.get<std::string>("magnitude", batch ? "alternate" : "auto");
  const std::string schedule = c.get<std::string>("schedule", "auto");

  WalkConfig base;
  base.duration = c.positive("duration", batch ? 90.0 : base.duration);
  base.speed = c.positive("speed", base.speed);
  base.step_frequency = c.positive("step_frequency", base.step_frequency);
  base.sway_noise_scale = c.non_negative("sway_noise_scale", base.sway_noise_scale);
  base.recovery_time_constant = c.positive("recovery_time_constant", base.recovery_time_constant);
  base.gait_amplitude_deg = c.non_negative("gait_amplitude_deg", base.gait_amplitude_deg);
  base.gait_ellipticity = c.non_negative("gait_ellipticity", base.gait_ellipticity);
  base.tilt_deg_per_body_weight = c.non_negative("tilt_deg_per_body_weight", base.tilt_deg_per_body_weight);
  base.jitter_deg = c.non_negative("jitter_deg", base.jitter_deg);
  base.jitter_time_constant = c.positive("jitter_time_constant", base.jitter_time_constant);
  base.sway = sway_options(c);
  base.dt = base.sway.dt;
  base.emit_clouds = c.get<bool>("emit_clouds", kind != "treadmill");
  const std::size_t jobs = jobs_from(c);

  std::string route = "default";
  json waypoints;
  if (kind == "scene") {
    base.scene = scenario_from_string(c.get<std::string>("scenario", "indoor"));
    if (c.has("scene_file")) base.scene_geometry = load_scene(c.get<std::string>("scene_file", ""));
    route = c.get<std::string>("route", "default");
    waypoints = c.get<json>("waypoints", json());
  } else if (kind != "treadmill") {
    fail(ErrorCode::InvalidInput, "unknown simulation kind '" + kind + "' (treadmill, scene)");
  }
  if (magnitude != "auto" && magnitude != "alternate" && magnitude != "0.075" && magnitude != "0.15") {
    fail(ErrorCode::InvalidInput, "magnitude must be auto, alternate, 0.075 or 0.15");
  }
  if (schedule != "auto" && schedule != "none") fail(ErrorCode::InvalidInput, "schedule must be auto or none");
  json resolved = c.finish();

  make_dir(output / "trials");
  const std::size_t total = trials + controls;
  std::vector<std::string> ids(total);
  std::vector<std::size_t> events(total, 0);
  parallel_for(total, jobs, [&](std::size_t i) {
    const bool control = i >= trials;
    WalkConfig cfg = base;
    cfg.seed = control ? control_seed + (i - trials) : seed + i;
    SimTrial trial;
    if (kind == "treadmill") {
      std::vector<PerturbationSpec> sched;
      if (!control && schedule == "auto") sched = schedule_perturbations(cfg.duration, cfg.seed);
      for (auto& p : sched) {
        if (magnitude == "alternate") p.magnitude = i % 2 == 0 ? 0.075 : 0.15;
        if (magnitude == "0.075") p.magnitude = 0.075;
        if (magnitude == "0.15") p.magnitude = 0.15;
      }
      trial = simulate_treadmill_trial(cfg, sched);
    } else {
      trial = simulate_walk_scene(cfg, route_for(route, cfg, waypoints));
    }
    if (control) trial.id = "control_" + trial.id;
    ids[i] = trial.id;
    events[i] = trial.truth.size();
    save_trial(output / "trials" / trial.id, trial);
  });
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    fail(ErrorCode::InvalidInput, "trial ids collide; use distinct seeds");
  }
  write_json(output / "run_config.json", resolved);

  std::size_t n_events = 0;
  for (auto e : events) n_events += e;
  return {{"config", resolved},
          {"output", output.string()},
          {"trials", trials},
          {"controls", controls},
          {"perturbations", n_events},
          {"trial_ids", ids}};
}

json detect(const json& config) {
  Config c(config);
  const fs::path input = c.required<std::string>("input");
  const fs::path output = c.required<std::string>("output");
  DetectorOptions opt;
  opt.threshold_mult = c.positive("threshold_mult", opt.threshold_mult);
  opt.refractory = c.non_negative("refractory", opt.refractory);
  opt.response_window = c.positive("response_window", opt.response_window);
  opt.exclusion_span = c.non_negative("exclusion_span", opt.exclusion_span);
  const SwayOptions sway = sway_options(c);
  const bool traces = c.get<bool>("traces", true);
  const std::size_t jobs = jobs_from(c);
  json resolved = c.finish();

  const std::vector<SimTrial> trials = load_trials(input, false, jobs);
  make_dir(output);

  std::vector<TrialDetection> sway_trials(trials.size()), angle_trials(trials.size());
  if (traces) make_dir(output / "traces");
  parallel_for(trials.size(), jobs, [&](std::size_t i) {
    const MetricTraces tr = compute_traces(trials[i].states, sway);
    sway_trials[i] = evaluate_trial(trials[i].id, tr.sway, trials[i].truth, opt);
    angle_trials[i] = evaluate_trial(trials[i].id, tr.angle, trials[i].truth, opt);
    if (traces) {
      const fs::path path = output / "traces" / (trials[i].id + ".csv");
      std::ofstream os(path, std::ios::trunc);
      if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
      write_trace_csv(os, tr, sway_trials[i].events, angle_trials[i].events, sway.dt);
    }
  });
  const DetectionReport sway_report = summarize(Metric::SwayArea, std::move(sway_trials), opt);
  const DetectionReport angle_report = summarize(Metric::TorsoAngle, std::move(angle_trials), opt);

  json report = {{"sway_area", to_json(sway_report)}, {"torso_angle", to_json(angle_report)}};
  write_json(output / "report.json", report);
  write_json(output / "run_config.json", resolved);

  json summary = {{"config", resolved}, {"output", output.string()}, {"trials", trials.size()}};
  for (const auto* r : {&sway_report, &angle_report}) {
    summary[to_string(r->metric)] = {
        {"detection_rate", report[to_string(r->metric)]["detection_rate"]},
        {"false_positives_per_minute", r->false_positives_per_minute},
        {"mean_peak_to_noise", report[to_string(r->metric)]["mean_peak_to_noise"]},
        {"true_events", r->true_events},
        {"detected_events", r->detected_events}};
  }
  if (trials.size() < 10) summary["warning"] = "fewer than 10 trials compared";
  return summary;
}

json build_dataset(const json& config) {
  Config c(config);
  const fs::path input = c.required<std::string>("input");
  const fs::path output = c.required<std::string>("output");
  DatasetOptions opt;
  opt.windows.stride = c.count("stride", kDefaultStride, 1);
  opt.windows.input_ticks = c.count("input_ticks", kInputTicks, 1);
  opt.windows.label_ticks = c.count("label_ticks", kLabelTicks, 1);
  opt.filter.enabled = c.get<bool>("curvature_filter", false);
  opt.filter.max_radius = c.positive("max_turn_radius", kCurvatureFilterRadius);
  opt.with_panoramas = c.get<bool>("panoramas", false);
  opt.panorama.queue_capacity = c.count("queue_capacity", kDefaultQueueCapacity);
  opt.panorama.geometry = geometry_options(c);
  const double dt = c.positive("dt", kTickSeconds);
  const std::string split_file = c.get<std::string>("split_file", "");
  const std::string split = c.get<std::string>("split", "test");
  opt.jobs = jobs_from(c);
  json resolved = c.finish();

  std::vector<SimTrial> trials = load_trials(input, opt.with_panoramas, opt.jobs);
  std::optional<SplitFile> splits;
  if (!split_file.empty()) splits = load_split(split_file);

  std::vector<Trajectory> trajs;
  for (SimTrial& t : trials) {
    if (splits && !splits->contains(split, t.id)) continue;
    Trajectory traj = trajectory_from_trial(std::move(t));
    try {
      validate_tick_grid(traj.states, dt);
    } catch (const Error&) {
      // Off-grid input (e.g. a hand-edited CSV): resample; clouds no longer line up.
      traj.states = resample_20hz(traj.states, {dt, kMaxResampleGap});
      traj.clouds.clear();
    }
    trajs.push_back(std::move(traj));
  }

  const DatasetSummary s = build_exchange(output, trajs, opt);
  write_json(output / "run_config.json", resolved);
  return {{"config", resolved},
          {"output", output.string()},
          {"trajectories", s.trajectories},
          {"windows_total", s.windows_total},
          {"windows", s.windows_kept}};
}

json identity_predictions(const json& config) {
  Config c(config);
  const fs::path truth = c.required<std::string>("truth");
  const fs::path output = c.required<std::string>("output");
  const std::string variant = c.get<std::string>("variant", "identity");
  json resolved = c.finish();

  ExchangeExpectations expect;
  expect.kind = ExchangeKind::TrainingSet;
  const ExchangeSet set = ExchangeSet::open(truth, expect);
  write_identity_predictions(set, output, variant);
  write_json(output / "run_config.json", resolved);
  return {{"config", resolved}, {"output", output.string()}, {"windows", set.window_count()}, {"variant", variant}};
}

json evaluate(const json& config) {
  Config c(config);
  const fs::path truth_dir = c.required<std::string>("truth");
  const auto pred_dirs = c.required<std::vector<std::string>>("predictions");
  const fs::path output = c.required<std::string>("output");
  ExchangeExpectations expect;
  expect.label_ticks = c.count("label_ticks", kLabelTicks, 1);
  expect.input_ticks = c.count("input_ticks", kInputTicks, 1);
  EvalOptions opt;
  opt.panoramas = c.get<bool>("panoramas", true);
  opt.jobs = jobs_from(c);
  json resolved = c.finish();
  if (pred_dirs.empty()) fail(ErrorCode::InvalidInput, "at least one predictions directory is required");

  ExchangeExpectations truth_expect = expect;
  truth_expect.kind = ExchangeKind::TrainingSet;
  const ExchangeSet truth = ExchangeSet::open(truth_dir, truth_expect);
  std::vector<ExchangeSet> preds;
  for (const auto& d : pred_dirs) preds.push_back(import_predictions(d, expect));

  const auto scores = evaluate_predictions(truth, preds, opt);
  const auto curves = horizon_report(scores, truth.manifest().dt);
  const EvalOutputs files = write_eval_outputs(output, curves);
  write_json(output / "run_config.json", resolved);

  json groups = json::array();
  for (const auto& cv : curves) {
    if (cv.scenario != kAllScenarios) continue;
    double mean = 0.0;
    for (double v : cv.mean) mean += v;
    groups.push_back({{"variant", cv.variant},
                      {"metric", cv.metric},
                      {"n", cv.n},
                      {"mean_over_horizon", mean / static_cast<double>(cv.mean.size())},
                      {"final_horizon_mean", cv.mean.back()}});
  }
  return {{"config", resolved},
          {"output", output.string()},
          {"windows", truth.window_count()},
          {"curves", curves.size()},
          {"files", files.files.size()},
          {"summary", groups}};
}

json sway(const json& config) {
  Config c(config);
  const fs::path input = c.required<std::string>("input");
  const fs::path output = c.required<std::string>("output");
  const SwayOptions opt = sway_options(c);
  json resolved = c.finish();

  const SimTrial trial = load_trial(input, false);
  const MetricTraces tr = compute_traces(trial.states, opt);
  make_dir(output);
  {
    std::ofstream os(output / "sway.csv", std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot write " + (output / "sway.csv").string());
    write_trace_csv(os, tr, {}, {}, opt.dt);
  }
  write_json(output / "run_config.json", resolved);
  double peak = 0.0;
  for (double v : tr.sway.values) peak = std::max(peak, std::abs(v));
  return {{"config", resolved},
          {"output", output.string()},
          {"ticks", tr.sway_samples.size()},
          {"peak_abs_delta_sigma_z", peak}};
}

json panorama(const json& config) {
  Config c(config);
  const fs::path input = c.required<std::string>("input");
  const fs::path output = c.required<std::string>("output");
  PanoramaOptions opt;
  opt.queue_capacity = c.count("queue_capacity", kDefaultQueueCapacity);
  opt.geometry = geometry_options(c);
  const auto tick_arg = c.get<long long>("tick", -1);
  json resolved = c.finish();

  Trajectory traj = trajectory_from_trial(load_trial(input, true));
  if (traj.clouds.empty()) fail(ErrorCode::InvalidInput, "trial " + traj.id + " has no point clouds");
  if (traj.states.empty()) fail(ErrorCode::InsufficientData, "trial " + traj.id + " has no states");
  const std::size_t tick = tick_arg < 0 ? traj.states.size() - 1 : static_cast<std::size_t>(tick_arg);
  if (tick >= traj.states.size()) fail(ErrorCode::InvalidInput, "tick beyond the end of the trial");

  const DepthPanorama p = panorama_at(traj, tick, opt);
  make_dir(output);
  save_panorama(output / "panorama.pano", p);
  save_panorama_pgm(output / "panorama.pgm", p);
  write_json(output / "run_config.json", resolved);
  return {{"config", resolved}, {"output", output.string()}, {"tick", tick}, {"coverage", panorama_coverage(p)}};
}

}  // namespace swayrisk::pipeline
