#include "swayrisk/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "swayrisk/error.hpp"
#include "swayrisk/parallel.hpp"

namespace swayrisk {

namespace {

double median_in_place(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid));
  return 0.5 * (lower + upper);
}

bool excluded(double t, std::span<const TimeWindow> exclusions) {
  return std::any_of(exclusions.begin(), exclusions.end(),
                     [t](const TimeWindow& w) { return t >= w.start && t < w.end; });
}

void check_series(const MetricSeries& series) {
  if (series.times.size() != series.values.size()) fail(ErrorCode::InvalidInput, "series times and values differ in length");
}

std::vector<TimeWindow> response_exclusions(std::span<const PerturbationSpec> truth, double span) {
  std::vector<TimeWindow> out;
  for (const auto& p : truth) out.push_back({p.onset.seconds, p.onset.seconds + span});
  return out;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

const char* to_string(Metric m) {
  switch (m) {
    case Metric::SwayArea: return "sway_area";
    case Metric::TorsoAngle: return "torso_angle";
  }
  return "unknown";
}

double noise_floor(const MetricSeries& series, std::span<const TimeWindow> exclusions) {
  check_series(series);
  std::vector<double> magnitudes;
  magnitudes.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!excluded(series.times[i], exclusions)) magnitudes.push_back(std::abs(series.values[i]));
  }
  if (magnitudes.size() < kMinNoiseTicks) {
    std::ostringstream os;
    os << "noise floor needs " << kMinNoiseTicks << " unexcluded ticks, got " << magnitudes.size();
    fail(ErrorCode::InsufficientData, os.str());
  }
  const double center = median_in_place(magnitudes);
  for (double& m : magnitudes) m = std::abs(m - center);
  return kMadToSigma * median_in_place(magnitudes);
}

std::vector<PerturbationEvent> detect_events(const MetricSeries& series, const DetectorOptions& options) {
  const double threshold = options.threshold_mult * noise_floor(series);
  std::vector<PerturbationEvent> events;
  double next_allowed = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double t = series.times[i];
    if (t < next_allowed || !(std::abs(series.values[i]) > threshold)) continue;
    PerturbationEvent e;
    e.metric = series.metric;
    e.onset = Timestamp{t};
    e.peak_time = Timestamp{t};
    e.peak_value = std::abs(series.values[i]);
    for (std::size_t j = i + 1; j < series.size() && series.times[j] < t + options.refractory; ++j) {
      if (std::abs(series.values[j]) > e.peak_value) {
        e.peak_value = std::abs(series.values[j]);
        e.peak_time = Timestamp{series.times[j]};
      }
    }
    events.push_back(e);
    next_allowed = t + options.refractory;
  }
  return events;
}

PeakToNoise peak_to_noise(const MetricSeries& series, std::span<const PerturbationSpec> truth,
                          const DetectorOptions& options) {
  check_series(series);
  const auto exclusions = response_exclusions(truth, options.exclusion_span);
  PeakToNoise out;
  out.noise = noise_floor(series, exclusions);
  if (!(out.noise > 0.0)) fail(ErrorCode::UndefinedRatio, "noise floor is zero; peak-to-noise ratio is undefined");

  double baseline_sum = 0.0;
  std::size_t baseline_n = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (excluded(series.times[i], exclusions)) continue;
    baseline_sum += std::abs(series.values[i]);
    ++baseline_n;
  }
  const double baseline = baseline_sum / double(baseline_n);

  for (const auto& p : truth) {
    double peak = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const double t = series.times[i];
      if (t >= p.onset.seconds && t <= p.onset.seconds + options.response_window) {
        peak = std::max(peak, std::abs(series.values[i]));
      }
    }
    out.ratios.push_back(peak / out.noise);
    out.baseline_ratios.push_back(baseline > 0.0 ? peak / baseline : std::numeric_limits<double>::infinity());
  }
  out.mean = mean_of(out.ratios).value_or(0.0);
  out.mean_baseline_ratio = mean_of(out.baseline_ratios).value_or(0.0);
  return out;
}

MetricTraces compute_traces(std::span<const StateVector> states, const SwayOptions& sway) {
  std::vector<Pose> poses;
  poses.reserve(states.size());
  for (const auto& s : states) poses.push_back({s.timestamp, s.position, s.orientation});

  MetricTraces traces;
  const auto projections = project_stream(poses);
  traces.sway_samples = sway_series(projections, sway);
  traces.tilt_samples = torso_tilt_series(poses, sway.dt);

  traces.sway.metric = Metric::SwayArea;
  for (const auto& s : traces.sway_samples) {
    traces.sway.times.push_back(s.timestamp.seconds);
    traces.sway.values.push_back(s.delta_sigma_z);
  }
  traces.angle.metric = Metric::TorsoAngle;
  for (const auto& s : traces.tilt_samples) {
    traces.angle.times.push_back(s.timestamp.seconds);
    traces.angle.values.push_back(s.delta_theta_z);
  }
  return traces;
}

TrialDetection evaluate_trial(const std::string& id, const MetricSeries& series,
                              std::span<const PerturbationSpec> truth, const DetectorOptions& options) {
  TrialDetection out;
  out.trial_id = id;
  out.truth.assign(truth.begin(), truth.end());
  std::sort(out.truth.begin(), out.truth.end(), [](const auto& a, const auto& b) { return a.onset < b.onset; });
  out.events = detect_events(series, options);
  out.truth_detected.assign(out.truth.size(), false);
  if (!series.times.empty()) out.duration = series.times.back() - series.times.front() + kTickSeconds;

  // An event is a detection when it opens inside a perturbation's response
  // window. Events later in that perturbation's recovery (the window
  // draining the perturbed samples) are attributed to it, not counted as
  // false positives.
  for (const auto& e : out.events) {
    bool attributed = false;
    for (std::size_t k = 0; k < out.truth.size(); ++k) {
      const double onset = out.truth[k].onset.seconds;
      const double t = e.onset.seconds;
      if (t < onset || t > onset + options.exclusion_span) continue;
      attributed = true;
      if (!out.truth_detected[k] && t <= onset + options.response_window) {
        out.truth_detected[k] = true;
        out.latencies.push_back(t - onset);
      }
      break;
    }
    if (!attributed) ++out.false_positives;
  }

  if (!out.truth.empty()) {
    try {
      out.peak_ratio = peak_to_noise(series, out.truth, options);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::UndefinedRatio) throw;
    }
  }
  return out;
}

DetectionReport summarize(Metric metric, std::vector<TrialDetection> trials, const DetectorOptions& options) {
  DetectionReport r;
  r.metric = metric;
  r.options = options;
  double minutes = 0.0;
  std::size_t false_positives = 0;
  std::vector<double> ratios, baseline_ratios, latencies;
  std::map<double, MagnitudeStats> by_mag;
  std::map<double, std::vector<double>> ratios_by_mag;

  for (const auto& t : trials) {
    minutes += t.duration / 60.0;
    false_positives += t.false_positives;
    latencies.insert(latencies.end(), t.latencies.begin(), t.latencies.end());
    for (std::size_t k = 0; k < t.truth.size(); ++k) {
      auto& m = by_mag[t.truth[k].magnitude];
      m.magnitude = t.truth[k].magnitude;
      ++m.true_events;
      ++r.true_events;
      if (t.truth_detected[k]) {
        ++m.detected;
        ++r.detected_events;
      }
      if (t.peak_ratio) {
        ratios.push_back(t.peak_ratio->ratios[k]);
        baseline_ratios.push_back(t.peak_ratio->baseline_ratios[k]);
        ratios_by_mag[t.truth[k].magnitude].push_back(t.peak_ratio->ratios[k]);
      }
    }
  }
  if (r.true_events > 0) r.detection_rate = double(r.detected_events) / double(r.true_events);
  r.false_positives_per_minute = minutes > 0.0 ? double(false_positives) / minutes : 0.0;
  r.mean_peak_to_noise = mean_of(ratios);
  r.mean_peak_to_baseline = mean_of(baseline_ratios);
  r.mean_detection_latency = mean_of(latencies);
  for (auto& [mag, stats] : by_mag) {
    stats.detection_rate = double(stats.detected) / double(stats.true_events);
    stats.mean_peak_to_noise = mean_of(ratios_by_mag[mag]);
    r.by_magnitude.push_back(stats);
  }
  r.trials = std::move(trials);
  return r;
}

MetricComparison compare_metrics(std::span<const SimTrial> trials, const DetectorOptions& options,
                                 const SwayOptions& sway, std::size_t jobs) {
  if (trials.empty()) fail(ErrorCode::InvalidInput, "metric comparison needs at least one trial");
  std::vector<TrialDetection> sway_trials(trials.size()), angle_trials(trials.size());
  parallel_for(trials.size(), jobs, [&](std::size_t i) {
    const MetricTraces traces = compute_traces(trials[i].states, sway);
    sway_trials[i] = evaluate_trial(trials[i].id, traces.sway, trials[i].truth, options);
    angle_trials[i] = evaluate_trial(trials[i].id, traces.angle, trials[i].truth, options);
  });
  return {summarize(Metric::SwayArea, std::move(sway_trials), options),
          summarize(Metric::TorsoAngle, std::move(angle_trials), options)};
}

nlohmann::json to_json(const DetectionReport& r) {
  nlohmann::json j;
  j["metric"] = to_string(r.metric);
  j["threshold_mult"] = r.options.threshold_mult;
  j["refractory_s"] = r.options.refractory;
  j["n_trials"] = r.trials.size();
  j["true_events"] = r.true_events;
  j["detected_events"] = r.detected_events;
  j["detection_rate"] = optional_json(r.detection_rate);
  j["false_positives_per_minute"] = r.false_positives_per_minute;
  j["mean_peak_to_noise"] = optional_json(r.mean_peak_to_noise);
  j["mean_peak_to_baseline"] = optional_json(r.mean_peak_to_baseline);
  j["mean_detection_latency_s"] = optional_json(r.mean_detection_latency);
  j["by_magnitude"] = nlohmann::json::array();
  for (const auto& m : r.by_magnitude) {
    j["by_magnitude"].push_back({{"magnitude", m.magnitude},
                                 {"true_events", m.true_events},
                                 {"detected", m.detected},
                                 {"detection_rate", optional_json(m.detection_rate)},
                                 {"mean_peak_to_noise", optional_json(m.mean_peak_to_noise)}});
  }
  j["trials"] = nlohmann::json::array();
  for (const auto& t : r.trials) {
    nlohmann::json jt;
    jt["id"] = t.trial_id;
    jt["duration_s"] = t.duration;
    jt["false_positives"] = t.false_positives;
    jt["events"] = nlohmann::json::array();
    for (const auto& e : t.events) {
      jt["events"].push_back({{"onset", e.onset.seconds}, {"peak_time", e.peak_time.seconds}, {"peak_value", e.peak_value}});
    }
    jt["truth"] = nlohmann::json::array();
    for (std::size_t k = 0; k < t.truth.size(); ++k) {
      nlohmann::json jp = {{"onset", t.truth[k].onset.seconds},
                           {"direction", to_string(t.truth[k].direction)},
                           {"magnitude", t.truth[k].magnitude},
                           {"detected", bool(t.truth_detected[k])}};
      if (t.peak_ratio) jp["peak_to_noise"] = t.peak_ratio->ratios[k];
      jt["truth"].push_back(jp);
    }
    if (t.peak_ratio) jt["noise_floor"] = t.peak_ratio->noise;
    j["trials"].push_back(jt);
  }
  return j;
}

void write_trace_csv(std::ostream& os, const MetricTraces& traces, std::span<const PerturbationEvent> sway_events,
                     std::span<const PerturbationEvent> angle_events, double dt) {
  struct Row {
    std::optional<double> sigma, dsigma, theta, dtheta;
    int flag = 0;
  };
  std::map<long, Row> rows;
  auto tick = [dt](double t) { return std::lround(t / dt); };
  for (const auto& s : traces.sway_samples) {
    auto& r = rows[tick(s.timestamp.seconds)];
    r.sigma = s.sigma_z;
    r.dsigma = s.delta_sigma_z;
  }
  for (const auto& s : traces.tilt_samples) {
    auto& r = rows[tick(s.timestamp.seconds)];
    r.theta = s.theta_z;
    r.dtheta = s.delta_theta_z;
  }
  for (const auto& e : sway_events) rows[tick(e.onset.seconds)].flag |= 1;
  for (const auto& e : angle_events) rows[tick(e.onset.seconds)].flag |= 2;

  auto field = [&os](const std::optional<double>& v) {
    if (v) os << *v;
  };
  os << "tick,sigma_z,delta_sigma_z,theta_z,delta_theta_z,event_flag\n";
  os.precision(10);
  for (const auto& [k, r] : rows) {
    os << k << ',';
    field(r.sigma);
    os << ',';
    field(r.dsigma);
    os << ',';
    field(r.theta);
    os << ',';
    field(r.dtheta);
    os << ',' << r.flag << '\n';
  }
}

}  // namespace swayrisk
