#pragma once

// Perturbation detection on per-tick metric derivatives (delta sigma_z or
// delta theta_z) with a MAD noise scale and a refractory period.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "swayrisk/core.hpp"
#include "swayrisk/simgait.hpp"
#include "swayrisk/sway.hpp"

namespace swayrisk {

enum class Metric { SwayArea, TorsoAngle };

const char* to_string(Metric m);

/// Time-stamped scalar series, one value per tick.
struct MetricSeries {
  Metric metric = Metric::SwayArea;
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
};

struct PerturbationEvent {
  Timestamp onset;
  double peak_value = 0.0;  // |value| at the peak, metric units per second
  Timestamp peak_time;
  Metric metric = Metric::SwayArea;
};

struct DetectorOptions {
  double threshold_mult = 15.0;
  double refractory = 2.5;  // s
  /// Span after a true onset that counts as that perturbation's response.
  double response_window = 2.5;
  /// Span after a true onset excluded from the noise estimate.
  double exclusion_span = 5.0;
};

inline constexpr std::size_t kMinNoiseTicks = 100;
inline constexpr double kMadToSigma = 1.4826;

/// 1.4826 * MAD of |values| over ticks outside every exclusion window.
double noise_floor(const MetricSeries& series, std::span<const TimeWindow> exclusions = {});

std::vector<PerturbationEvent> detect_events(const MetricSeries& series, const DetectorOptions& options = {});

struct PeakToNoise {
  std::vector<double> ratios;  // one per true onset
  double mean = 0.0;
  double noise = 0.0;
  /// Peak over the mean |value| outside exclusions.
  std::vector<double> baseline_ratios;
  double mean_baseline_ratio = 0.0;
};

PeakToNoise peak_to_noise(const MetricSeries& series, std::span<const PerturbationSpec> truth,
                          const DetectorOptions& options = {});

struct TrialDetection {
  std::string trial_id;
  std::vector<PerturbationEvent> events;
  std::vector<PerturbationSpec> truth;
  std::vector<bool> truth_detected;
  std::vector<double> latencies;  // per detected truth
  std::size_t false_positives = 0;
  double duration = 0.0;                 // s
  std::optional<PeakToNoise> peak_ratio;  // absent without truth or with a zero noise floor
};

struct MagnitudeStats {
  double magnitude = 0.0;
  std::size_t true_events = 0;
  std::size_t detected = 0;
  std::optional<double> detection_rate;
  std::optional<double> mean_peak_to_noise;
};

struct DetectionReport {
  Metric metric = Metric::SwayArea;
  DetectorOptions options;
  std::vector<TrialDetection> trials;
  std::size_t true_events = 0;
  std::size_t detected_events = 0;
  std::optional<double> detection_rate;  // undefined without true events
  double false_positives_per_minute = 0.0;
  std::optional<double> mean_peak_to_noise;
  std::optional<double> mean_peak_to_baseline;
  std::optional<double> mean_detection_latency;
  std::vector<MagnitudeStats> by_magnitude;
};

struct MetricTraces {
  MetricSeries sway;   // delta sigma_z
  MetricSeries angle;  // delta theta_z
  std::vector<SwaySample> sway_samples;
  std::vector<TiltSample> tilt_samples;
};

MetricTraces compute_traces(std::span<const StateVector> states, const SwayOptions& sway = {});

TrialDetection evaluate_trial(const std::string& id, const MetricSeries& series,
                              std::span<const PerturbationSpec> truth, const DetectorOptions& options = {});

DetectionReport summarize(Metric metric, std::vector<TrialDetection> trials, const DetectorOptions& options);

struct MetricComparison {
  DetectionReport sway;
  DetectionReport angle;
};

MetricComparison compare_metrics(std::span<const SimTrial> trials, const DetectorOptions& options = {},
                                 const SwayOptions& sway = {}, std::size_t jobs = 1);

nlohmann::json to_json(const DetectionReport& report);

/// Per-tick CSV: tick,sigma_z,delta_sigma_z,theta_z,delta_theta_z,event_flag.
/// event_flag bit 0 marks a sway-area event onset, bit 1 a torso-angle onset.
void write_trace_csv(std::ostream& os, const MetricTraces& traces, std::span<const PerturbationEvent> sway_events,
                     std::span<const PerturbationEvent> angle_events, double dt = kTickSeconds);

}  // namespace swayrisk
