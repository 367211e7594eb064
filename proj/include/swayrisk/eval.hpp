#pragma once

// Prediction scoring: per-tick losses, horizon curves grouped by scenario and
// model variant, CSV and SVG output.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "swayrisk/core.hpp"
#include "swayrisk/dataset.hpp"
#include "swayrisk/panorama.hpp"

namespace swayrisk {

/// Euclidean distance per aligned tick.
std::vector<double> traj_loss(std::span<const Vec3> pred, std::span<const Vec3> truth);

/// |pred - truth| per tick.
std::vector<double> area_loss(std::span<const double> pred, std::span<const double> truth);

/// Mean over cells of (1 - I / (2 max I)) * |pred - I|, I the truth grid.
double pano_loss(std::span<const float> pred, std::span<const float> truth);
double pano_loss(const DepthPanorama& pred, const DepthPanorama& truth);

/// Running mean: out[k] = mean(values[0..k]). Turns per-tick distance into ADE.
std::vector<double> cumulative_mean(std::span<const double> values);

inline constexpr const char* kAllScenarios = "all";

/// Per-tick losses of one predicted window, keyed by metric name:
/// position, position_ade, velocity, sway_area and (with panoramas) panorama.
struct WindowScore {
  WindowRef ref;
  std::string variant;
  std::map<std::string, std::vector<double>> metrics;
};

/// `pred` and `truth` are label_ticks x 24 raw values.
std::map<std::string, std::vector<double>> score_states(std::span<const float> pred, std::span<const float> truth);

struct HorizonCurve {
  std::string scenario;
  std::string variant;
  std::string metric;
  double dt = kTickSeconds;
  std::vector<double> mean;  // index k is horizon (k + 1) * dt
  std::vector<double> std;   // population standard deviation
  std::size_t n = 0;
};

/// Mean and std per horizon tick for every (scenario, variant, metric) group,
/// plus an "all" scenario. Sorted by scenario, variant, metric.
std::vector<HorizonCurve> horizon_report(std::span<const WindowScore> scores, double dt = kTickSeconds);

/// scenario,variant,metric,horizon_s,mean,std,n
void write_horizon_csv(std::ostream& os, std::span<const HorizonCurve> curves);

/// Line chart of mean curves (one line per entry) with a +-std band.
void write_horizon_svg(std::ostream& os, std::span<const HorizonCurve> curves, const std::string& title);

struct EvalOptions {
  bool panoramas = true;  // score panoramas when both sides carry them
  std::size_t jobs = 1;
};

/// Scores each prediction set against the label ticks of `truth`. Variants
/// must be distinct and every prediction set must list the truth windows in order.
std::vector<WindowScore> evaluate_predictions(const ExchangeSet& truth, std::span<const ExchangeSet> predictions,
                                              const EvalOptions& options = {});

struct EvalOutputs {
  std::vector<std::filesystem::path> files;
};

/// horizon.csv, curves/<scenario>__<variant>__<metric>.csv and
/// plots/<scenario>__<metric>.svg under `dir`.
EvalOutputs write_eval_outputs(const std::filesystem::path& dir, std::span<const HorizonCurve> curves);

}  // namespace swayrisk
