#pragma once

// 20 Hz resampling, 200-tick training windows, the curvature filter, and the
// on-disk formats: state CSV, trial directories and the exchange directory
// shared with the predictor.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "swayrisk/core.hpp"
#include "swayrisk/panorama.hpp"
#include "swayrisk/scene.hpp"
#include "swayrisk/simgait.hpp"

namespace swayrisk {

inline constexpr double kMaxResampleGap = 0.25;  // s
inline constexpr std::size_t kInputTicks = 150;
inline constexpr std::size_t kLabelTicks = 50;
inline constexpr std::size_t kDefaultStride = 20;
inline constexpr std::size_t kCurvatureSmoothingTaps = 21;
inline constexpr double kMinCurvature = 1e-6;       // 1/m, below this a tick counts as straight
inline constexpr double kCurvatureFilterRadius = 2.0;  // m

struct ResampleOptions {
  double dt = kTickSeconds;
  double max_gap = kMaxResampleGap;
};

/// Zero-order hold onto t = k * dt for every grid point inside the raw span.
/// Orientation takes the latest sample; velocities are recomputed on the grid.
std::vector<StateVector> resample_20hz(std::span<const StateVector> raw, const ResampleOptions& options = {});

/// One walk on the tick grid. Clouds are optional and, when present, aligned
/// 1:1 with states; panoramas are rasterized from them on demand.
struct Trajectory {
  std::string id;
  ScenarioKind scenario = ScenarioKind::Treadmill;
  std::vector<StateVector> states;
  std::vector<PointCloud> clouds;
};

Trajectory trajectory_from_trial(SimTrial trial);

/// Throws InvalidInput unless timestamps sit on t0 + k * dt.
void validate_tick_grid(std::span<const StateVector> states, double dt = kTickSeconds);

struct PanoramaOptions {
  PanoramaGeometry geometry;
  std::size_t queue_capacity = 40;
};

/// Panorama at `tick` from the clouds of ticks (tick - capacity, tick], in
/// the torso frame of that tick.
DepthPanorama panorama_at(const Trajectory& traj, std::size_t tick, const PanoramaOptions& options = {});

struct WindowOptions {
  std::size_t input_ticks = kInputTicks;
  std::size_t label_ticks = kLabelTicks;
  std::size_t stride = kDefaultStride;

  std::size_t length() const { return input_ticks + label_ticks; }
};

struct SequenceWindow {
  std::string source_id;
  ScenarioKind scenario = ScenarioKind::Treadmill;
  std::size_t start_tick = 0;
  std::vector<StateVector> input_states;
  std::vector<StateVector> label_states;
};

/// floor((N - length) / stride) + 1 windows, none when N < length.
std::size_t window_count(std::size_t ticks, const WindowOptions& options = {});

std::vector<SequenceWindow> window_sequences(const Trajectory& traj, const WindowOptions& options = {});

/// Radius of the tightest turn after a 21-tap moving average. +inf for
/// straight paths. Needs at least taps + 2 points.
double min_turning_radius(std::span<const Vec2> positions, std::size_t smoothing_taps = kCurvatureSmoothingTaps);

std::vector<Vec2> ground_track(std::span<const StateVector> states);

struct CurvatureFilter {
  bool enabled = false;
  double max_radius = kCurvatureFilterRadius;

  /// True when the window's path turns tighter than max_radius (or the filter is off).
  bool accepts(const SequenceWindow& window) const;
};

// ---- state CSV --------------------------------------------------------------

/// Header t,<24 channel names>; one row per tick.
void write_states_csv(std::ostream& os, std::span<const StateVector> states);
std::vector<StateVector> read_states_csv(std::istream& is);

// ---- trial directories ------------------------------------------------------
//
//   trial.json   id, scenario, dt, tick count, ground-truth perturbations
//   states.csv   write_states_csv
//   clouds.bin   "CLDS", u32 version, u32 count, then per cloud:
//                f64 t, f64 position[3], f64 quat wxyz[4], u32 n, f32 xyz[n][3]

void save_trial(const std::filesystem::path& dir, const SimTrial& trial);
SimTrial load_trial(const std::filesystem::path& dir, bool with_clouds = true);
/// Trial directories below `root` (any directory holding trial.json), sorted by path.
std::vector<std::filesystem::path> find_trials(const std::filesystem::path& root);

nlohmann::json to_json(const PerturbationSpec& p);
PerturbationSpec perturbation_from_json(const nlohmann::json& j);

// ---- exchange directory -----------------------------------------------------

inline constexpr int kExchangeSchemaVersion = 1;

enum class ExchangeKind { TrainingSet, Predictions };

const char* to_string(ExchangeKind kind);

struct WindowRef {
  std::string source_id;
  ScenarioKind scenario = ScenarioKind::Treadmill;
  std::size_t start_tick = 0;

  friend bool operator==(const WindowRef&, const WindowRef&) = default;
};

struct ExchangeManifest {
  int schema_version = kExchangeSchemaVersion;
  ExchangeKind kind = ExchangeKind::TrainingSet;
  std::string variant;  // predictions only
  std::vector<std::string> channels;
  std::size_t input_ticks = kInputTicks;
  std::size_t label_ticks = kLabelTicks;
  double dt = kTickSeconds;
  bool has_panoramas = false;
  PanoramaGeometry geometry;
  std::vector<WindowRef> windows;

  /// Ticks stored per window: input + label for training sets, label only for predictions.
  std::size_t ticks_per_window() const;
  std::size_t pano_cells() const { return std::size_t{geometry.rows} * geometry.cols; }
};

nlohmann::json to_json(const ExchangeManifest& m);
ExchangeManifest manifest_from_json(const nlohmann::json& j);

/// Streams windows into manifest.json, states.bin and (optionally) panos.bin.
/// The manifest is written by finish(); a directory without one is incomplete.
class ExchangeWriter {
 public:
  ExchangeWriter(const std::filesystem::path& dir, ExchangeManifest header);
  ~ExchangeWriter();
  ExchangeWriter(const ExchangeWriter&) = delete;
  ExchangeWriter& operator=(const ExchangeWriter&) = delete;

  /// `states` holds ticks_per_window() states. `panorama` is called once per
  /// tick (0-based within the window) when the manifest has panoramas.
  void append(const WindowRef& ref, std::span<const StateVector> states,
              const std::function<DepthPanorama(std::size_t)>& panorama = {});
  /// Same, with ticks_per_window() x 24 raw values.
  void append_values(const WindowRef& ref, std::span<const float> values,
                     const std::function<DepthPanorama(std::size_t)>& panorama = {});
  void finish();

  std::size_t windows_written() const { return manifest_.windows.size(); }

 private:
  std::filesystem::path dir_;
  ExchangeManifest manifest_;
  std::ofstream states_;
  std::ofstream panos_;
  bool finished_ = false;
};

/// Shape limits an importer enforces. Empty fields accept what the manifest says.
struct ExchangeExpectations {
  std::optional<ExchangeKind> kind;
  std::optional<std::size_t> label_ticks;
  std::optional<std::size_t> input_ticks;
  std::optional<std::uint16_t> pano_rows;
  std::optional<std::uint16_t> pano_cols;
};

/// Validated view of an exchange directory. States are loaded eagerly and
/// checked for NaN; panoramas are read per tick from panos.bin.
class ExchangeSet {
 public:
  static ExchangeSet open(const std::filesystem::path& dir, const ExchangeExpectations& expect = {});

  const ExchangeManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::size_t window_count() const { return manifest_.windows.size(); }

  /// Raw f32 values of one window, ticks_per_window() x 24.
  std::span<const float> window_values(std::size_t window) const;
  std::vector<StateVector> window_states(std::size_t window) const;
  /// Label part only (the whole window for predictions).
  std::vector<StateVector> label_states(std::size_t window) const;
  DepthPanorama panorama(std::size_t window, std::size_t tick) const;

 private:
  std::filesystem::path dir_;
  ExchangeManifest manifest_;
  std::vector<float> states_;
};

void export_training_set(const std::filesystem::path& dir, std::span<const SequenceWindow> windows,
                         const WindowOptions& options = {});

ExchangeSet import_predictions(const std::filesystem::path& dir, const ExchangeExpectations& expect = {});

/// Prediction directory whose payload is the label part of `truth` (the
/// identity predictor used to exercise eval end to end).
void write_identity_predictions(const ExchangeSet& truth, const std::filesystem::path& dir,
                                const std::string& variant = "identity");

struct DatasetOptions {
  WindowOptions windows;
  CurvatureFilter filter;
  bool with_panoramas = false;
  PanoramaOptions panorama;
  std::size_t jobs = 1;
};

struct DatasetSummary {
  std::size_t trajectories = 0;
  std::size_t windows_total = 0;  // before the curvature filter
  std::size_t windows_kept = 0;
};

/// Windows every trajectory, applies the filter and streams the kept windows
/// (in trajectory order) into a training-set exchange directory. Panoramas
/// are rasterized per tick and cached while consecutive windows overlap.
DatasetSummary build_exchange(const std::filesystem::path& dir, std::span<const Trajectory> trajectories,
                              const DatasetOptions& options = {});

// ---- split files ------------------------------------------------------------

/// {"train": [ids...], "test": [ids...]}
struct SplitFile {
  std::vector<std::string> train;
  std::vector<std::string> test;

  bool contains(const std::string& split, const std::string& id) const;
};

SplitFile load_split(const std::filesystem::path& path);

}  // namespace swayrisk
