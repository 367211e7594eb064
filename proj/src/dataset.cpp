#include "swayrisk/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "swayrisk/binary_io.hpp"
#include "swayrisk/error.hpp"
#include "swayrisk/parallel.hpp"

namespace swayrisk {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGridTolerance = 1e-9;

std::string fmt_seconds(double t) {
  std::ostringstream os;
  os << std::setprecision(6) << t;
  return os.str();
}

}  // namespace

std::vector<StateVector> resample_20hz(std::span<const StateVector> raw, const ResampleOptions& options) {
  if (!(options.dt > 0.0)) fail(ErrorCode::InvalidInput, "resample dt must be positive");
  if (raw.empty()) fail(ErrorCode::InsufficientData, "resample needs at least one sample");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double t = raw[i].timestamp.seconds;
    if (!std::isfinite(t) || t < 0.0) fail(ErrorCode::InvalidInput, "raw timestamp " + fmt_seconds(t) + " is invalid");
    if (i == 0) continue;
    const double prev = raw[i - 1].timestamp.seconds;
    if (t < prev) fail(ErrorCode::InvalidInput, "raw timestamps go backwards at " + fmt_seconds(t));
    if (t - prev > options.max_gap + kGridTolerance) {
      fail(ErrorCode::Gap, "gap of " + fmt_seconds(t - prev) + " s in [" + fmt_seconds(prev) + ", " +
                               fmt_seconds(t) + "] exceeds " + fmt_seconds(options.max_gap) + " s");
    }
  }

  const double t_first = raw.front().timestamp.seconds;
  const double t_last = raw.back().timestamp.seconds;
  const auto k0 = static_cast<long long>(std::ceil(t_first / options.dt - kGridTolerance));
  const auto k1 = static_cast<long long>(std::floor(t_last / options.dt + kGridTolerance));

  std::vector<StateVector> out;
  if (k1 < k0) return out;
  out.reserve(static_cast<std::size_t>(k1 - k0 + 1));
  std::size_t idx = 0;
  for (long long k = k0; k <= k1; ++k) {
    const double t = static_cast<double>(k) * options.dt;
    while (idx + 1 < raw.size() && raw[idx + 1].timestamp.seconds <= t + kGridTolerance) ++idx;
    StateVector s = raw[idx];
    s.timestamp = Timestamp{t};
    out.push_back(s);
  }
  fill_velocities(out, options.dt);
  return out;
}

Trajectory trajectory_from_trial(SimTrial trial) {
  Trajectory t;
  t.id = std::move(trial.id);
  t.scenario = trial.scenario;
  t.states = std::move(trial.states);
  t.clouds = std::move(trial.clouds);
  return t;
}

void validate_tick_grid(std::span<const StateVector> states, double dt) {
  if (states.empty()) return;
  const double t0 = states.front().timestamp.seconds;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double expected = t0 + static_cast<double>(k) * dt;
    if (std::abs(states[k].timestamp.seconds - expected) > 1e-6) {
      fail(ErrorCode::InvalidInput, "tick " + std::to_string(k) + " at t=" + fmt_seconds(states[k].timestamp.seconds) +
                                        " is off the " + fmt_seconds(dt) + " s grid");
    }
  }
}

DepthPanorama panorama_at(const Trajectory& traj, std::size_t tick, const PanoramaOptions& options) {
  if (tick >= traj.states.size()) fail(ErrorCode::InvalidInput, "panorama tick out of range");
  const StateVector& s = traj.states[tick];
  const Pose torso{s.timestamp, s.position, s.orientation};
  if (traj.clouds.empty() || options.queue_capacity == 0) return DepthPanorama(options.geometry, torso);
  if (traj.clouds.size() != traj.states.size()) {
    fail(ErrorCode::Shape, "trajectory " + traj.id + " has " + std::to_string(traj.clouds.size()) + " clouds for " +
                               std::to_string(traj.states.size()) + " states");
  }
  const std::size_t first = tick + 1 >= options.queue_capacity ? tick + 1 - options.queue_capacity : 0;
  return build_panorama(std::span(traj.clouds).subspan(first, tick + 1 - first), torso, options.geometry);
}

std::size_t window_count(std::size_t ticks, const WindowOptions& options) {
  if (options.stride == 0) fail(ErrorCode::InvalidInput, "window stride must be positive");
  const std::size_t len = options.length();
  if (len == 0 || ticks < len) return 0;
  return (ticks - len) / options.stride + 1;
}

std::vector<SequenceWindow> window_sequences(const Trajectory& traj, const WindowOptions& options) {
  const std::size_t n = window_count(traj.states.size(), options);
  std::vector<SequenceWindow> out;
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t start = w * options.stride;
    const auto first = traj.states.begin() + static_cast<std::ptrdiff_t>(start);
    const auto split = first + static_cast<std::ptrdiff_t>(options.input_ticks);
    SequenceWindow win;
    win.source_id = traj.id;
    win.scenario = traj.scenario;
    win.start_tick = start;
    win.input_states.assign(first, split);
    win.label_states.assign(split, split + static_cast<std::ptrdiff_t>(options.label_ticks));
    out.push_back(std::move(win));
  }
  return out;
}

double min_turning_radius(std::span<const Vec2> positions, std::size_t smoothing_taps) {
  if (smoothing_taps == 0) fail(ErrorCode::InvalidInput, "smoothing needs at least one tap");
  if (positions.size() < smoothing_taps + 2) {
    fail(ErrorCode::InsufficientData, "turning radius needs at least " + std::to_string(smoothing_taps + 2) +
                                          " points, got " + std::to_string(positions.size()));
  }
  // Valid-only moving average: no edge padding, so no spurious end curvature.
  const std::size_t m = positions.size() - smoothing_taps + 1;
  std::vector<Vec2> smooth(m);
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < smoothing_taps; ++i) acc += positions[i];
  smooth[0] = acc / static_cast<double>(smoothing_taps);
  for (std::size_t i = 1; i < m; ++i) {
    acc += positions[i + smoothing_taps - 1] - positions[i - 1];
    smooth[i] = acc / static_cast<double>(smoothing_taps);
  }

  // kappa is invariant to the time scale, so unit tick spacing is enough.
  double kappa_max = 0.0;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const Vec2 v = 0.5 * (smooth[i + 1] - smooth[i - 1]);
    const Vec2 a = smooth[i + 1] - 2.0 * smooth[i] + smooth[i - 1];
    const double speed = v.norm();
    if (speed < 1e-9) continue;
    const double kappa = std::abs(v.x() * a.y() - v.y() * a.x()) / (speed * speed * speed);
    if (kappa >= kMinCurvature) kappa_max = std::max(kappa_max, kappa);
  }
  return kappa_max > 0.0 ? 1.0 / kappa_max : std::numeric_limits<double>::infinity();
}

std::vector<Vec2> ground_track(std::span<const StateVector> states) {
  std::vector<Vec2> out;
  out.reserve(states.size());
  for (const StateVector& s : states) out.emplace_back(s.position.x(), s.position.y());
  return out;
}

bool CurvatureFilter::accepts(const SequenceWindow& window) const {
  if (!enabled) return true;
  std::vector<Vec2> track = ground_track(window.input_states);
  const std::vector<Vec2> tail = ground_track(window.label_states);
  track.insert(track.end(), tail.begin(), tail.end());
  return min_turning_radius(track) < max_radius;
}

// ---- state CSV --------------------------------------------------------------

void write_states_csv(std::ostream& os, std::span<const StateVector> states) {
  os << "t";
  for (auto name : state_channel_names()) os << ',' << name;
  os << '\n';
  os << std::setprecision(17);
  for (const StateVector& s : states) {
    os << s.timestamp.seconds;
    for (double v : s.to_array()) os << ',' << v;
    os << '\n';
  }
}

namespace {

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    fail(ErrorCode::Schema, "line " + std::to_string(line) + ": cannot parse '" + std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<StateVector> read_states_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCode::Schema, "state CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  const auto& names = state_channel_names();
  bool ok = header.size() == kStateDim + 1 && header[0] == "t";
  for (std::size_t i = 0; ok && i < kStateDim; ++i) ok = header[i + 1] == names[i];
  if (!ok) fail(ErrorCode::Schema, "state CSV header does not match the 24-channel layout");

  std::vector<StateVector> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != kStateDim + 1) {
      fail(ErrorCode::Shape, "line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) + " fields");
    }
    std::array<double, kStateDim> values{};
    for (std::size_t i = 0; i < kStateDim; ++i) values[i] = parse_double(fields[i + 1], lineno);
    out.push_back(StateVector::from_array(Timestamp{parse_double(fields[0], lineno)}, values));
  }
  return out;
}

// ---- trial directories ------------------------------------------------------

namespace {

constexpr char kCloudMagic[4] = {'C', 'L', 'D', 'S'};
constexpr std::uint32_t kCloudVersion = 1;

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot read " + path.string());
  return is;
}

json read_json_file(const fs::path& path) {
  std::ifstream is = open_in(path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream os = open_out(path);
  os << j.dump(2) << '\n';
  if (!os) fail(ErrorCode::Io, "failed writing " + path.string());
}

void write_clouds(std::ostream& os, std::span<const PointCloud> clouds) {
  os.write(kCloudMagic, 4);
  binary::write_le<std::uint32_t>(os, kCloudVersion);
  binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clouds.size()));
  std::vector<float> xyz;
  for (const PointCloud& c : clouds) {
    binary::write_le<double>(os, c.timestamp.seconds);
    for (int i = 0; i < 3; ++i) binary::write_le<double>(os, c.source_pose.position[i]);
    const auto& q = c.source_pose.orientation;
    for (double v : {q.w(), q.x(), q.y(), q.z()}) binary::write_le<double>(os, v);
    binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.points.size()));
    xyz.clear();
    for (const Vec3& p : c.points) {
      xyz.push_back(static_cast<float>(p.x()));
      xyz.push_back(static_cast<float>(p.y()));
      xyz.push_back(static_cast<float>(p.z()));
    }
    binary::write_f32_block(os, xyz);
  }
}

std::vector<PointCloud> read_clouds(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kCloudMagic)) {
    fail(ErrorCode::Schema, "clouds.bin: bad magic");
  }
  if (binary::read_le<std::uint32_t>(is) != kCloudVersion) fail(ErrorCode::Schema, "clouds.bin: unsupported version");
  const auto count = binary::read_le<std::uint32_t>(is);
  std::vector<PointCloud> clouds(count);
  std::vector<float> xyz;
  for (PointCloud& c : clouds) {
    c.timestamp.seconds = binary::read_le<double>(is);
    c.source_pose.timestamp = c.timestamp;
    for (int i = 0; i < 3; ++i) c.source_pose.position[i] = binary::read_le<double>(is);
    double q[4];
    for (double& v : q) v = binary::read_le<double>(is);
    c.source_pose.orientation = UnitQuaternion::normalized(q[0], q[1], q[2], q[3]);
    const auto n = binary::read_le<std::uint32_t>(is);
    xyz.resize(std::size_t{n} * 3);
    binary::read_f32_block(is, xyz);
    c.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.points[i] = Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
  }
  return clouds;
}

}  // namespace

json to_json(const PerturbationSpec& p) {
  return {{"onset", p.onset.seconds},
          {"direction", to_string(p.direction)},
          {"magnitude", p.magnitude},
          {"duration", p.duration}};
}

PerturbationSpec perturbation_from_json(const json& j) {
  try {
    PerturbationSpec p;
    p.onset.seconds = j.at("onset").get<double>();
    p.direction = direction_from_string(j.at("direction").get<std::string>());
    p.magnitude = j.at("magnitude").get<double>();
    p.duration = j.value("duration", kPerturbationSeconds);
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, std::string("perturbation: ") + e.what());
  }
}

void save_trial(const fs::path& dir, const SimTrial& trial) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  json truth = json::array();
  for (const auto& p : trial.truth) truth.push_back(to_json(p));
  write_json_file(dir / "trial.json", {{"id", trial.id},
                                       {"scenario", to_string(trial.scenario)},
                                       {"dt", kTickSeconds},
                                       {"ticks", trial.states.size()},
                                       {"has_clouds", !trial.clouds.empty()},
                                       {"truth", truth}});
  {
    std::ofstream os = open_out(dir / "states.csv");
    write_states_csv(os, trial.states);
    if (!os) fail(ErrorCode::Io, "failed writing states.csv");
  }
  if (!trial.clouds.empty()) {
    std::ofstream os = open_out(dir / "clouds.bin");
    write_clouds(os, trial.clouds);
    if (!os) fail(ErrorCode::Io, "failed writing clouds.bin");
  }
}

SimTrial load_trial(const fs::path& dir, bool with_clouds) {
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, "trial directory " + dir.string() + " does not exist");
  const json meta = read_json_file(dir / "trial.json");
  SimTrial trial;
  try {
    trial.id = meta.at("id").get<std::string>();
    trial.scenario = scenario_from_string(meta.at("scenario").get<std::string>());
    for (const auto& p : meta.at("truth")) trial.truth.push_back(perturbation_from_json(p));
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, (dir / "trial.json").string() + ": " + e.what());
  }
  {
    std::ifstream is = open_in(dir / "states.csv");
    trial.states = read_states_csv(is);
  }
  if (with_clouds && fs::exists(dir / "clouds.bin")) {
    std::ifstream is = open_in(dir / "clouds.bin");
    trial.clouds = read_clouds(is);
  }
  return trial;
}

std::vector<fs::path> find_trials(const fs::path& root) {
  if (!fs::exists(root)) fail(ErrorCode::Io, "input " + root.string() + " does not exist");
  std::vector<fs::path> out;
  if (fs::exists(root / "trial.json")) out.push_back(root);
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == "trial.json" && entry.path().parent_path() != root) {
        out.push_back(entry.path().parent_path());
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---- exchange directory -----------------------------------------------------

const char* to_string(ExchangeKind kind) {
  return kind == ExchangeKind::TrainingSet ? "training_set" : "predictions";
}

std::size_t ExchangeManifest::ticks_per_window() const {
  return kind == ExchangeKind::TrainingSet ? input_ticks + label_ticks : label_ticks;
}

json to_json(const ExchangeManifest& m) {
  json windows = json::array();
  for (const auto& w : m.windows) {
    windows.push_back({{"source_id", w.source_id}, {"scenario", to_string(w.scenario)}, {"start_tick", w.start_tick}});
  }
  json j = {{"format", "swayrisk-exchange"},
            {"schema_version", m.schema_version},
            {"kind", to_string(m.kind)},
            {"state_dim", m.channels.size()},
            {"channels", m.channels},
            {"window_count", m.windows.size()},
            {"ticks_per_window", m.ticks_per_window()},
            {"input_ticks", m.input_ticks},
            {"label_ticks", m.label_ticks},
            {"dt", m.dt},
            {"has_panoramas", m.has_panoramas},
            {"pano_rows", m.geometry.rows},
            {"pano_cols", m.geometry.cols},
            {"pano_max_depth", m.geometry.max_depth},
            {"windows", windows}};
  if (m.kind == ExchangeKind::Predictions) j["variant"] = m.variant;
  return j;
}

ExchangeManifest manifest_from_json(const json& j) {
  ExchangeManifest m;
  try {
    if (j.value("format", std::string{}) != "swayrisk-exchange") fail(ErrorCode::Schema, "not an exchange manifest");
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kExchangeSchemaVersion) {
      fail(ErrorCode::Schema, "schema version " + std::to_string(m.schema_version) + ", expected " +
                                  std::to_string(kExchangeSchemaVersion));
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "training_set") {
      m.kind = ExchangeKind::TrainingSet;
    } else if (kind == "predictions") {
      m.kind = ExchangeKind::Predictions;
      m.variant = j.value("variant", std::string{});
    } else {
      fail(ErrorCode::Schema, "unknown exchange kind '" + kind + "'");
    }
    m.channels = j.at("channels").get<std::vector<std::string>>();
    m.input_ticks = j.at("input_ticks").get<std::size_t>();
    m.label_ticks = j.at("label_ticks").get<std::size_t>();
    m.dt = j.at("dt").get<double>();
    m.has_panoramas = j.at("has_panoramas").get<bool>();
    m.geometry.rows = j.at("pano_rows").get<std::uint16_t>();
    m.geometry.cols = j.at("pano_cols").get<std::uint16_t>();
    m.geometry.max_depth = j.value("pano_max_depth", 10.0f);
    for (const auto& w : j.at("windows")) {
      m.windows.push_back({w.at("source_id").get<std::string>(), scenario_from_string(w.at("scenario").get<std::string>()),
                           w.at("start_tick").get<std::size_t>()});
    }
    if (j.at("window_count").get<std::size_t>() != m.windows.size()) {
      fail(ErrorCode::Schema, "window_count disagrees with the window list");
    }
    if (j.at("state_dim").get<std::size_t>() != m.channels.size()) {
      fail(ErrorCode::Schema, "state_dim disagrees with the channel list");
    }
    if (j.at("ticks_per_window").get<std::size_t>() != m.ticks_per_window()) {
      fail(ErrorCode::Schema, "ticks_per_window disagrees with input/label ticks");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, std::string("manifest: ") + e.what());
  }
  const auto& names = state_channel_names();
  if (m.channels.size() != kStateDim || !std::equal(m.channels.begin(), m.channels.end(), names.begin())) {
    fail(ErrorCode::Schema, "manifest channels do not match the 24-channel state layout");
  }
  return m;
}

ExchangeWriter::ExchangeWriter(const fs::path& dir, ExchangeManifest header) : dir_(dir), manifest_(std::move(header)) {
  manifest_.windows.clear();
  if (manifest_.channels.empty()) manifest_.channels.assign(state_channel_names().begin(), state_channel_names().end());
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir_.string() + ": " + ec.message());
  // A stale manifest would describe the old payload until finish() runs.
  fs::remove(dir_ / "manifest.json", ec);
  fs::remove(dir_ / "panos.bin", ec);
  states_ = open_out(dir_ / "states.bin");
  if (manifest_.has_panoramas) panos_ = open_out(dir_ / "panos.bin");
}

ExchangeWriter::~ExchangeWriter() = default;

void ExchangeWriter::append(const WindowRef& ref, std::span<const StateVector> states,
                            const std::function<DepthPanorama(std::size_t)>& panorama) {
  std::vector<float> values;
  values.reserve(states.size() * kStateDim);
  for (const StateVector& s : states) {
    for (double v : s.to_array()) values.push_back(static_cast<float>(v));
  }
  append_values(ref, values, panorama);
}

void ExchangeWriter::append_values(const WindowRef& ref, std::span<const float> values,
                                   const std::function<DepthPanorama(std::size_t)>& panorama) {
  if (finished_) fail(ErrorCode::Internal, "exchange writer already finished");
  const std::size_t ticks = manifest_.ticks_per_window();
  if (values.size() != ticks * kStateDim) {
    fail(ErrorCode::Shape, "window has " + std::to_string(values.size() / kStateDim) + " ticks, expected " +
                               std::to_string(ticks));
  }
  binary::write_f32_block(states_, values);
  if (manifest_.has_panoramas) {
    if (!panorama) fail(ErrorCode::InvalidInput, "exchange set expects panoramas but none were supplied");
    for (std::size_t t = 0; t < ticks; ++t) {
      const DepthPanorama p = panorama(t);
      if (p.geometry().rows != manifest_.geometry.rows || p.geometry().cols != manifest_.geometry.cols) {
        fail(ErrorCode::Shape, "panorama geometry differs from the manifest");
      }
      binary::write_f32_block(panos_, p.data());
    }
  }
  if (!states_ || (manifest_.has_panoramas && !panos_)) fail(ErrorCode::Io, "write failed in " + dir_.string());
  manifest_.windows.push_back(ref);
}

void ExchangeWriter::finish() {
  if (finished_) return;
  states_.close();
  if (panos_.is_open()) panos_.close();
  if (states_.fail() || panos_.fail()) fail(ErrorCode::Io, "closing exchange payload in " + dir_.string());
  write_json_file(dir_ / "manifest.json", to_json(manifest_));
  finished_ = true;
}

ExchangeSet ExchangeSet::open(const fs::path& dir, const ExchangeExpectations& expect) {
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, "exchange directory " + dir.string() + " does not exist");
  if (!fs::exists(dir / "manifest.json")) fail(ErrorCode::Io, "missing manifest.json in " + dir.string());

  ExchangeSet set;
  set.dir_ = dir;
  set.manifest_ = manifest_from_json(read_json_file(dir / "manifest.json"));
  const ExchangeManifest& m = set.manifest_;

  if (expect.kind && *expect.kind != m.kind) {
    fail(ErrorCode::Schema, std::string("expected a ") + to_string(*expect.kind) + " directory, found " + to_string(m.kind));
  }
  auto check = [](const char* what, std::size_t got, std::optional<std::size_t> want) {
    if (want && got != *want) {
      fail(ErrorCode::Shape, std::string(what) + " is " + std::to_string(got) + ", expected " + std::to_string(*want));
    }
  };
  check("label_ticks", m.label_ticks, expect.label_ticks);
  check("input_ticks", m.input_ticks, expect.input_ticks);
  if (m.has_panoramas) {
    check("pano_rows", m.geometry.rows, expect.pano_rows);
    check("pano_cols", m.geometry.cols, expect.pano_cols);
  }

  const std::size_t ticks = m.ticks_per_window();
  const std::uintmax_t want_states = std::uintmax_t{m.windows.size()} * ticks * kStateDim * sizeof(float);
  const fs::path states_path = dir / "states.bin";
  if (!fs::exists(states_path)) fail(ErrorCode::Io, "missing states.bin in " + dir.string());
  if (fs::file_size(states_path) != want_states) {
    fail(ErrorCode::Shape, "states.bin holds " + std::to_string(fs::file_size(states_path)) + " bytes, manifest implies " +
                               std::to_string(want_states));
  }
  if (m.has_panoramas) {
    const fs::path panos_path = dir / "panos.bin";
    if (!fs::exists(panos_path)) fail(ErrorCode::Io, "missing panos.bin in " + dir.string());
    const std::uintmax_t want = std::uintmax_t{m.windows.size()} * ticks * m.pano_cells() * sizeof(float);
    if (fs::file_size(panos_path) != want) {
      fail(ErrorCode::Shape, "panos.bin holds " + std::to_string(fs::file_size(panos_path)) + " bytes, manifest implies " +
                                 std::to_string(want));
    }
  }

  set.states_.resize(m.windows.size() * ticks * kStateDim);
  {
    std::ifstream is = open_in(states_path);
    binary::read_f32_block(is, set.states_);
  }
  const auto& names = state_channel_names();
  for (std::size_t i = 0; i < set.states_.size(); ++i) {
    if (!std::isfinite(set.states_[i])) {
      const std::size_t w = i / (ticks * kStateDim);
      const std::size_t t = (i / kStateDim) % ticks;
      fail(ErrorCode::NanPayload, "non-finite state value in window " + std::to_string(w) + ", tick " +
                                      std::to_string(t) + ", channel " + std::string(names[i % kStateDim]));
    }
  }
  return set;
}

std::span<const float> ExchangeSet::window_values(std::size_t window) const {
  if (window >= window_count()) fail(ErrorCode::InvalidInput, "window index out of range");
  const std::size_t n = manifest_.ticks_per_window() * kStateDim;
  return std::span(states_).subspan(window * n, n);
}

std::vector<StateVector> ExchangeSet::window_states(std::size_t window) const {
  const auto values = window_values(window);
  const std::size_t ticks = manifest_.ticks_per_window();
  const std::size_t t0 = manifest_.windows[window].start_tick +
                         (manifest_.kind == ExchangeKind::Predictions ? manifest_.input_ticks : 0);
  std::vector<StateVector> out;
  out.reserve(ticks);
  for (std::size_t t = 0; t < ticks; ++t) {
    std::array<double, kStateDim> v{};
    for (std::size_t c = 0; c < kStateDim; ++c) v[c] = values[t * kStateDim + c];
    out.push_back(StateVector::from_array(Timestamp{static_cast<double>(t0 + t) * manifest_.dt}, v));
  }
  return out;
}

std::vector<StateVector> ExchangeSet::label_states(std::size_t window) const {
  std::vector<StateVector> all = window_states(window);
  if (manifest_.kind == ExchangeKind::TrainingSet) {
    all.erase(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(manifest_.input_ticks));
  }
  return all;
}

DepthPanorama ExchangeSet::panorama(std::size_t window, std::size_t tick) const {
  if (!manifest_.has_panoramas) fail(ErrorCode::InvalidInput, "exchange set has no panoramas");
  const std::size_t ticks = manifest_.ticks_per_window();
  if (window >= window_count() || tick >= ticks) fail(ErrorCode::InvalidInput, "panorama index out of range");
  std::ifstream is = open_in(dir_ / "panos.bin");
  const std::size_t cells = manifest_.pano_cells();
  is.seekg(static_cast<std::streamoff>((window * ticks + tick) * cells * sizeof(float)));
  DepthPanorama p(manifest_.geometry);
  binary::read_f32_block(is, p.data());
  for (float v : p.data()) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::NanPayload,
           "non-finite panorama depth in window " + std::to_string(window) + ", tick " + std::to_string(tick));
    }
  }
  return p;
}

void export_training_set(const fs::path& dir, std::span<const SequenceWindow> windows, const WindowOptions& options) {
  ExchangeManifest header;
  header.kind = ExchangeKind::TrainingSet;
  header.input_ticks = options.input_ticks;
  header.label_ticks = options.label_ticks;
  ExchangeWriter writer(dir, header);
  std::vector<StateVector> states;
  for (const SequenceWindow& w : windows) {
    if (w.input_states.size() != options.input_ticks || w.label_states.size() != options.label_ticks) {
      fail(ErrorCode::Shape, "window from " + w.source_id + " does not match the " + std::to_string(options.input_ticks) +
                                 "/" + std::to_string(options.label_ticks) + " split");
    }
    states = w.input_states;
    states.insert(states.end(), w.label_states.begin(), w.label_states.end());
    writer.append({w.source_id, w.scenario, w.start_tick}, states);
  }
  writer.finish();
}

ExchangeSet import_predictions(const fs::path& dir, const ExchangeExpectations& expect) {
  ExchangeExpectations e = expect;
  e.kind = ExchangeKind::Predictions;
  return ExchangeSet::open(dir, e);
}

void write_identity_predictions(const ExchangeSet& truth, const fs::path& dir, const std::string& variant) {
  const ExchangeManifest& tm = truth.manifest();
  if (tm.kind != ExchangeKind::TrainingSet) fail(ErrorCode::Schema, "identity predictions need a training set");
  ExchangeManifest header = tm;
  header.kind = ExchangeKind::Predictions;
  header.variant = variant;
  ExchangeWriter writer(dir, header);
  // Raw copy of the label floats: going through StateVector would re-normalize
  // the quaternion and could move the last bit.
  const std::size_t offset = tm.input_ticks * kStateDim;
  for (std::size_t w = 0; w < truth.window_count(); ++w) {
    const auto values = truth.window_values(w).subspan(offset);
    writer.append_values(tm.windows[w], values, [&](std::size_t t) { return truth.panorama(w, tm.input_ticks + t); });
  }
  writer.finish();
}

DatasetSummary build_exchange(const fs::path& dir, std::span<const Trajectory> trajectories,
                              const DatasetOptions& options) {
  std::vector<std::vector<SequenceWindow>> kept(trajectories.size());
  std::vector<std::size_t> total(trajectories.size(), 0);
  parallel_for(trajectories.size(), options.jobs, [&](std::size_t i) {
    validate_tick_grid(trajectories[i].states, kTickSeconds);
    auto windows = window_sequences(trajectories[i], options.windows);
    total[i] = windows.size();
    for (auto& w : windows) {
      if (options.filter.accepts(w)) kept[i].push_back(std::move(w));
    }
  });

  ExchangeManifest header;
  header.input_ticks = options.windows.input_ticks;
  header.label_ticks = options.windows.label_ticks;
  header.has_panoramas = options.with_panoramas;
  header.geometry = options.panorama.geometry;
  ExchangeWriter writer(dir, header);

  DatasetSummary summary;
  summary.trajectories = trajectories.size();
  std::vector<StateVector> states;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    summary.windows_total += total[i];
    std::map<std::size_t, DepthPanorama> cache;
    for (const SequenceWindow& w : kept[i]) {
      cache.erase(cache.begin(), cache.lower_bound(w.start_tick));
      states = w.input_states;
      states.insert(states.end(), w.label_states.begin(), w.label_states.end());
      auto pano = [&](std::size_t t) {
        const std::size_t tick = w.start_tick + t;
        auto it = cache.find(tick);
        if (it == cache.end()) it = cache.emplace(tick, panorama_at(trajectories[i], tick, options.panorama)).first;
        return it->second;
      };
      writer.append({w.source_id, w.scenario, w.start_tick}, states, pano);
      ++summary.windows_kept;
    }
  }
  writer.finish();
  return summary;
}

// ---- split files ------------------------------------------------------------

bool SplitFile::contains(const std::string& split, const std::string& id) const {
  const std::vector<std::string>* ids = nullptr;
  if (split == "train") {
    ids = &train;
  } else if (split == "test") {
    ids = &test;
  } else {
    fail(ErrorCode::InvalidInput, "unknown split '" + split + "' (train or test)");
  }
  return std::find(ids->begin(), ids->end(), id) != ids->end();
}

SplitFile load_split(const fs::path& path) {
  const json j = read_json_file(path);
  SplitFile s;
  try {
    s.train = j.value("train", std::vector<std::string>{});
    s.test = j.value("test", std::vector<std::string>{});
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, path.string() + ": " + e.what());
  }
  for (const auto& id : s.train) {
    if (std::find(s.test.begin(), s.test.end(), id) != s.test.end()) {
      fail(ErrorCode::Schema, "split file lists '" + id + "' in both train and test");
    }
  }
  return s;
}

}  // namespace swayrisk
