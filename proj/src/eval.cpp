#include "swayrisk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "swayrisk/error.hpp"
#include "swayrisk/parallel.hpp"

namespace swayrisk {

namespace fs = std::filesystem;

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorCode::Shape, std::string(what) + ": prediction has " + std::to_string(a) + " entries, truth has " +
                               std::to_string(b));
  }
}

}  // namespace

std::vector<double> traj_loss(std::span<const Vec3> pred, std::span<const Vec3> truth) {
  require_same_length(pred.size(), truth.size(), "traj_loss");
  std::vector<double> out(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) out[k] = (pred[k] - truth[k]).norm();
  return out;
}

std::vector<double> area_loss(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred.size(), truth.size(), "area_loss");
  std::vector<double> out(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) out[k] = std::abs(pred[k] - truth[k]);
  return out;
}

double pano_loss(std::span<const float> pred, std::span<const float> truth) {
  require_same_length(pred.size(), truth.size(), "pano_loss");
  if (truth.empty()) fail(ErrorCode::Shape, "pano_loss on an empty grid");
  constexpr double kEps = 1e-12;
  double max_i = 0.0;
  for (float v : truth) max_i = std::max(max_i, static_cast<double>(v));
  const double denom = std::max(max_i, kEps);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double w = 1.0 - 0.5 * static_cast<double>(truth[i]) / denom;
    sum += w * std::abs(static_cast<double>(pred[i]) - static_cast<double>(truth[i]));
  }
  return sum / static_cast<double>(truth.size());
}

double pano_loss(const DepthPanorama& pred, const DepthPanorama& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    fail(ErrorCode::Shape, "pano_loss: grids differ in shape");
  }
  return pano_loss(pred.data(), truth.data());
}

std::vector<double> cumulative_mean(std::span<const double> values) {
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    acc += values[k];
    out[k] = acc / static_cast<double>(k + 1);
  }
  return out;
}

std::map<std::string, std::vector<double>> score_states(std::span<const float> pred, std::span<const float> truth) {
  require_same_length(pred.size(), truth.size(), "score_states");
  if (pred.size() % kStateDim != 0) fail(ErrorCode::Shape, "state payload is not a multiple of 24 values");
  const std::size_t ticks = pred.size() / kStateDim;
  auto vec3 = [](std::span<const float> v, std::size_t tick, std::size_t offset) {
    const std::size_t i = tick * kStateDim + offset;
    return Vec3(v[i], v[i + 1], v[i + 2]);
  };
  std::vector<Vec3> pp(ticks), tp(ticks), pv(ticks), tv(ticks);
  std::vector<double> pa(ticks), ta(ticks);
  for (std::size_t k = 0; k < ticks; ++k) {
    pp[k] = vec3(pred, k, channel::kPosition);
    tp[k] = vec3(truth, k, channel::kPosition);
    pv[k] = vec3(pred, k, channel::kLinearVelocity);
    tv[k] = vec3(truth, k, channel::kLinearVelocity);
    pa[k] = pred[k * kStateDim + channel::kSwayArea];
    ta[k] = truth[k * kStateDim + channel::kSwayArea];
  }
  std::map<std::string, std::vector<double>> out;
  out["position"] = traj_loss(pp, tp);
  out["position_ade"] = cumulative_mean(out["position"]);
  out["velocity"] = traj_loss(pv, tv);
  out["sway_area"] = area_loss(pa, ta);
  return out;
}

std::vector<HorizonCurve> horizon_report(std::span<const WindowScore> scores, double dt) {
  if (scores.empty()) fail(ErrorCode::InsufficientData, "horizon report needs at least one scored window");

  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<const std::vector<double>*>> groups;
  for (const WindowScore& s : scores) {
    for (const auto& [metric, values] : s.metrics) {
      groups[{to_string(s.ref.scenario), s.variant, metric}].push_back(&values);
      groups[{kAllScenarios, s.variant, metric}].push_back(&values);
    }
  }

  std::vector<HorizonCurve> out;
  for (const auto& [key, members] : groups) {
    if (members.empty()) fail(ErrorCode::InsufficientData, "empty evaluation group");
    HorizonCurve c;
    std::tie(c.scenario, c.variant, c.metric) = key;
    c.dt = dt;
    c.n = members.size();
    const std::size_t ticks = members.front()->size();
    c.mean.assign(ticks, 0.0);
    c.std.assign(ticks, 0.0);
    for (const auto* m : members) {
      require_same_length(m->size(), ticks, "horizon_report");
      for (std::size_t k = 0; k < ticks; ++k) c.mean[k] += (*m)[k];
    }
    for (double& v : c.mean) v /= static_cast<double>(c.n);
    for (const auto* m : members) {
      for (std::size_t k = 0; k < ticks; ++k) {
        const double d = (*m)[k] - c.mean[k];
        c.std[k] += d * d;
      }
    }
    for (double& v : c.std) v = std::sqrt(v / static_cast<double>(c.n));
    out.push_back(std::move(c));
  }
  return out;
}

void write_horizon_csv(std::ostream& os, std::span<const HorizonCurve> curves) {
  os << "scenario,variant,metric,horizon_s,mean,std,n\n";
  for (const HorizonCurve& c : curves) {
    for (std::size_t k = 0; k < c.mean.size(); ++k) {
      os << c.scenario << ',' << c.variant << ',' << c.metric << ',' << std::setprecision(6)
         << static_cast<double>(k + 1) * c.dt << ',' << std::setprecision(10) << c.mean[k] << ',' << c.std[k] << ','
         << c.n << '\n';
    }
  }
}

void write_horizon_svg(std::ostream& os, std::span<const HorizonCurve> curves, const std::string& title) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double x_max = 0.0, y_max = 0.0;
  for (const auto& c : curves) {
    x_max = std::max(x_max, static_cast<double>(c.mean.size()) * c.dt);
    for (std::size_t k = 0; k < c.mean.size(); ++k) y_max = std::max(y_max, c.mean[k] + c.std[k]);
  }
  if (x_max <= 0.0) x_max = 1.0;
  if (y_max <= 0.0) y_max = 1.0;
  auto px = [&](double x) { return L + (W - L - R) * x / x_max; };
  auto py = [&](double y) { return H - B - (H - T - B) * y / y_max; };

  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_max * i / 5.0, yv = y_max * i / 5.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << std::setprecision(2) << xv << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
       << std::setprecision(3) << yv << "</text>\n";
  }
  os << std::setprecision(2);
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << "horizon (s)</text>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const HorizonCurve& c = curves[i];
    const char* color = kColors[i % std::size(kColors)];
    std::ostringstream band, line;
    band << std::fixed << std::setprecision(2);
    line << std::fixed << std::setprecision(2);
    for (std::size_t k = 0; k < c.mean.size(); ++k) {
      const double x = px(static_cast<double>(k + 1) * c.dt);
      band << x << ',' << py(c.mean[k] + c.std[k]) << ' ';
      line << x << ',' << py(c.mean[k]) << ' ';
    }
    for (std::size_t k = c.mean.size(); k-- > 0;) {
      band << px(static_cast<double>(k + 1) * c.dt) << ',' << py(std::max(0.0, c.mean[k] - c.std[k])) << ' ';
    }
    os << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    os << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    const double ly = T + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << c.variant << " (n=" << c.n
       << ")</text>\n";
  }
  os << "</svg>\n";
}

std::vector<WindowScore> evaluate_predictions(const ExchangeSet& truth, std::span<const ExchangeSet> predictions,
                                              const EvalOptions& options) {
  const ExchangeManifest& tm = truth.manifest();
  if (tm.kind != ExchangeKind::TrainingSet) fail(ErrorCode::Schema, "truth must be a training_set directory");
  if (predictions.empty()) fail(ErrorCode::InvalidInput, "no prediction sets to evaluate");

  std::set<std::string> variants;
  for (const ExchangeSet& p : predictions) {
    const ExchangeManifest& pm = p.manifest();
    const std::string where = p.dir().string();
    if (pm.kind != ExchangeKind::Predictions) fail(ErrorCode::Schema, where + " is not a predictions directory");
    if (!variants.insert(pm.variant).second) fail(ErrorCode::Schema, "duplicate prediction variant '" + pm.variant + "'");
    if (pm.label_ticks != tm.label_ticks || pm.input_ticks != tm.input_ticks) {
      fail(ErrorCode::Schema, where + ": input/label split differs from the truth set");
    }
    if (pm.windows != tm.windows) fail(ErrorCode::Schema, where + ": window list differs from the truth set");
    if (pm.has_panoramas && tm.has_panoramas && !(pm.geometry == tm.geometry)) {
      fail(ErrorCode::Schema, where + ": panorama geometry differs from the truth set");
    }
  }

  const std::size_t n = truth.window_count();
  const std::size_t label_offset = tm.input_ticks * kStateDim;
  std::vector<WindowScore> out(n * predictions.size());
  parallel_for(out.size(), options.jobs, [&](std::size_t idx) {
    const std::size_t v = idx / n;
    const std::size_t w = idx % n;
    const ExchangeSet& pred = predictions[v];
    WindowScore& s = out[idx];
    s.ref = tm.windows[w];
    s.variant = pred.manifest().variant;
    s.metrics = score_states(pred.window_values(w), truth.window_values(w).subspan(label_offset));
    if (options.panoramas && pred.manifest().has_panoramas && tm.has_panoramas) {
      std::vector<double> pano(tm.label_ticks);
      for (std::size_t t = 0; t < tm.label_ticks; ++t) {
        pano[t] = pano_loss(pred.panorama(w, t), truth.panorama(w, tm.input_ticks + t));
      }
      s.metrics["panorama"] = std::move(pano);
    }
  });
  return out;
}

EvalOutputs write_eval_outputs(const fs::path& dir, std::span<const HorizonCurve> curves) {
  EvalOutputs out;
  std::error_code ec;
  for (const fs::path& d : {dir, dir / "curves", dir / "plots"}) {
    fs::create_directories(d, ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + d.string() + ": " + ec.message());
  }
  auto open = [&](const fs::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
    out.files.push_back(path);
    return os;
  };

  {
    std::ofstream os = open(dir / "horizon.csv");
    write_horizon_csv(os, curves);
  }
  std::map<std::pair<std::string, std::string>, std::vector<HorizonCurve>> figures;
  for (const HorizonCurve& c : curves) {
    std::ofstream os = open(dir / "curves" / (c.scenario + "__" + c.variant + "__" + c.metric + ".csv"));
    write_horizon_csv(os, std::span(&c, 1));
    figures[{c.scenario, c.metric}].push_back(c);
  }
  for (const auto& [key, group] : figures) {
    std::ofstream os = open(dir / "plots" / (key.first + "__" + key.second + ".svg"));
    write_horizon_svg(os, group, key.second + " loss, " + key.first);
  }
  return out;
}

}  // namespace swayrisk
