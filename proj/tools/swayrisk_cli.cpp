// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <list>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swayrisk/swayrisk.h"

using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kIo = 4 };

int exit_code(swr_status s) {
  switch (s) {
    case SWR_OK: return kOk;
    case SWR_INVALID_INPUT:
    case SWR_INVALID_SCHEDULE: return kUsage;
    case SWR_IO: return kIo;
    default: return kData;
  }
}

/// Options that only reach the config when given on the command line, so the
/// library stays the single source of defaults.
class Flags {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    auto& slot = storage<T>().emplace_back();
    CLI::Option* opt = app->add_option(name, slot, help);
    setters_.push_back([opt, key, &slot](json& cfg) {
      if (opt->count() > 0) cfg[key] = slot;
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& key, bool value,
                    const std::string& help) {
    CLI::Option* opt = app->add_flag(name, help);
    setters_.push_back([opt, key, value](json& cfg) {
      if (opt->count() > 0) cfg[key] = value;
    });
    return opt;
  }

  void apply(json& cfg) const {
    for (const auto& s : setters_) s(cfg);
  }

 private:
  template <typename T>
  std::list<T>& storage() {
    if constexpr (std::is_same_v<T, double>) return doubles_;
    else if constexpr (std::is_same_v<T, long long>) return ints_;
    else if constexpr (std::is_same_v<T, std::string>) return strings_;
    else return string_lists_;
  }

  std::list<double> doubles_;
  std::list<long long> ints_;
  std::list<std::string> strings_;
  std::list<std::vector<std::string>> string_lists_;
  std::vector<std::function<void(json&)>> setters_;
};

struct Command {
  CLI::App* app = nullptr;
  Flags flags;
  std::string output;
  swr_status (*fn)(const char*, char**) = nullptr;
  std::function<void(json&)> extra;  // post-processing of the config
  std::function<void(const json&)> report;
};

void add_sway_flags(Command& c) {
  c.flags.add<long long>(c.app, "--window-len", "window_len", "sway window length in ticks (50)")
      ->check(CLI::Range(3LL, 1000000LL));
  c.flags.add<double>(c.app, "--dt", "dt", "tick spacing in seconds (0.05)")->check(CLI::PositiveNumber);
  c.flags.add<double>(c.app, "--chi2", "chi2", "chi-square quantile of the sway ellipse (5.991)")
      ->check(CLI::PositiveNumber);
}

void add_geometry_flags(Command& c) {
  c.flags.add<long long>(c.app, "--pano-rows", "pano_rows", "panorama rows (180)")->check(CLI::Range(1LL, 65535LL));
  c.flags.add<long long>(c.app, "--pano-cols", "pano_cols", "panorama columns (360)")->check(CLI::Range(1LL, 65535LL));
  c.flags.add<double>(c.app, "--max-depth", "max_depth", "panorama depth cap in meters (10)")
      ->check(CLI::PositiveNumber);
}

void add_jobs_flag(Command& c) {
  c.flags.add<long long>(c.app, "-j,--jobs", "jobs", "worker threads (all cores)")->check(CLI::PositiveNumber);
}

json parse_waypoints(const std::string& text) {
  json out = json::array();
  std::stringstream ss(text);
  std::string pair;
  while (std::getline(ss, pair, ';')) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos) throw CLI::ValidationError("--waypoints", "expected x,y;x,y;...");
    try {
      out.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
    } catch (const std::exception&) {
      throw CLI::ValidationError("--waypoints", "cannot parse '" + pair + "'");
    }
  }
  return out;
}

void print_kv(const std::string& key, const json& value) { std::cout << key << ": " << value.dump() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swayrisk: torso sway metrics, perturbation detection, depth panoramas and dataset tooling"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "print the result as JSON");
  app.set_version_flag("--version", std::string(swr_version()));

  const char* env_root = std::getenv("SWAYRISK_OUTPUT_ROOT");
  std::list<Command> commands;
  auto make = [&](const char* name, const char* help, swr_status (*fn)(const char*, char**)) -> Command& {
    Command& c = commands.emplace_back();
    c.app = app.add_subcommand(name, help);
    c.fn = fn;
    c.app->add_option("-o,--output", c.output, "output directory (default $SWAYRISK_OUTPUT_ROOT/<command>)");
    return c;
  };

  // simulate
  {
    Command& c = make("simulate", "simulate treadmill or scene walking trials", &swr_simulate);
    c.flags.add<std::string>(c.app, "--kind", "kind", "treadmill or scene")
        ->check(CLI::IsMember({"treadmill", "scene"}));
    c.flags.add<long long>(c.app, "-n,--trials", "trials", "number of trials (1)")->check(CLI::NonNegativeNumber);
    c.flags.add<long long>(c.app, "--seed", "seed", "base seed; trial i uses seed + i (0)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--duration", "duration", "trial length in seconds (60)")->check(CLI::PositiveNumber);
    c.flags.flag(c.app, "--batch", "batch", true,
                 "192 trials of 90 s alternating 7.5% and 15% body-weight pushes");
    c.flags.add<std::string>(c.app, "--magnitude", "magnitude", "auto, alternate, 0.075 or 0.15")
        ->check(CLI::IsMember({"auto", "alternate", "0.075", "0.15"}));
    c.flags.add<std::string>(c.app, "--schedule", "schedule", "auto or none")->check(CLI::IsMember({"auto", "none"}));
    c.flags.add<long long>(c.app, "--controls", "controls", "extra unperturbed trials (0)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<long long>(c.app, "--control-seed", "control_seed", "base seed of the controls (seed + 4000)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--speed", "speed", "walking speed m/s (1.25)")->check(CLI::PositiveNumber);
    c.flags.add<double>(c.app, "--step-frequency", "step_frequency", "Hz (1.9)")->check(CLI::PositiveNumber);
    c.flags.add<double>(c.app, "--sway-noise-scale", "sway_noise_scale", "jitter multiplier (1)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--recovery-time-constant", "recovery_time_constant", "seconds (1)")
        ->check(CLI::PositiveNumber);
    c.flags.add<double>(c.app, "--gait-amplitude", "gait_amplitude_deg", "degrees (2)")->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--gait-ellipticity", "gait_ellipticity", "quadrature gait component (0)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--tilt-per-bw", "tilt_deg_per_body_weight", "peak tilt degrees per body weight (53.33)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--jitter", "jitter_deg", "AR(1) jitter std in degrees (0.25)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--jitter-time-constant", "jitter_time_constant", "seconds (2)")
        ->check(CLI::PositiveNumber);
    c.flags.flag(c.app, "--clouds", "emit_clouds", true, "write point clouds (scene default)");
    c.flags.flag(c.app, "--no-clouds", "emit_clouds", false, "skip point clouds (treadmill default)");
    c.flags.add<std::string>(c.app, "--scenario", "scenario", "indoor, outdoor_cluttered, outdoor_free or treadmill")
        ->check(CLI::IsMember({"indoor", "outdoor_cluttered", "outdoor_free", "treadmill"}));
    c.flags.add<std::string>(c.app, "--scene-file", "scene_file", "JSON scene (walls, boxes, pillars)");
    c.flags.add<std::string>(c.app, "--route", "route", "default, straight or square")
        ->check(CLI::IsMember({"default", "straight", "square"}));
    auto* wp = c.app->add_option("--waypoints", "x,y;x,y;... (overrides --route)");
    add_sway_flags(c);
    add_jobs_flag(c);
    c.extra = [wp](json& cfg) {
      if (wp->count() > 0) cfg["waypoints"] = parse_waypoints(wp->as<std::string>());
    };
    c.report = [](const json& r) {
      print_kv("trials", r["trials"]);
      print_kv("controls", r["controls"]);
      print_kv("perturbations", r["perturbations"]);
    };
  }

  // detect
  {
    Command& c = make("detect", "detect perturbations with Delta sigma_z and Delta theta_z", &swr_detect);
    c.flags.add<std::string>(c.app, "-i,--input", "input", "trial directory or a tree of them")->required();
    c.flags.add<double>(c.app, "--threshold-mult", "threshold_mult", "threshold in noise floors (15)")
        ->check(CLI::PositiveNumber);
    c.flags.add<double>(c.app, "--refractory", "refractory", "seconds between events (2.5)")
        ->check(CLI::NonNegativeNumber);
    c.flags.add<double>(c.app, "--response-window", "response_window", "seconds after onset for a hit (2.5)")
        ->check(CLI::PositiveNumber);
    c.flags.add<double>(c.app, "--exclusion-span", "exclusion_span", "seconds after onset kept out of the noise (5)")
        ->check(CLI::NonNegativeNumber);
    c.flags.flag(c.app, "--no-traces", "traces", false, "skip per-trial trace CSVs");
    add_sway_flags(c);
    add_jobs_flag(c);
    c.report = [](const json& r) {
      print_kv("trials", r["trials"]);
      for (const char* m : {"sway_area", "torso_angle"}) {
        print_kv(std::string(m) + " detection_rate", r[m]["detection_rate"]);
        print_kv(std::string(m) + " false_positives_per_minute", r[m]["false_positives_per_minute"]);
        print_kv(std::string(m) + " mean_peak_to_noise", r[m]["mean_peak_to_noise"]);
      }
      if (r.contains("warning")) std::cerr << "warning: " << r["warning"].get<std::string>() << '\n';
    };
  }

  // dataset
  {
    Command& c = make("dataset", "cut training windows into an exchange directory", &swr_build_dataset);
    c.flags.add<std::string>(c.app, "-i,--input", "input", "trial directory or a tree of them")->required();
    c.flags.add<long long>(c.app, "--stride", "stride", "ticks between window starts (20)")->check(CLI::PositiveNumber);
    c.flags.add<long long>(c.app, "--input-ticks", "input_ticks", "input part of a window (150)")
        ->check(CLI::PositiveNumber);
    c.flags.add<long long>(c.app, "--label-ticks", "label_ticks", "label part of a window (50)")
        ->check(CLI::PositiveNumber);
    c.flags.flag(c.app, "--curvature-filter", "curvature_filter", true, "keep only windows with a tight turn");
    c.flags.add<double>(c.app, "--max-turn-radius", "max_turn_radius", "filter radius in meters (2)")
        ->check(CLI::PositiveNumber);
    c.flags.flag(c.app, "--panoramas", "panoramas", true, "write panos.bin (52 MB per window at 180x360)");
    c.flags.add<long long>(c.app, "--queue-capacity", "queue_capacity", "clouds per panorama (40)")
        ->check(CLI::NonNegativeNumber);
    add_geometry_flags(c);
    c.flags.add<double>(c.app, "--dt", "dt", "tick spacing in seconds (0.05)")->check(CLI::PositiveNumber);
    c.flags.add<std::string>(c.app, "--split-file", "split_file", "JSON {\"train\": [...], \"test\": [...]}");
    c.flags.add<std::string>(c.app, "--split", "split", "which split to export (test)")
        ->check(CLI::IsMember({"train", "test"}));
    add_jobs_flag(c);
    c.report = [](const json& r) {
      print_kv("trajectories", r["trajectories"]);
      print_kv("windows_total", r["windows_total"]);
      print_kv("windows", r["windows"]);
    };
  }

  // identity
  {
    Command& c = make("identity", "write predictions equal to the labels", &swr_identity_predictions);
    c.flags.add<std::string>(c.app, "-t,--truth", "truth", "training-set exchange directory")->required();
    c.flags.add<std::string>(c.app, "--variant", "variant", "variant name (identity)");
    c.report = [](const json& r) {
      print_kv("windows", r["windows"]);
      print_kv("variant", r["variant"]);
    };
  }

  // eval
  {
    Command& c = make("eval", "score predictions and write horizon curves", &swr_evaluate);
    c.flags.add<std::string>(c.app, "-t,--truth", "truth", "training-set exchange directory")->required();
    c.flags.add<std::vector<std::string>>(c.app, "-p,--predictions", "predictions", "prediction directories")
        ->required();
    c.flags.add<long long>(c.app, "--label-ticks", "label_ticks", "expected label ticks (50)")
        ->check(CLI::PositiveNumber);
    c.flags.add<long long>(c.app, "--input-ticks", "input_ticks", "expected input ticks (150)")
        ->check(CLI::PositiveNumber);
    c.flags.flag(c.app, "--no-panoramas", "panoramas", false, "skip the panorama loss");
    add_jobs_flag(c);
    c.report = [](const json& r) {
      print_kv("windows", r["windows"]);
      for (const auto& g : r["summary"]) {
        std::cout << g["variant"].get<std::string>() << ' ' << g["metric"].get<std::string>()
                  << " mean_over_horizon: " << g["mean_over_horizon"].dump()
                  << " final: " << g["final_horizon_mean"].dump() << '\n';
      }
    };
  }

  // sway
  {
    Command& c = make("sway", "sway and tilt traces of one trial", &swr_sway);
    c.flags.add<std::string>(c.app, "-i,--input", "input", "trial directory")->required();
    add_sway_flags(c);
    c.report = [](const json& r) {
      print_kv("ticks", r["ticks"]);
      print_kv("peak_abs_delta_sigma_z", r["peak_abs_delta_sigma_z"]);
    };
  }

  // panorama
  {
    Command& c = make("panorama", "depth panorama of one trial tick", &swr_trial_panorama);
    c.flags.add<std::string>(c.app, "-i,--input", "input", "trial directory with clouds")->required();
    c.flags.add<long long>(c.app, "--tick", "tick", "tick index (last)")->check(CLI::NonNegativeNumber);
    c.flags.add<long long>(c.app, "--queue-capacity", "queue_capacity", "clouds per panorama (40)")
        ->check(CLI::NonNegativeNumber);
    add_geometry_flags(c);
    c.report = [](const json& r) {
      print_kv("tick", r["tick"]);
      print_kv("coverage", r["coverage"]);
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  for (Command& c : commands) {
    if (!c.app->parsed()) continue;
    json cfg = json::object();
    try {
      c.flags.apply(cfg);
      if (c.extra) c.extra(cfg);
    } catch (const CLI::ParseError& e) {
      std::cerr << e.what() << '\n';
      return kUsage;
    }
    if (c.output.empty()) {
      if (env_root == nullptr || *env_root == '\0') {
        std::cerr << "error: --output is required when SWAYRISK_OUTPUT_ROOT is not set\n";
        return kUsage;
      }
      c.output = std::string(env_root) + "/" + c.app->get_name();
    }
    cfg["output"] = c.output;

    char* result = nullptr;
    const swr_status status = c.fn(cfg.dump().c_str(), &result);
    if (status != SWR_OK) {
      if (as_json) {
        std::cout << json{{"status", swr_status_string(status)}, {"error", swr_last_error()}}.dump() << '\n';
      }
      std::cerr << "error (" << swr_status_string(status) << "): " << swr_last_error() << '\n';
      return exit_code(status);
    }
    const json r = json::parse(result);
    swr_string_free(result);
    if (as_json) {
      std::cout << r.dump(2) << '\n';
    } else {
      print_kv("output", r["output"]);
      c.report(r);
    }
    return kOk;
  }
  return kUsage;
}
