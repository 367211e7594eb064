#include "swayrisk/swayrisk.h"

#include <cmath>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swayrisk/dataset.hpp"
#include "swayrisk/detector.hpp"
#include "swayrisk/error.hpp"
#include "swayrisk/panorama.hpp"
#include "swayrisk/pipeline.hpp"
#include "swayrisk/sway.hpp"

using namespace swayrisk;

struct swr_cloud_queue {
  CloudQueue queue;
};

struct swr_panorama {
  DepthPanorama panorama;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
swr_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return SWR_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<swr_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return SWR_INVALID_INPUT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SWR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SWR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return SWR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::InvalidInput, std::string(what) + " is NULL");
}

UnitQuaternion quat(const double q[4]) { return UnitQuaternion(q[0], q[1], q[2], q[3]); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void fill(const SwayEllipse& e, swr_ellipse* out) {
  out->mean[0] = e.mean.x();
  out->mean[1] = e.mean.y();
  out->cov[0] = e.cov(0, 0);
  out->cov[1] = e.cov(0, 1);
  out->cov[2] = e.cov(1, 0);
  out->cov[3] = e.cov(1, 1);
  out->major_axis = e.major_axis;
  out->minor_axis = e.minor_axis;
  out->rotation = e.rotation;
  out->area = e.area;
}

using PipelineFn = nlohmann::json (*)(const nlohmann::json&);

swr_status run_pipeline(PipelineFn fn, const char* config_json, char** result_json) {
  if (result_json != nullptr) *result_json = nullptr;
  return guarded([&] {
    require(config_json, "config_json");
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::InvalidInput, std::string("config is not valid JSON: ") + e.what());
    }
    const nlohmann::json result = fn(config);
    if (result_json != nullptr) *result_json = dup_string(result.dump());
  });
}

}  // namespace

extern "C" {

const char* swr_version(void) { return "0.1.0"; }

const char* swr_status_string(swr_status status) {
  if (status == SWR_OK) return "ok";
  return to_string(static_cast<ErrorCode>(status));
}

const char* swr_last_error(void) { return g_last_error.c_str(); }

void swr_string_free(char* s) { std::free(s); }

swr_status swr_rotate_vector(const double q[4], const double v[3], double out[3]) {
  return guarded([&] {
    require(q, "q");
    require(v, "v");
    require(out, "out");
    const Vec3 r = rotate_vector(quat(q), Vec3(v[0], v[1], v[2]));
    for (int i = 0; i < 3; ++i) out[i] = r[i];
  });
}

swr_status swr_ellipse_from_cov(const double mean[2], const double cov[4], double chi_square, swr_ellipse* out) {
  return guarded([&] {
    require(mean, "mean");
    require(cov, "cov");
    require(out, "out");
    Mat2 c;
    c << cov[0], cov[1], cov[2], cov[3];
    fill(ellipse_from_cov(Vec2(mean[0], mean[1]), c, chi_square), out);
  });
}

swr_status swr_fit_ellipse(const double* xy, size_t n, double chi_square, swr_ellipse* out) {
  return guarded([&] {
    require(xy, "xy");
    require(out, "out");
    std::vector<Vec2> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = Vec2(xy[2 * i], xy[2 * i + 1]);
    const Gaussian2 g = fit_gaussian(pts);
    fill(ellipse_from_cov(g.mean, g.cov, chi_square), out);
  });
}

swr_status swr_sway_series(const double* quats, size_t n, size_t window_len, double dt, double chi_square,
                           double* sigma_z, double* delta_sigma_z, size_t* emitted) {
  return guarded([&] {
    require(quats, "quats");
    require(sigma_z, "sigma_z");
    require(delta_sigma_z, "delta_sigma_z");
    require(emitted, "emitted");
    std::vector<GroundProjection> proj(n);
    for (size_t i = 0; i < n; ++i) {
      proj[i].timestamp = Timestamp{static_cast<double>(i) * dt};
      proj[i].point = project_torso_vertical(quat(quats + 4 * i));
    }
    const auto series = sway_series(proj, SwayOptions{window_len, dt, chi_square});
    for (size_t i = 0; i < series.size(); ++i) {
      sigma_z[i] = series[i].sigma_z;
      delta_sigma_z[i] = series[i].delta_sigma_z;
    }
    *emitted = series.size();
  });
}

swr_status swr_noise_floor(const double* values, size_t n, double* out) {
  return guarded([&] {
    require(values, "values");
    require(out, "out");
    MetricSeries s;
    s.values.assign(values, values + n);
    s.times.resize(n);
    for (size_t i = 0; i < n; ++i) s.times[i] = static_cast<double>(i) * kTickSeconds;
    *out = noise_floor(s);
  });
}

swr_status swr_min_turning_radius(const double* xy, size_t n, double* out) {
  return guarded([&] {
    require(xy, "xy");
    require(out, "out");
    std::vector<Vec2> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = Vec2(xy[2 * i], xy[2 * i + 1]);
    *out = min_turning_radius(pts);
  });
}

swr_status swr_cloud_queue_create(size_t capacity, swr_cloud_queue** out) {
  return guarded([&] {
    require(out, "out");
    *out = new swr_cloud_queue{CloudQueue(capacity)};
  });
}

void swr_cloud_queue_destroy(swr_cloud_queue* queue) { delete queue; }

swr_status swr_cloud_queue_push(swr_cloud_queue* queue, double t, const double position[3],
                                const double orientation[4], const float* points, size_t n) {
  return guarded([&] {
    require(queue, "queue");
    require(position, "position");
    require(orientation, "orientation");
    if (n > 0) require(points, "points");
    PointCloud c;
    c.timestamp = Timestamp{t};
    c.source_pose = Pose{c.timestamp, Vec3(position[0], position[1], position[2]), quat(orientation)};
    c.points.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      const Vec3 p(points[3 * i], points[3 * i + 1], points[3 * i + 2]);
      if (!p.allFinite()) fail(ErrorCode::InvalidInput, "cloud point " + std::to_string(i) + " is not finite");
      c.points.push_back(p);
    }
    queue->queue.push(std::move(c));
  });
}

swr_status swr_cloud_queue_size(const swr_cloud_queue* queue, size_t* out) {
  return guarded([&] {
    require(queue, "queue");
    require(out, "out");
    *out = queue->queue.size();
  });
}

swr_status swr_panorama_build(const swr_cloud_queue* queue, const double position[3], const double orientation[4],
                              uint16_t rows, uint16_t cols, float max_depth, swr_panorama** out) {
  return guarded([&] {
    require(queue, "queue");
    require(position, "position");
    require(orientation, "orientation");
    require(out, "out");
    PanoramaGeometry g;
    if (rows != 0) g.rows = rows;
    if (cols != 0) g.cols = cols;
    if (max_depth != 0.0f) g.max_depth = max_depth;
    if (!(g.max_depth > 0.0f)) fail(ErrorCode::InvalidInput, "max_depth must be positive");
    const Pose torso{Timestamp{}, Vec3(position[0], position[1], position[2]), quat(orientation)};
    *out = new swr_panorama{build_panorama(queue->queue, torso, g)};
  });
}

swr_status swr_panorama_load(const char* path, swr_panorama** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new swr_panorama{load_panorama(path)};
  });
}

void swr_panorama_destroy(swr_panorama* panorama) { delete panorama; }

swr_status swr_panorama_data(const swr_panorama* panorama, const float** data, uint16_t* rows, uint16_t* cols) {
  return guarded([&] {
    require(panorama, "panorama");
    require(data, "data");
    *data = panorama->panorama.data().data();
    if (rows != nullptr) *rows = panorama->panorama.geometry().rows;
    if (cols != nullptr) *cols = panorama->panorama.geometry().cols;
  });
}

swr_status swr_panorama_coverage(const swr_panorama* panorama, double* out) {
  return guarded([&] {
    require(panorama, "panorama");
    require(out, "out");
    *out = panorama_coverage(panorama->panorama);
  });
}

swr_status swr_panorama_save(const swr_panorama* panorama, const char* path) {
  return guarded([&] {
    require(panorama, "panorama");
    require(path, "path");
    save_panorama(path, panorama->panorama);
  });
}

swr_status swr_panorama_save_pgm(const swr_panorama* panorama, const char* path) {
  return guarded([&] {
    require(panorama, "panorama");
    require(path, "path");
    save_panorama_pgm(path, panorama->panorama);
  });
}

swr_status swr_simulate(const char* config_json, char** result_json) {
  return run_pipeline(&pipeline::simulate, config_json, result_json);
}

swr_status swr_detect(const char* config_json, char** result_json) {
  return run_pipeline(&pipeline::detect, config_json, result_json);
}

swr_status swr_build_dataset(const char* config_json, char** result_json) {
  return run_pipeline(&pipeline::build_dataset, config_json, result_json);
}

swr_status swr_identity_predictions(const char* config_json, char** result_json) {
  return run_pipeline(&pipeline::identity_predictions, config_json, result_json);
}

swr_status swr_evaluate(const char* config_json, char** result_json) {
  return run_pipeline(&pipeline::evaluate, config_json, result_json);
}

swr_status swr_sway(const char* config_json, char** result_json) {
  return run_pipeline(&pipeline::sway, config_json, result_json);
}

swr_status swr_trial_panorama(const char* config_json, char** result_json) {
  return run_pipeline(&pipeline::panorama, config_json, result_json);
}

}  // extern "C"
