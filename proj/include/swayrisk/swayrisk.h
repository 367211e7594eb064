/* swayrisk C API.
 *
 * Every call returns swr_status; on failure swr_last_error() holds a message
 * for the calling thread until its next API call. Quaternions are w, x, y, z.
 * Strings returned through char** are owned by the caller: free them with
 * swr_string_free().
 */
#ifndef SWAYRISK_H
#define SWAYRISK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SWR_API __declspec(dllexport)
#else
#define SWR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum swr_status {
  SWR_OK = 0,
  SWR_INVALID_INPUT = 1,
  SWR_INSUFFICIENT_DATA = 2,
  SWR_INVALID_COVARIANCE = 3,
  SWR_INVALID_SCHEDULE = 4,
  SWR_GAP = 5,
  SWR_SCHEMA = 6,
  SWR_SHAPE = 7,
  SWR_NAN_PAYLOAD = 8,
  SWR_UNDEFINED_RATIO = 9,
  SWR_IO = 10,
  SWR_INTERNAL = 11
} swr_status;

SWR_API const char* swr_version(void);
SWR_API const char* swr_status_string(swr_status status);
SWR_API const char* swr_last_error(void);
SWR_API void swr_string_free(char* s);

/* ---- math ---------------------------------------------------------------- */

SWR_API swr_status swr_rotate_vector(const double q[4], const double v[3], double out[3]);

typedef struct swr_ellipse {
  double mean[2];
  double cov[4]; /* row-major [a b; b c] */
  double major_axis;
  double minor_axis;
  double rotation; /* radians */
  double area;
} swr_ellipse;

SWR_API swr_status swr_ellipse_from_cov(const double mean[2], const double cov[4], double chi_square, swr_ellipse* out);

/* Gaussian fit of n >= 3 points (xy interleaved) and its ellipse. */
SWR_API swr_status swr_fit_ellipse(const double* xy, size_t n, double chi_square, swr_ellipse* out);

/* Sway series of n orientations (n x 4). sigma_z and delta_sigma_z must hold
 * n values; the first *emitted values are written (n - window_len + 1). */
SWR_API swr_status swr_sway_series(const double* quats, size_t n, size_t window_len, double dt, double chi_square,
                                   double* sigma_z, double* delta_sigma_z, size_t* emitted);

/* 1.4826 * MAD of |values| over all n values. */
SWR_API swr_status swr_noise_floor(const double* values, size_t n, double* out);

/* xy interleaved positions on the tick grid; +inf for straight paths. */
SWR_API swr_status swr_min_turning_radius(const double* xy, size_t n, double* out);

/* ---- panoramas ----------------------------------------------------------- */

typedef struct swr_cloud_queue swr_cloud_queue;
typedef struct swr_panorama swr_panorama;

SWR_API swr_status swr_cloud_queue_create(size_t capacity, swr_cloud_queue** out);
SWR_API void swr_cloud_queue_destroy(swr_cloud_queue* queue);
/* Points are n x 3 floats in the start frame. */
SWR_API swr_status swr_cloud_queue_push(swr_cloud_queue* queue, double t, const double position[3],
                                        const double orientation[4], const float* points, size_t n);
SWR_API swr_status swr_cloud_queue_size(const swr_cloud_queue* queue, size_t* out);

/* rows/cols/max_depth of 0 select 180, 360 and 10 m. */
SWR_API swr_status swr_panorama_build(const swr_cloud_queue* queue, const double position[3],
                                      const double orientation[4], uint16_t rows, uint16_t cols, float max_depth,
                                      swr_panorama** out);
SWR_API swr_status swr_panorama_load(const char* path, swr_panorama** out);
SWR_API void swr_panorama_destroy(swr_panorama* panorama);
/* Borrowed row-major depths, valid until the panorama is destroyed. */
SWR_API swr_status swr_panorama_data(const swr_panorama* panorama, const float** data, uint16_t* rows,
                                     uint16_t* cols);
SWR_API swr_status swr_panorama_coverage(const swr_panorama* panorama, double* out);
SWR_API swr_status swr_panorama_save(const swr_panorama* panorama, const char* path);
SWR_API swr_status swr_panorama_save_pgm(const swr_panorama* panorama, const char* path);

/* ---- pipelines ----------------------------------------------------------- */
/* JSON config in, JSON summary out (result may be NULL). Unknown keys are
 * rejected; the resolved config is echoed as "config" and written to
 * <output>/run_config.json. */

SWR_API swr_status swr_simulate(const char* config_json, char** result_json);
SWR_API swr_status swr_detect(const char* config_json, char** result_json);
SWR_API swr_status swr_build_dataset(const char* config_json, char** result_json);
SWR_API swr_status swr_identity_predictions(const char* config_json, char** result_json);
SWR_API swr_status swr_evaluate(const char* config_json, char** result_json);
SWR_API swr_status swr_sway(const char* config_json, char** result_json);
SWR_API swr_status swr_trial_panorama(const char* config_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* SWAYRISK_H */
