#pragma once

// Egocentric depth panorama: spherical z-buffer of queued point clouds,
// expressed in the torso frame.
//
// Pixel convention: row 0 looks straight up (+90 deg elevation), col 0 looks
// backwards (-180 deg azimuth, measured from +X towards +Y). Bins are
// floor-quantized and clamped to the grid edges.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "swayrisk/core.hpp"

namespace swayrisk {

struct PanoramaGeometry {
  std::uint16_t rows = 180;
  std::uint16_t cols = 360;
  float max_depth = 10.0f;  // meters; also the empty-cell sentinel

  std::size_t cells() const { return std::size_t{rows} * cols; }
  double row_degrees() const { return 180.0 / rows; }
  double col_degrees() const { return 360.0 / cols; }

  friend bool operator==(const PanoramaGeometry&, const PanoramaGeometry&) = default;
};

struct PixelHit {
  int row = 0;
  int col = 0;
  double depth = 0.0;
};

/// Pixel a torso-frame point lands in; nothing for depth 0 or beyond max_depth.
std::optional<PixelHit> project_point_to_pixel(const Vec3& p, const PanoramaGeometry& geometry = {});

/// Unit ray through the center of a cell, in the torso frame.
Vec3 cell_center_ray(int row, int col, const PanoramaGeometry& geometry = {});

class DepthPanorama {
 public:
  explicit DepthPanorama(PanoramaGeometry geometry = {}, Pose frame_pose = {});

  const PanoramaGeometry& geometry() const { return geometry_; }
  const Pose& frame_pose() const { return frame_pose_; }
  int rows() const { return geometry_.rows; }
  int cols() const { return geometry_.cols; }

  float at(int row, int col) const { return grid_[index(row, col)]; }
  float& at(int row, int col) { return grid_[index(row, col)]; }

  /// Row-major depths in meters.
  std::span<const float> data() const { return grid_; }
  std::span<float> data() { return grid_; }

  /// z-buffer write: keeps the smaller depth.
  void write_min(int row, int col, float depth);

  friend bool operator==(const DepthPanorama& a, const DepthPanorama& b) {
    return a.geometry_ == b.geometry_ && a.grid_ == b.grid_;
  }

 private:
  std::size_t index(int row, int col) const { return std::size_t(row) * geometry_.cols + std::size_t(col); }

  PanoramaGeometry geometry_;
  Pose frame_pose_;
  std::vector<float> grid_;
};

inline constexpr std::size_t kDefaultQueueCapacity = 40;

/// Fixed-length FIFO of pose-stamped clouds; oldest entries are evicted first.
class CloudQueue {
 public:
  explicit CloudQueue(std::size_t capacity = kDefaultQueueCapacity) : capacity_(capacity) {}

  void push(PointCloud cloud);
  void clear() { entries_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<PointCloud>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<PointCloud> entries_;
};

/// Rasterizes clouds into the torso frame of `torso`.
DepthPanorama build_panorama(std::span<const PointCloud> clouds, const Pose& torso,
                             const PanoramaGeometry& geometry = {});
DepthPanorama build_panorama(const CloudQueue& queue, const Pose& torso, const PanoramaGeometry& geometry = {});

/// Fraction of cells nearer than the max-depth sentinel.
double panorama_coverage(const DepthPanorama& panorama);

// Binary panorama file: "PANO", u16 rows, u16 cols, u32 reserved x2, then
// rows*cols little-endian f32 depths, row-major.
inline constexpr std::size_t kPanoramaHeaderBytes = 16;

void write_panorama(std::ostream& os, const DepthPanorama& panorama);
DepthPanorama read_panorama(std::istream& is, float max_depth = 10.0f);
void save_panorama(const std::filesystem::path& path, const DepthPanorama& panorama);
DepthPanorama load_panorama(const std::filesystem::path& path, float max_depth = 10.0f);

/// 8-bit binary PGM, depth 0 -> 0 and max_depth -> 255.
void save_panorama_pgm(const std::filesystem::path& path, const DepthPanorama& panorama);

}  // namespace swayrisk
