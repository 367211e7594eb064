#include "swayrisk/panorama.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "swayrisk/binary_io.hpp"
#include "swayrisk/error.hpp"

namespace swayrisk {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;
constexpr double kDegToRad = M_PI / 180.0;

}  // namespace

std::optional<PixelHit> project_point_to_pixel(const Vec3& p, const PanoramaGeometry& geometry) {
  const double depth = p.norm();
  if (!(depth > 0.0) || depth > geometry.max_depth) return std::nullopt;
  const double azimuth = std::atan2(p.y(), p.x());
  const double elevation = std::asin(std::clamp(p.z() / depth, -1.0, 1.0));
  const int col = static_cast<int>(std::floor((azimuth * kRadToDeg + 180.0) / geometry.col_degrees()));
  const int row = static_cast<int>(std::floor((90.0 - elevation * kRadToDeg) / geometry.row_degrees()));
  return PixelHit{std::clamp(row, 0, geometry.rows - 1), std::clamp(col, 0, geometry.cols - 1), depth};
}

Vec3 cell_center_ray(int row, int col, const PanoramaGeometry& geometry) {
  const double elevation = (90.0 - (row + 0.5) * geometry.row_degrees()) * kDegToRad;
  const double azimuth = ((col + 0.5) * geometry.col_degrees() - 180.0) * kDegToRad;
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
}

DepthPanorama::DepthPanorama(PanoramaGeometry geometry, Pose frame_pose)
    : geometry_(geometry), frame_pose_(frame_pose), grid_(geometry.cells(), geometry.max_depth) {
  if (geometry.rows == 0 || geometry.cols == 0) fail(ErrorCode::InvalidInput, "panorama needs rows, cols > 0");
  if (!(geometry.max_depth > 0.0f)) fail(ErrorCode::InvalidInput, "panorama max depth must be positive");
}

void DepthPanorama::write_min(int row, int col, float depth) {
  float& cell = at(row, col);
  cell = std::min(cell, depth);
}

void CloudQueue::push(PointCloud cloud) {
  if (capacity_ == 0) return;
  entries_.push_back(std::move(cloud));
  while (entries_.size() > capacity_) entries_.pop_front();
}

DepthPanorama build_panorama(std::span<const PointCloud> clouds, const Pose& torso, const PanoramaGeometry& geometry) {
  DepthPanorama pano(geometry, torso);
  const Mat3 world_to_torso = torso.orientation.matrix().transpose();
  for (const PointCloud& cloud : clouds) {
    for (const Vec3& p : cloud.points) {
      const auto hit = project_point_to_pixel(world_to_torso * (p - torso.position), geometry);
      if (hit) pano.write_min(hit->row, hit->col, static_cast<float>(hit->depth));
    }
  }
  return pano;
}

DepthPanorama build_panorama(const CloudQueue& queue, const Pose& torso, const PanoramaGeometry& geometry) {
  const std::vector<PointCloud> snapshot(queue.entries().begin(), queue.entries().end());
  return build_panorama(snapshot, torso, geometry);
}

double panorama_coverage(const DepthPanorama& panorama) {
  const float sentinel = panorama.geometry().max_depth;
  const auto grid = panorama.data();
  const auto written = std::count_if(grid.begin(), grid.end(), [&](float d) { return d < sentinel; });
  return static_cast<double>(written) / static_cast<double>(grid.size());
}

void write_panorama(std::ostream& os, const DepthPanorama& panorama) {
  os.write("PANO", 4);
  binary::write_le<std::uint16_t>(os, panorama.geometry().rows);
  binary::write_le<std::uint16_t>(os, panorama.geometry().cols);
  binary::write_le<std::uint32_t>(os, 0);
  binary::write_le<std::uint32_t>(os, 0);
  binary::write_f32_block(os, panorama.data());
  if (!os) fail(ErrorCode::Io, "failed writing panorama");
}

DepthPanorama read_panorama(std::istream& is, float max_depth) {
  char magic[4];
  if (!is.read(magic, 4)) fail(ErrorCode::Shape, "panorama file shorter than its header");
  if (std::string_view(magic, 4) != "PANO") fail(ErrorCode::Schema, "panorama file has bad magic");
  PanoramaGeometry geometry;
  geometry.rows = binary::read_le<std::uint16_t>(is);
  geometry.cols = binary::read_le<std::uint16_t>(is);
  geometry.max_depth = max_depth;
  binary::read_le<std::uint32_t>(is);
  binary::read_le<std::uint32_t>(is);
  DepthPanorama pano(geometry);
  binary::read_f32_block(is, pano.data());
  return pano;
}

void save_panorama(const std::filesystem::path& path, const DepthPanorama& panorama) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_panorama(os, panorama);
}

DepthPanorama load_panorama(const std::filesystem::path& path, float max_depth) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open " + path.string());
  return read_panorama(is, max_depth);
}

void save_panorama_pgm(const std::filesystem::path& path, const DepthPanorama& panorama) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  os << "P5\n" << panorama.cols() << ' ' << panorama.rows() << "\n255\n";
  const float max_depth = panorama.geometry().max_depth;
  for (float d : panorama.data()) {
    const float scaled = std::clamp(d / max_depth, 0.0f, 1.0f) * 255.0f;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  if (!os) fail(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace swayrisk
