#pragma once

#include "mvseg/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace mvseg {

/// Range-image geometry. Angles in radians.
struct RvSensorConfig {
  int height = 64;
  int width = 2048;
  double fov_up = 3.0 * 3.14159265358979323846 / 180.0;
  double fov_down = -25.0 * 3.14159265358979323846 / 180.0;

  double fov() const { return fov_up - fov_down; }
  void check() const;

  /// 64 x 2048, +3 / -25 degrees (HDL-64E).
  static RvSensorConfig semantickitti();
  /// 32 x 1024, +10 / -30 degrees (HDL-32E).
  static RvSensorConfig nuscenes();
  static RvSensorConfig preset(const std::string& name);
};

enum class RvVariant { Original, ScanUnfold };

struct Spherical {
  double azimuth = 0.0;    // psi in (-pi, pi]
  double elevation = 0.0;  // phi in [-pi/2, pi/2]
  double range = 0.0;
};

/// Continuous (column, row) position before discretization.
struct RvCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Throws DegeneratePoint for the origin. At the pole the azimuth is 0.
Spherical spherical_coords(const Eigen::Vector3d& p);

RvCoord rv_pixel(double azimuth, double elevation, const RvSensorConfig& cfg);

/// floor then clamp into [0, size - 1].
int discretize(double coord, int size);

struct RangeImage {
  static constexpr int kChannels = 5;  // x, y, z, range, remission

  FeatureMap<float> features;
  IndexRaster point_index;     // -1 where no point landed
  LabelRaster labels;          // empty unless the cloud carries labels
  PointPixelMap point_pixels;  // pixel every point projects to, kept or not
  RvVariant variant = RvVariant::Original;
  CloudFingerprint source = 0;
  std::size_t dropped = 0;  // points at the origin

  int height() const { return features.height; }
  int width() const { return features.width; }
};

/// Spherical projection with elevation-binned rows. Collisions keep the nearest point,
/// ties resolved towards the smaller point index.
RangeImage project_rv_original(const PointCloud& cloud, const RvSensorConfig& cfg, int ignore_id = 255);

/// Rows follow the sensor ring of each point, columns follow azimuth. Rings come from
/// cloud.ring_ids when present, otherwise from infer_rings().
RangeImage project_rv_scanunfold(const PointCloud& cloud, const RvSensorConfig& cfg, int ignore_id = 255);

RangeImage project_rv(const PointCloud& cloud, const RvSensorConfig& cfg, RvVariant variant, int ignore_id = 255);

/// Recovers ring ids from capture order: a new ring starts whenever the azimuth jumps
/// up by more than pi between consecutive points. Origin points get ring -1.
std::vector<std::int32_t> infer_rings(const PointCloud& cloud);

double valid_projection_rate(const RangeImage& img);

}  // namespace mvseg
