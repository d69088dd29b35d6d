#pragma once

#include "mvseg/types.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>

namespace mvseg {

/// Polar bird's-eye-view grid: radial bins along rows, angular bins along columns.
struct BevGridConfig {
  int radial_bins = 480;
  int angular_bins = 360;
  int z_bins = 32;
  double r_min = 3.0;
  double r_max = 50.0;
  double z_min = -3.0;
  double z_max = 1.5;

  void check() const;

  static BevGridConfig semantickitti();
  static BevGridConfig nuscenes();
  static BevGridConfig preset(const std::string& name);
};

struct BevCell {
  int u = -1;  // radial bin
  int v = -1;  // angular bin
};

/// Polar cell of a point, or nullopt when rho or z fall outside the grid ranges.
std::optional<BevCell> polar_cell(const Eigen::Vector3d& p, const BevGridConfig& cfg);

using BevFeature = Eigen::Matrix<double, 9, 1>;

/// [d_rho, d_theta, d_z, rho, theta, z, x, y, remission]; the offsets are taken from the
/// centre of the point's (rho, theta, z) voxel.
BevFeature point_bev_features(const Eigen::Vector3d& p, float remission, const BevCell& cell, const BevGridConfig& cfg);

struct BevImage {
  static constexpr int kChannels = 9;

  FeatureMap<float> features;        // per-channel max over the cell's points
  LabelRaster labels;                // majority vote, empty unless the cloud carries labels
  PointPixelMap point_pixels;        // (u, v) of every point, (-1, -1) outside the grid
  IndexRaster representative_index;  // highest point of each cell, -1 when empty
  CloudFingerprint source = 0;

  int height() const { return features.height; }
  int width() const { return features.width; }
};

BevImage project_bev(const PointCloud& cloud, const BevGridConfig& cfg, int ignore_id = 255);

}  // namespace mvseg
