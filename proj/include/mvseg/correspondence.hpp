#pragma once

#include "mvseg/proj_bev.hpp"
#include "mvseg/proj_rv.hpp"
#include "mvseg/types.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace mvseg {

/// Per-pixel map from a target view to (row, column) pixels of a source view.
/// (-1, -1) marks target pixels without a counterpart.
struct Correspondence {
  int target_height = 0;
  int target_width = 0;
  int source_height = 0;
  int source_width = 0;
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, 2, Eigen::RowMajor> coords;  // row i * target_width + j

  Correspondence() = default;
  /// All-sentinel map of the given shapes.
  Correspondence(int th, int tw, int sh, int sw);

  Eigen::Index index(int i, int j) const { return Eigen::Index(i) * target_width + j; }
  bool valid(int i, int j) const { return coords(index(i, j), 0) >= 0; }
  Eigen::Index valid_count() const { return (coords.col(0).array() >= 0).count(); }

  /// Throws ShapeMismatch if any non-sentinel entry lies outside the source raster.
  void check() const;
};

/// RV pixel -> BEV pixel through the point each RV pixel holds.
Correspondence compose_r2b(const RangeImage& rv, const BevImage& bev);

/// BEV cell -> RV pixel of the cell's representative point.
Correspondence compose_b2r(const BevImage& bev, const RangeImage& rv);

/// Resamples the target grid by nearest full-resolution pixel and rescales source
/// coordinates with floor; sentinels stay sentinels.
Correspondence scale_correspondence(const Correspondence& c, int target_height, int target_width,
                                    int source_height, int source_width);

/// Same floor rescaling for a per-point pixel map.
PointPixelMap scale_pixel_map(const PointPixelMap& pix, int height, int width);

}  // namespace mvseg
