#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace mvseg {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N x 4 rows of (x, y, z, remission), stored exactly as the scan file lays them out.
using PointMatrix = Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor>;

/// H x W raster of point indices (-1 where empty).
using IndexRaster = RowMatrix<std::int32_t>;

/// H x W raster of class ids.
using LabelRaster = RowMatrix<std::int32_t>;

using CloudFingerprint = std::uint64_t;

struct PointCloud {
  PointMatrix points;
  std::vector<std::int32_t> labels;    // empty when the cloud is unlabeled
  std::vector<std::int32_t> ring_ids;  // empty when the sensor did not report rings

  Eigen::Index size() const { return points.rows(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_rings() const { return !ring_ids.empty(); }

  Eigen::Vector3d xyz(Eigen::Index i) const {
    return points.row(i).head<3>().transpose().cast<double>();
  }
  float remission(Eigen::Index i) const { return points(i, 3); }
};

/// Checks the PointCloud invariants; throws MalformedInput on violation.
/// Pass num_classes/num_beams <= 0 to skip the corresponding range check.
void validate(const PointCloud& cloud, int num_classes = 0, int ignore_id = -1, int num_beams = 0);

/// Hash of N and the first/last point records; identifies which cloud a view came from.
CloudFingerprint fingerprint(const PointCloud& cloud);

/// Dense H x W x C raster. Row (i * width + j) of `data` holds the channels of pixel (i, j),
/// which is the channel-interleaved row-major layout of the on-disk view format.
template <typename Scalar>
struct FeatureMap {
  int height = 0;
  int width = 0;
  RowMatrix<Scalar> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c) : height(h), width(w), data(RowMatrix<Scalar>::Zero(Eigen::Index(h) * w, c)) {}

  int channels() const { return static_cast<int>(data.cols()); }
  Eigen::Index pixels() const { return Eigen::Index(height) * width; }
  Eigen::Index index(int i, int j) const { return Eigen::Index(i) * width + j; }

  auto pixel(int i, int j) { return data.row(index(i, j)); }
  auto pixel(int i, int j) const { return data.row(index(i, j)); }

  Scalar& operator()(int i, int j, int c) { return data(index(i, j), c); }
  Scalar operator()(int i, int j, int c) const { return data(index(i, j), c); }

  bool same_shape(const FeatureMap& o) const {
    return height == o.height && width == o.width && channels() == o.channels();
  }
};

/// Per-point pixel coordinates (row, column) in one view; (-1, -1) marks points the view does not hold.
struct PointPixelMap {
  int height = 0;  // raster shape these coordinates refer to
  int width = 0;
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, 2, Eigen::RowMajor> coords;

  Eigen::Index size() const { return coords.rows(); }
  bool valid(Eigen::Index n) const { return coords(n, 0) >= 0; }
};

/// N x C per-point class scores.
template <typename Scalar>
using PointScores = RowMatrix<Scalar>;

}  // namespace mvseg
