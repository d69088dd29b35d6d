#pragma once

#include "mvseg/errors.hpp"
#include "mvseg/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace mvseg {

/// Nearest-pixel gather of map[u_n, v_n, :] for every point; sentinel points get zero rows.
template <typename Scalar>
PointScores<Scalar> grid_sample(const FeatureMap<Scalar>& map, const PointPixelMap& pix) {
  if (pix.height != map.height || pix.width != map.width)
    throw ShapeMismatch("grid_sample: pixel map refers to a " + std::to_string(pix.height) + "x" +
                        std::to_string(pix.width) + " raster, feature map is " + std::to_string(map.height) + "x" +
                        std::to_string(map.width));
  PointScores<Scalar> out = PointScores<Scalar>::Zero(pix.size(), map.channels());
  for (Eigen::Index n = 0; n < pix.size(); ++n) {
    if (!pix.valid(n)) continue;
    const auto u = pix.coords(n, 0), v = pix.coords(n, 1);
    if (u >= map.height || v < 0 || v >= map.width) throw ShapeMismatch("grid_sample: pixel outside the map");
    out.row(n) = map.pixel(u, v);
  }
  return out;
}

/// Row-wise argmax; ties go to the smallest class id.
template <typename Derived>
std::vector<std::int32_t> argmax_labels(const Eigen::MatrixBase<Derived>& scores) {
  if (scores.cols() < 1) throw ShapeMismatch("argmax_labels: need at least one class");
  std::vector<std::int32_t> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(best);
  }
  return out;
}

/// Forward-only kernel point convolution with linear correlation.
struct KpconvParams {
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> kernel_points;  // K offsets, meters
  std::vector<RowMatrix<double>> weights;                                   // K matrices, C_in x C_out
  double sigma = 0.3;   // influence distance
  double radius = 0.6;  // neighborhood radius

  int num_kernel_points() const { return static_cast<int>(kernel_points.rows()); }
  int in_channels() const { return weights.empty() ? 0 : static_cast<int>(weights.front().rows()); }
  int out_channels() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  void check() const;

  /// One point at the origin plus K - 1 points on a Fibonacci sphere of radius 0.6 * sigma.
  static Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> disposition(int k, double sigma);

  /// Default layout with every weight matrix set to `w`.
  static KpconvParams uniform(const RowMatrix<double>& w, int k = 15, double radius = 0.6, double sigma = 0.3);
  static KpconvParams random(int in, int out, std::uint64_t seed, int k = 15, double radius = 0.6, double sigma = 0.3);
};

/// For every point i, each neighbor j (||x_j - x_i|| <= radius, i itself always included)
/// contributes sum_k h(j,k) / sum_k' h(j,k') * feats_j * W_k with
/// h(j,k) = max(0, 1 - ||x_j - x_i - k_k|| / sigma); contributions are averaged over the
/// neighbors with non-zero total influence. A point with no such neighbor returns its own
/// feature through the kernel point closest to the center.
///
/// Neighbors are accumulated in an order fixed by their relative offset and features, so
/// results are bitwise invariant to point order and to exactly representable translations.
PointScores<double> kpconv_forward(const PointCloud& cloud, const PointScores<double>& feats, const KpconvParams& p);

/// kpconv_forward over the channel concatenation [f_r | f_b].
PointScores<double> fuse_predictions(const PointScores<double>& f_r, const PointScores<double>& f_b,
                                     const PointCloud& cloud, const KpconvParams& p);

/// Majority vote over the k nearest points (self included) whose range differs by at
/// most `cutoff`; ties keep the point's own label.
std::vector<std::int32_t> knn_postprocess(const PointCloud& cloud, const std::vector<std::int32_t>& labels,
                                          const std::vector<double>& ranges, int k, double cutoff);

/// Euclidean norm of every point, the range input of knn_postprocess.
std::vector<double> point_ranges(const PointCloud& cloud);

}  // namespace mvseg
