#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

namespace mvseg {

/// Uniform voxel hash over a fixed point set for exact radius and k-nearest queries.
/// Built once, read-only afterwards (safe to query from several threads).
class NeighborIndex {
 public:
  using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

  NeighborIndex(Points points, double cell_size);

  const Points& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }

  /// Indices j with ||p_j - q|| <= r, ascending.
  void radius(const Eigen::Vector3d& q, double r, std::vector<std::int32_t>& out) const;

  /// Up to k points nearest to q among those accepted by `keep`, ordered by
  /// (distance, index).
  void knn(const Eigen::Vector3d& q, int k, const std::function<bool(std::int32_t)>& keep,
           std::vector<std::int32_t>& out) const;

 private:
  struct Span {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  static std::uint64_t key(std::int64_t x, std::int64_t y, std::int64_t z);
  Eigen::Array3i cell_of(const Eigen::Vector3d& p) const;
  const Span* find(std::int64_t x, std::int64_t y, std::int64_t z) const;

  Points points_;
  double cell_;
  std::vector<std::int32_t> order_;  // point ids grouped by cell
  std::unordered_map<std::uint64_t, Span> cells_;
  Eigen::Array3i lo_ = Eigen::Array3i::Zero();
  Eigen::Array3i hi_ = Eigen::Array3i::Zero();
};

}  // namespace mvseg
