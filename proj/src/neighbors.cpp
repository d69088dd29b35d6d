#include "mvseg/neighbors.hpp"

#include "mvseg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mvseg {

NeighborIndex::NeighborIndex(Points points, double cell_size) : points_(std::move(points)), cell_(cell_size) {
  if (!(cell_ > 0.0)) throw ConfigError("neighbor index cell size must be positive");
  const auto n = points_.rows();
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(n));
  if (n > 0) {
    lo_ = Eigen::Array3i::Constant(std::numeric_limits<int>::max());
    hi_ = Eigen::Array3i::Constant(std::numeric_limits<int>::min());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Array3i c = cell_of(points_.row(i).transpose());
    lo_ = lo_.min(c);
    hi_ = hi_.max(c);
    keys[static_cast<std::size_t>(i)] = key(c.x(), c.y(), c.z());
  }
  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(), [&](std::int32_t a, std::int32_t b) {
    return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
  });
  for (std::size_t s = 0; s < order_.size();) {
    std::size_t e = s;
    const auto k = keys[static_cast<std::size_t>(order_[s])];
    while (e < order_.size() && keys[static_cast<std::size_t>(order_[e])] == k) ++e;
    cells_[k] = {static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(e)};
    s = e;
  }
}

std::uint64_t NeighborIndex::key(std::int64_t x, std::int64_t y, std::int64_t z) {
  // 21 bits per axis, offset to keep negatives apart
  constexpr std::int64_t off = 1 << 20;
  return (static_cast<std::uint64_t>(x + off) & 0x1fffff) << 42 | (static_cast<std::uint64_t>(y + off) & 0x1fffff) << 21 |
         (static_cast<std::uint64_t>(z + off) & 0x1fffff);
}

Eigen::Array3i NeighborIndex::cell_of(const Eigen::Vector3d& p) const {
  return (p.array() / cell_).floor().cast<int>();
}

const NeighborIndex::Span* NeighborIndex::find(std::int64_t x, std::int64_t y, std::int64_t z) const {
  const auto it = cells_.find(key(x, y, z));
  return it == cells_.end() ? nullptr : &it->second;
}

void NeighborIndex::radius(const Eigen::Vector3d& q, double r, std::vector<std::int32_t>& out) const {
  out.clear();
  if (points_.rows() == 0) return;
  const double slack = r * (1.0 + 1e-9);
  const Eigen::Array3i a = cell_of(q.array() - slack).max(lo_);
  const Eigen::Array3i b = cell_of(q.array() + slack).min(hi_);
  const double r2 = r * r;
  for (int x = a.x(); x <= b.x(); ++x)
    for (int y = a.y(); y <= b.y(); ++y)
      for (int z = a.z(); z <= b.z(); ++z) {
        const Span* s = find(x, y, z);
        if (!s) continue;
        for (auto m = s->begin; m < s->end; ++m) {
          const std::int32_t j = order_[m];
          if ((points_.row(j).transpose() - q).squaredNorm() <= r2) out.push_back(j);
        }
      }
  std::sort(out.begin(), out.end());
}

void NeighborIndex::knn(const Eigen::Vector3d& q, int k, const std::function<bool(std::int32_t)>& keep,
                        std::vector<std::int32_t>& out) const {
  out.clear();
  if (k <= 0 || points_.rows() == 0) return;
  std::vector<std::pair<double, std::int32_t>> found;
  const Eigen::Array3i c = cell_of(q);
  const int max_shell = ((hi_ - c).abs().max((c - lo_).abs())).maxCoeff();
  auto visit = [&](int x, int y, int z) {
    if (x < lo_.x() || x > hi_.x() || y < lo_.y() || y > hi_.y() || z < lo_.z() || z > hi_.z()) return;
    const Span* s = find(x, y, z);
    if (!s) return;
    for (auto m = s->begin; m < s->end; ++m) {
      const std::int32_t j = order_[m];
      if (keep(j)) found.emplace_back((points_.row(j).transpose() - q).squaredNorm(), j);
    }
  };
  for (int shell = 0; shell <= max_shell; ++shell) {
    // once the shell cube dwarfs the occupied cells, a linear pass is cheaper and exact
    const double side = 2.0 * shell + 1.0;
    if (side * side * side > 8.0 * static_cast<double>(cells_.size()) + 64.0) {
      found.clear();
      for (std::int32_t j = 0; j < static_cast<std::int32_t>(points_.rows()); ++j)
        if (keep(j)) found.emplace_back((points_.row(j).transpose() - q).squaredNorm(), j);
      break;
    }
    for (int dx = -shell; dx <= shell; ++dx)
      for (int dy = -shell; dy <= shell; ++dy)
        for (int dz = -shell; dz <= shell; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != shell) continue;
          visit(c.x() + dx, c.y() + dy, c.z() + dz);
        }
    if (static_cast<int>(found.size()) >= k) {
      std::nth_element(found.begin(), found.begin() + (k - 1), found.end());
      // anything outside the searched shells is farther than shell * cell
      const double bound = shell * cell_;
      if (found[static_cast<std::size_t>(k - 1)].first < bound * bound) break;
    }
  }
  std::sort(found.begin(), found.end());
  const auto take = std::min<std::size_t>(found.size(), static_cast<std::size_t>(k));
  for (std::size_t m = 0; m < take; ++m) out.push_back(found[m].second);
}

}  // namespace mvseg
