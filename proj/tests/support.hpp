#pragma once

// Hand-rolled generators shared by the unit, property and acceptance tests.

#include <mvseg/correspondence.hpp>
#include <mvseg/ingest.hpp>
#include <mvseg/proj_bev.hpp>
#include <mvseg/proj_rv.hpp>
#include <mvseg/types.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * (static_cast<double>(rng_() >> 11) * 0x1.0p-53);
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return uniform() < p; }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Points scattered in a shell around the sensor; no point at the origin.
inline mvseg::PointCloud random_cloud(Gen& g, int n, int num_classes = 0, double r_lo = 1.0, double r_hi = 60.0) {
  mvseg::PointCloud c;
  c.points.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    const double r = g.uniform(r_lo, r_hi);
    const double az = g.uniform(-std::numbers::pi, std::numbers::pi);
    const double el = g.uniform(-0.5, 0.1);
    c.points.row(i) << static_cast<float>(r * std::cos(el) * std::cos(az)),
        static_cast<float>(r * std::cos(el) * std::sin(az)), static_cast<float>(r * std::sin(el)),
        static_cast<float>(g.uniform());
  }
  if (num_classes > 0) {
    c.labels.resize(static_cast<std::size_t>(n));
    for (auto& l : c.labels) l = g.integer(0, num_classes - 1);
  }
  return c;
}

/// Points clustered so that several of them share range-image pixels and BEV cells.
inline mvseg::PointCloud clustered_cloud(Gen& g, int n, int num_classes = 0) {
  mvseg::PointCloud c;
  c.points.resize(n, 4);
  const int centers = std::max(1, n / 20);
  std::vector<Eigen::Vector3d> mid(static_cast<std::size_t>(centers));
  for (auto& m : mid) {
    const double r = g.uniform(4.0, 45.0), az = g.uniform(-std::numbers::pi, std::numbers::pi);
    m = {r * std::cos(az), r * std::sin(az), g.uniform(-2.0, 1.0)};
  }
  for (int i = 0; i < n; ++i) {
    const auto& m = mid[static_cast<std::size_t>(g.integer(0, centers - 1))];
    const double s = g.uniform(0.5, 4.0);  // push along the ray to create range collisions
    c.points.row(i) << static_cast<float>(m.x() * s + g.uniform(-0.05, 0.05)),
        static_cast<float>(m.y() * s + g.uniform(-0.05, 0.05)), static_cast<float>(m.z() * s * 0.3),
        static_cast<float>(g.uniform());
  }
  if (num_classes > 0) {
    c.labels.resize(static_cast<std::size_t>(n));
    for (auto& l : c.labels) l = g.integer(0, num_classes - 1);
  }
  return c;
}

template <typename Scalar>
mvseg::FeatureMap<Scalar> random_map(Gen& g, int h, int w, int c) {
  mvseg::FeatureMap<Scalar> m(h, w, c);
  for (Eigen::Index k = 0; k < m.data.size(); ++k) m.data.data()[k] = static_cast<Scalar>(g.uniform(-1.0, 1.0));
  return m;
}

inline mvseg::Correspondence random_correspondence(Gen& g, int th, int tw, int sh, int sw, double sentinel = 0.3) {
  mvseg::Correspondence c(th, tw, sh, sw);
  for (Eigen::Index k = 0; k < c.coords.rows(); ++k) {
    if (g.chance(sentinel)) continue;
    c.coords(k, 0) = g.integer(0, sh - 1);
    c.coords(k, 1) = g.integer(0, sw - 1);
  }
  return c;
}

/// Random row-stochastic N x C matrix.
inline mvseg::RowMatrix<double> random_probs(Gen& g, int n, int c) {
  mvseg::RowMatrix<double> p(n, c);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < c; ++k) p(i, k) = g.uniform(0.01, 1.0);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline mvseg::SynthConfig small_synth(int beams = 16, int steps = 256) {
  auto c = mvseg::SynthConfig::street();
  c.num_beams = beams;
  c.points_per_beam = steps;
  return c;
}

// Brute-force composition straight from the cloud: nearest point per RV pixel,
// highest point per BEV cell, then each view's pixel of that point.
struct BruteViews {
  std::vector<std::pair<int, int>> rv_of, bev_of;  // per point, (-1, -1) when absent
  std::vector<std::int32_t> rv_kept, bev_kept;     // per pixel
};

inline BruteViews brute_views(const mvseg::PointCloud& cloud, const mvseg::RvSensorConfig& rc, const mvseg::BevGridConfig& bc) {
  BruteViews b;
  const auto n = static_cast<std::size_t>(cloud.size());
  b.rv_of.assign(n, {-1, -1});
  b.bev_of.assign(n, {-1, -1});
  b.rv_kept.assign(static_cast<std::size_t>(rc.height * rc.width), -1);
  b.bev_kept.assign(static_cast<std::size_t>(bc.radial_bins * bc.angular_bins), -1);
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = cloud.xyz(static_cast<Eigen::Index>(k));
    if (p.isZero()) continue;
    const auto s = mvseg::spherical_coords(p);
    const auto px = mvseg::rv_pixel(s.azimuth, s.elevation, rc);
    const int i = mvseg::discretize(px.v, rc.height), j = mvseg::discretize(px.u, rc.width);
    b.rv_of[k] = {i, j};
    auto& kept = b.rv_kept[static_cast<std::size_t>(i * rc.width + j)];
    if (kept < 0 || s.range < cloud.xyz(kept).norm()) kept = static_cast<std::int32_t>(k);
    if (const auto cell = mvseg::polar_cell(p, bc)) {
      b.bev_of[k] = {cell->u, cell->v};
      auto& rep = b.bev_kept[static_cast<std::size_t>(cell->u * bc.angular_bins + cell->v)];
      if (rep < 0 || p.z() > cloud.xyz(rep).z()) rep = static_cast<std::int32_t>(k);
    }
  }
  return b;
}

}  // namespace testing
