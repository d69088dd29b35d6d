#include "mvseg/proj_rv.hpp"

#include "mvseg/errors.hpp"
#include "mvseg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mvseg {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::int32_t kNoRing = -1;

struct Placement {
  std::vector<std::int32_t> row;  // -1 for dropped points
  std::vector<std::int32_t> col;
  std::vector<double> range;
  std::size_t dropped = 0;
};

// Per-point work, independent across points.
Placement place_points(const PointCloud& cloud, const RvSensorConfig& cfg, const std::vector<std::int32_t>* rings) {
  const auto n = static_cast<std::size_t>(cloud.size());
  Placement pl;
  pl.row.assign(n, -1);
  pl.col.assign(n, -1);
  pl.range.assign(n, 0.0);
  parallel_for(n, 16384, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::Vector3d p = cloud.xyz(static_cast<Eigen::Index>(i));
      const double r = p.norm();
      if (r == 0.0) continue;
      const Spherical s = spherical_coords(p);
      const RvCoord c = rv_pixel(s.azimuth, s.elevation, cfg);
      pl.col[i] = discretize(c.u, cfg.width);
      pl.row[i] = rings ? std::min((*rings)[i], cfg.height - 1) : discretize(c.v, cfg.height);
      pl.range[i] = s.range;
    }
  });
  for (std::size_t i = 0; i < n; ++i) pl.dropped += pl.row[i] < 0;
  return pl;
}

RangeImage rasterize(const PointCloud& cloud, const RvSensorConfig& cfg, const Placement& pl, RvVariant variant,
                     int ignore_id) {
  const int h = cfg.height, w = cfg.width;
  const auto n = static_cast<std::size_t>(cloud.size());

  RangeImage img;
  img.variant = variant;
  img.source = fingerprint(cloud);
  img.dropped = pl.dropped;
  img.features = FeatureMap<float>(h, w, RangeImage::kChannels);
  img.point_index = IndexRaster::Constant(h, w, -1);
  img.point_pixels.height = h;
  img.point_pixels.width = w;
  img.point_pixels.coords.resize(static_cast<Eigen::Index>(n), 2);

  // Serial min-by-range reduction in point order: the first of equal ranges wins,
  // which is the smaller index.
  std::vector<double> best(static_cast<std::size_t>(h) * w, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto ei = static_cast<Eigen::Index>(i);
    img.point_pixels.coords(ei, 0) = pl.row[i];
    img.point_pixels.coords(ei, 1) = pl.col[i];
    if (pl.row[i] < 0) continue;
    const std::size_t px = static_cast<std::size_t>(pl.row[i]) * w + pl.col[i];
    if (pl.range[i] < best[px]) {
      best[px] = pl.range[i];
      img.point_index(pl.row[i], pl.col[i]) = static_cast<std::int32_t>(i);
    }
  }

  if (cloud.has_labels()) img.labels = LabelRaster::Constant(h, w, ignore_id);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::int32_t k = img.point_index(i, j);
      if (k < 0) continue;
      auto px = img.features.pixel(i, j);
      px[0] = cloud.points(k, 0);
      px[1] = cloud.points(k, 1);
      px[2] = cloud.points(k, 2);
      px[3] = static_cast<float>(pl.range[static_cast<std::size_t>(k)]);
      px[4] = cloud.points(k, 3);
      if (cloud.has_labels()) img.labels(i, j) = cloud.labels[static_cast<std::size_t>(k)];
    }
  }
  return img;
}

}  // namespace

void RvSensorConfig::check() const {
  if (height < 1 || width < 1) throw ConfigError("range image size must be at least 1 x 1");
  if (!(fov_up > fov_down)) throw ConfigError("fov_up must exceed fov_down");
}

RvSensorConfig RvSensorConfig::semantickitti() { return {64, 2048, 3.0 * kDeg, -25.0 * kDeg}; }

RvSensorConfig RvSensorConfig::nuscenes() { return {32, 1024, 10.0 * kDeg, -30.0 * kDeg}; }

RvSensorConfig RvSensorConfig::preset(const std::string& name) {
  if (name == "semantickitti") return semantickitti();
  if (name == "nuscenes") return nuscenes();
  throw ConfigError("unknown sensor preset '" + name + "'");
}

Spherical spherical_coords(const Eigen::Vector3d& p) {
  const double r = p.norm();
  if (r == 0.0) throw DegeneratePoint("point at the sensor origin has no direction");
  Spherical s;
  s.range = r;
  s.azimuth = (p.x() == 0.0 && p.y() == 0.0) ? 0.0 : std::atan2(p.y(), p.x());
  s.elevation = std::asin(std::clamp(p.z() / r, -1.0, 1.0));
  return s;
}

RvCoord rv_pixel(double azimuth, double elevation, const RvSensorConfig& cfg) {
  return {(1.0 - azimuth / std::numbers::pi) / 2.0 * cfg.width, (cfg.fov_up - elevation) / cfg.fov() * cfg.height};
}

int discretize(double coord, int size) {
  const double f = std::floor(coord);
  if (!(f >= 0.0)) return 0;
  if (f >= size - 1) return size - 1;
  return static_cast<int>(f);
}

RangeImage project_rv_original(const PointCloud& cloud, const RvSensorConfig& cfg, int ignore_id) {
  cfg.check();
  return rasterize(cloud, cfg, place_points(cloud, cfg, nullptr), RvVariant::Original, ignore_id);
}

RangeImage project_rv_scanunfold(const PointCloud& cloud, const RvSensorConfig& cfg, int ignore_id) {
  cfg.check();
  std::vector<std::int32_t> inferred;
  const std::vector<std::int32_t>* rings = &cloud.ring_ids;
  if (!cloud.has_rings()) {
    inferred = infer_rings(cloud);
    rings = &inferred;
  } else if (static_cast<Eigen::Index>(cloud.ring_ids.size()) != cloud.size()) {
    throw MalformedInput("ring id count does not match point count");
  }
  std::int32_t max_ring = -1;
  for (auto r : *rings) max_ring = std::max(max_ring, r);
  if (max_ring >= cfg.height)
    throw ConfigError("scan has " + std::to_string(max_ring + 1) + " rings but the range image has " +
                      std::to_string(cfg.height) + " rows");
  // negative ring ids (origin points) come out with row -1 and count as dropped
  return rasterize(cloud, cfg, place_points(cloud, cfg, rings), RvVariant::ScanUnfold, ignore_id);
}

RangeImage project_rv(const PointCloud& cloud, const RvSensorConfig& cfg, RvVariant variant, int ignore_id) {
  return variant == RvVariant::Original ? project_rv_original(cloud, cfg, ignore_id)
                                        : project_rv_scanunfold(cloud, cfg, ignore_id);
}

std::vector<std::int32_t> infer_rings(const PointCloud& cloud) {
  std::vector<std::int32_t> rings(static_cast<std::size_t>(cloud.size()), kNoRing);
  std::int32_t ring = 0;
  bool have_prev = false;
  double prev = 0.0;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d p = cloud.xyz(i);
    if (p.norm() == 0.0) continue;
    const double psi = spherical_coords(p).azimuth;
    if (have_prev && psi - prev > std::numbers::pi) ++ring;
    rings[static_cast<std::size_t>(i)] = ring;
    prev = psi;
    have_prev = true;
  }
  return rings;
}

double valid_projection_rate(const RangeImage& img) {
  const auto total = img.point_index.size();
  if (total == 0) return 0.0;
  return static_cast<double>((img.point_index.array() >= 0).count()) / static_cast<double>(total);
}

}  // namespace mvseg
