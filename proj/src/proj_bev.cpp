#include "mvseg/proj_bev.hpp"

#include "mvseg/errors.hpp"
#include "mvseg/parallel.hpp"
#include "mvseg/proj_rv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mvseg {

void BevGridConfig::check() const {
  if (radial_bins < 1 || angular_bins < 1 || z_bins < 1) throw ConfigError("BEV bin counts must be >= 1");
  if (!(r_min < r_max)) throw ConfigError("BEV radius range is empty");
  if (!(z_min < z_max)) throw ConfigError("BEV z range is empty");
}

BevGridConfig BevGridConfig::semantickitti() { return {480, 360, 32, 3.0, 50.0, -3.0, 1.5}; }

BevGridConfig BevGridConfig::nuscenes() { return {480, 360, 32, 0.0, 50.0, -5.0, 3.0}; }

BevGridConfig BevGridConfig::preset(const std::string& name) {
  if (name == "semantickitti") return semantickitti();
  if (name == "nuscenes") return nuscenes();
  throw ConfigError("unknown BEV preset '" + name + "'");
}

std::optional<BevCell> polar_cell(const Eigen::Vector3d& p, const BevGridConfig& cfg) {
  const double rho = std::hypot(p.x(), p.y());
  if (!(rho >= cfg.r_min && rho <= cfg.r_max && p.z() >= cfg.z_min && p.z() <= cfg.z_max)) return std::nullopt;
  const double theta = rho == 0.0 ? 0.0 : std::atan2(p.y(), p.x());
  BevCell c;
  c.u = discretize((rho - cfg.r_min) / (cfg.r_max - cfg.r_min) * cfg.radial_bins, cfg.radial_bins);
  c.v = discretize((theta + std::numbers::pi) / (2.0 * std::numbers::pi) * cfg.angular_bins, cfg.angular_bins);
  return c;
}

BevFeature point_bev_features(const Eigen::Vector3d& p, float remission, const BevCell& cell,
                              const BevGridConfig& cfg) {
  const double rho = std::hypot(p.x(), p.y());
  const double theta = rho == 0.0 ? 0.0 : std::atan2(p.y(), p.x());
  const double rho_step = (cfg.r_max - cfg.r_min) / cfg.radial_bins;
  const double theta_step = 2.0 * std::numbers::pi / cfg.angular_bins;
  const double z_step = (cfg.z_max - cfg.z_min) / cfg.z_bins;
  const int w = discretize((p.z() - cfg.z_min) / (cfg.z_max - cfg.z_min) * cfg.z_bins, cfg.z_bins);

  const double rho_c = cfg.r_min + (cell.u + 0.5) * rho_step;
  const double theta_c = -std::numbers::pi + (cell.v + 0.5) * theta_step;
  const double z_c = cfg.z_min + (w + 0.5) * z_step;

  BevFeature f;
  f << rho - rho_c, theta - theta_c, p.z() - z_c, rho, theta, p.z(), p.x(), p.y(), remission;
  return f;
}

BevImage project_bev(const PointCloud& cloud, const BevGridConfig& cfg, int ignore_id) {
  cfg.check();
  const int h = cfg.radial_bins, w = cfg.angular_bins;
  const auto n = cloud.size();

  BevImage img;
  img.source = fingerprint(cloud);
  img.features = FeatureMap<float>(h, w, BevImage::kChannels);
  img.representative_index = IndexRaster::Constant(h, w, -1);
  img.point_pixels.height = h;
  img.point_pixels.width = w;
  img.point_pixels.coords.resize(n, 2);

  RowMatrix<float> point_features(n, BevImage::kChannels);
  parallel_for(static_cast<std::size_t>(n), 16384, [&](std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
      const Eigen::Vector3d p = cloud.xyz(i);
      const auto cell = polar_cell(p, cfg);
      if (!cell) {
        img.point_pixels.coords.row(i) << -1, -1;
        continue;
      }
      img.point_pixels.coords.row(i) << cell->u, cell->v;
      point_features.row(i) = point_bev_features(p, cloud.remission(i), *cell, cfg).cast<float>().transpose();
    }
  });

  // Bucket point indices by cell, ascending point index within each cell.
  const std::size_t cells = static_cast<std::size_t>(h) * w;
  std::vector<std::uint32_t> start(cells + 1, 0);
  for (Eigen::Index i = 0; i < n; ++i)
    if (img.point_pixels.valid(i))
      ++start[static_cast<std::size_t>(img.point_pixels.coords(i, 0)) * w + img.point_pixels.coords(i, 1) + 1];
  for (std::size_t c = 0; c < cells; ++c) start[c + 1] += start[c];
  std::vector<std::int32_t> members(start[cells]);
  {
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (Eigen::Index i = 0; i < n; ++i)
      if (img.point_pixels.valid(i))
        members[fill[static_cast<std::size_t>(img.point_pixels.coords(i, 0)) * w + img.point_pixels.coords(i, 1)]++] =
            static_cast<std::int32_t>(i);
  }

  const bool labeled = cloud.has_labels();
  if (labeled) img.labels = LabelRaster::Constant(h, w, ignore_id);

  parallel_for(cells, 4096, [&](std::size_t begin, std::size_t end) {
    std::vector<std::int32_t> votes;
    for (std::size_t c = begin; c < end; ++c) {
      if (start[c] == start[c + 1]) continue;
      const int u = static_cast<int>(c / w), v = static_cast<int>(c % w);
      auto feat = img.features.pixel(u, v);
      std::int32_t rep = -1;
      votes.clear();
      for (auto m = start[c]; m < start[c + 1]; ++m) {
        const std::int32_t k = members[m];
        if (rep < 0) {
          feat = point_features.row(k);
          rep = k;
        } else {
          feat = feat.cwiseMax(point_features.row(k));
          if (cloud.points(k, 2) > cloud.points(rep, 2)) rep = k;
        }
        if (labeled && cloud.labels[static_cast<std::size_t>(k)] != ignore_id)
          votes.push_back(cloud.labels[static_cast<std::size_t>(k)]);
      }
      img.representative_index(u, v) = rep;
      if (labeled && !votes.empty()) {
        std::sort(votes.begin(), votes.end());
        std::int32_t best = votes.front();
        std::size_t best_count = 0;
        for (std::size_t a = 0; a < votes.size();) {
          std::size_t b = a;
          while (b < votes.size() && votes[b] == votes[a]) ++b;
          if (b - a > best_count) {  // strict: ties keep the smaller class id
            best_count = b - a;
            best = votes[a];
          }
          a = b;
        }
        img.labels(u, v) = best;
      }
    }
  });
  return img;
}

}  // namespace mvseg
