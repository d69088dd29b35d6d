#include "mvseg/correspondence.hpp"

#include "mvseg/errors.hpp"

namespace mvseg {

Correspondence::Correspondence(int th, int tw, int sh, int sw)
    : target_height(th), target_width(tw), source_height(sh), source_width(sw) {
  coords.setConstant(Eigen::Index(th) * tw, 2, -1);
}

void Correspondence::check() const {
  if (coords.rows() != Eigen::Index(target_height) * target_width)
    throw_shape("correspondence rows", Eigen::Index(target_height) * target_width, coords.rows());
  for (Eigen::Index k = 0; k < coords.rows(); ++k) {
    const auto u = coords(k, 0), v = coords(k, 1);
    if (u < 0 && v < 0) continue;
    if (u < 0 || v < 0 || u >= source_height || v >= source_width)
      throw ShapeMismatch("correspondence entry " + std::to_string(k) + " points outside the source raster");
  }
}

Correspondence compose_r2b(const RangeImage& rv, const BevImage& bev) {
  if (rv.source != bev.source) throw SourceMismatch("range and BEV images come from different clouds");
  Correspondence c(rv.height(), rv.width(), bev.height(), bev.width());
  const auto n = bev.point_pixels.size();
  for (int i = 0; i < rv.height(); ++i)
    for (int j = 0; j < rv.width(); ++j) {
      const std::int32_t k = rv.point_index(i, j);
      if (k < 0 || k >= n) continue;
      c.coords.row(c.index(i, j)) = bev.point_pixels.coords.row(k);
    }
  return c;
}

Correspondence compose_b2r(const BevImage& bev, const RangeImage& rv) {
  if (rv.source != bev.source) throw SourceMismatch("range and BEV images come from different clouds");
  Correspondence c(bev.height(), bev.width(), rv.height(), rv.width());
  const auto n = rv.point_pixels.size();
  for (int u = 0; u < bev.height(); ++u)
    for (int v = 0; v < bev.width(); ++v) {
      const std::int32_t k = bev.representative_index(u, v);
      if (k < 0 || k >= n) continue;
      c.coords.row(c.index(u, v)) = rv.point_pixels.coords.row(k);
    }
  return c;
}

Correspondence scale_correspondence(const Correspondence& c, int target_height, int target_width,
                                    int source_height, int source_width) {
  if (target_height < 1 || target_width < 1 || source_height < 1 || source_width < 1)
    throw ConfigError("scaled correspondence dimensions must be >= 1");
  Correspondence out(target_height, target_width, source_height, source_width);
  for (int i = 0; i < target_height; ++i) {
    const int fi = static_cast<int>(std::int64_t(i) * c.target_height / target_height);
    for (int j = 0; j < target_width; ++j) {
      const int fj = static_cast<int>(std::int64_t(j) * c.target_width / target_width);
      const auto k = c.index(fi, fj);
      const std::int32_t u = c.coords(k, 0), v = c.coords(k, 1);
      if (u < 0) continue;
      out.coords.row(out.index(i, j))
          << static_cast<std::int32_t>(std::int64_t(u) * source_height / c.source_height),
          static_cast<std::int32_t>(std::int64_t(v) * source_width / c.source_width);
    }
  }
  return out;
}

PointPixelMap scale_pixel_map(const PointPixelMap& pix, int height, int width) {
  if (height < 1 || width < 1) throw ConfigError("scaled pixel map dimensions must be >= 1");
  PointPixelMap out;
  out.height = height;
  out.width = width;
  out.coords.resize(pix.size(), 2);
  for (Eigen::Index n = 0; n < pix.size(); ++n) {
    if (!pix.valid(n)) {
      out.coords.row(n) << -1, -1;
      continue;
    }
    out.coords.row(n) << static_cast<std::int32_t>(std::int64_t(pix.coords(n, 0)) * height / pix.height),
        static_cast<std::int32_t>(std::int64_t(pix.coords(n, 1)) * width / pix.width);
  }
  return out;
}

}  // namespace mvseg
