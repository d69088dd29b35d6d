#include "flow_pipeline.hpp"

#include <mvseg/errors.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace mvflow {

mvseg::FeatureMap<float> lift_features(const mvseg::FeatureMap<float>& raw, const mvseg::IndexRaster& occupancy,
                                       int channels, std::uint64_t seed) {
  if (channels < 1) throw mvseg::ConfigError("feature channels must be >= 1");
  std::mt19937_64 rng(seed);
  mvseg::RowMatrix<float> lift(raw.channels(), channels);
  for (Eigen::Index r = 0; r < lift.rows(); ++r)
    for (Eigen::Index c = 0; c < lift.cols(); ++c)
      lift(r, c) = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * 0.2 - 0.1);
  mvseg::FeatureMap<float> out(raw.height, raw.width, channels);
  out.data.noalias() = raw.data * lift;
  for (int i = 0; i < raw.height; ++i)
    for (int j = 0; j < raw.width; ++j)
      if (occupancy(i, j) < 0) out.pixel(i, j).setZero();
  return out;
}

mvseg::FeatureMap<float> downsample(const mvseg::FeatureMap<float>& map, int height, int width) {
  if (height == map.height && width == map.width) return map;
  mvseg::FeatureMap<float> out(height, width, map.channels());
  for (int i = 0; i < height; ++i) {
    const int si = static_cast<int>(std::int64_t(i) * map.height / height);
    for (int j = 0; j < width; ++j) {
      const int sj = static_cast<int>(std::int64_t(j) * map.width / width);
      out.pixel(i, j) = map.pixel(si, sj);
    }
  }
  return out;
}

int scaled_size(int size, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw mvseg::ConfigError("scales must lie in (0, 1]");
  return std::max(1, static_cast<int>(std::floor(size * scale)));
}

FlowLevel make_level(const mvseg::FeatureMap<float>& m_r, const mvseg::FeatureMap<float>& m_b,
                     const mvseg::Correspondence& r2b, const mvseg::Correspondence& b2r, double scale) {
  FlowLevel l;
  l.scale = scale;
  const int hr = scaled_size(m_r.height, scale), wr = scaled_size(m_r.width, scale);
  const int hb = scaled_size(m_b.height, scale), wb = scaled_size(m_b.width, scale);
  l.m_r = downsample(m_r, hr, wr);
  l.m_b = downsample(m_b, hb, wb);
  l.r2b = mvseg::scale_correspondence(r2b, hr, wr, hb, wb);
  l.b2r = mvseg::scale_correspondence(b2r, hb, wb, hr, wr);
  return l;
}

}  // namespace mvflow
