#pragma once

// Pieces shared by the flow and bench commands: lifting raw view features to a
// C-channel map and building the pyramid levels the flow step runs on.

#include <mvseg/correspondence.hpp>
#include <mvseg/geoflow.hpp>
#include <mvseg/proj_bev.hpp>
#include <mvseg/proj_rv.hpp>

#include <cstdint>
#include <vector>

namespace mvflow {

/// Deterministic 1x1 projection of raw view channels to `channels` features;
/// empty pixels (no point) stay zero.
mvseg::FeatureMap<float> lift_features(const mvseg::FeatureMap<float>& raw, const mvseg::IndexRaster& occupancy,
                                       int channels, std::uint64_t seed);

/// Nearest downsampling with the correspondence-scaling rule: pixel i' reads row floor(i' * H / H').
mvseg::FeatureMap<float> downsample(const mvseg::FeatureMap<float>& map, int height, int width);

/// floor(size * scale), at least 1.
int scaled_size(int size, double scale);

struct FlowLevel {
  double scale = 1.0;
  mvseg::FeatureMap<float> m_r, m_b;
  mvseg::Correspondence r2b, b2r;
};

/// Downsampled maps for one scale with matching correspondences.
FlowLevel make_level(const mvseg::FeatureMap<float>& m_r, const mvseg::FeatureMap<float>& m_b,
                     const mvseg::Correspondence& r2b, const mvseg::Correspondence& b2r, double scale);

}  // namespace mvflow
