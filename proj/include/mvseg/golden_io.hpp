#pragma once

// Binary formats shared by every module.
//
// View raster:   "GFVW" | u32 H | u32 W | u32 C | u8 dtype | H*W*C values, row-major,
//                channel-interleaved | optional H*W i32 index plane
// Tensor blocks: "GFTB" | u32 count | count x (u32 name_len | name | u8 dtype | u32 ndim |
//                u32 dims[ndim] | values)
// All integers and values little-endian.

#include "mvseg/correspondence.hpp"
#include "mvseg/geoflow.hpp"
#include "mvseg/head.hpp"
#include "mvseg/types.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mvseg {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I32 = 2 };

std::size_t dtype_size(DType t);

/// A decoded view raster; values are kept as raw little-endian bytes.
struct ViewFile {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  DType dtype = DType::F32;
  std::vector<std::byte> values;
  std::optional<IndexRaster> index_plane;

  FeatureMap<float> as_f32() const;
  FeatureMap<double> as_f64() const;
  RowMatrix<std::int32_t> as_i32() const;  // (H*W) x C
};

std::vector<std::byte> encode_view(const FeatureMap<float>& map, const IndexRaster* index_plane = nullptr);
std::vector<std::byte> encode_view(const FeatureMap<double>& map, const IndexRaster* index_plane = nullptr);
/// Integer raster of H x W pixels with `data` holding (H*W) x C values.
std::vector<std::byte> encode_view_i32(std::uint32_t height, std::uint32_t width,
                                       const RowMatrix<std::int32_t>& data);
ViewFile decode_view(std::span<const std::byte> bytes);

/// Correspondences are saved as two-plane i32 rasters over the target grid; the source
/// shape is not part of the raster and must be supplied when reading back.
std::vector<std::byte> encode_correspondence(const Correspondence& c);
Correspondence decode_correspondence(std::span<const std::byte> bytes, int source_height, int source_width);

/// Named tensor with shape; values stored as double in memory.
struct Tensor {
  DType dtype = DType::F64;
  std::vector<std::uint32_t> shape;
  std::vector<double> values;
};

using TensorBlocks = std::map<std::string, Tensor>;

std::vector<std::byte> encode_blocks(const TensorBlocks& blocks);
TensorBlocks decode_blocks(std::span<const std::byte> bytes);

/// Blocks "<prefix>.mu.weight", "<prefix>.mu.bn_gamma", ... plus "<prefix>.kernel" and "<prefix>.gate".
template <typename Scalar>
void put_attention(TensorBlocks& blocks, const std::string& prefix, const AttentionParams<Scalar>& p);
template <typename Scalar>
AttentionParams<Scalar> get_attention(const TensorBlocks& blocks, const std::string& prefix);

void put_kpconv(TensorBlocks& blocks, const std::string& prefix, const KpconvParams& p);
KpconvParams get_kpconv(const TensorBlocks& blocks, const std::string& prefix);

}  // namespace mvseg
