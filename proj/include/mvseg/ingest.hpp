#pragma once

#include "mvseg/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mvseg {

// ---------------------------------------------------------------------------
// Class taxonomy

/// Raw dataset label id -> contiguous training id, with a reserved ignore id.
struct ClassMap {
  std::map<std::uint32_t, std::int32_t> raw_to_train;
  int num_classes = 0;
  int ignore_id = 255;
  std::vector<std::string> names;  // optional, indexed by train id

  /// Unmapped ids resolve to ignore_id.
  std::int32_t operator()(std::uint32_t raw) const;

  /// Train id t -> t for t in [0, num_classes), everything else -> ignore_id.
  ClassMap identity_extension() const;

  static ClassMap semantickitti();
  static ClassMap nuscenes();
  static ClassMap preset(const std::string& name);

  /// Parses {"preset": ..., "num_classes": ..., "ignore_id": ..., "names": [...],
  /// "raw_to_train": {"40": 8, ...}}. Keys given explicitly override the preset.
  static ClassMap from_json(const std::string& text);
  static ClassMap load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// SemanticKITTI on-disk layout: scans are N x 4 little-endian float32 rows,
// labels are N little-endian uint32 words with the semantic class in the low 16 bits.

PointCloud read_scan(std::span<const std::byte> bytes);
std::vector<std::byte> write_scan(const PointCloud& cloud);

std::vector<std::int32_t> read_labels(std::span<const std::byte> bytes, const ClassMap& map);
std::vector<std::uint32_t> read_label_words(std::span<const std::byte> bytes);
std::vector<std::byte> write_label_words(std::span<const std::uint32_t> words);

/// Pairs a label array with its scan; throws MalformedInput on a length mismatch.
void attach_labels(PointCloud& cloud, std::vector<std::int32_t> labels);

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

PointCloud load_scan(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic spinning-lidar scans

enum class SweepOrder { BeamMajor, AzimuthMajor };
enum class BeamLayout { Uniform, Hdl64 };

struct Box {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
  int label = 0;
};

/// Vertical cylinder with flat top.
struct Cylinder {
  Eigen::Vector2d center;
  double radius = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
  int label = 0;
};

struct SynthConfig {
  int num_beams = 64;
  int points_per_beam = 2048;
  double fov_up = 3.0 * 3.14159265358979323846 / 180.0;     // radians
  double fov_down = -25.0 * 3.14159265358979323846 / 180.0;  // radians
  double dropout = 0.0;
  SweepOrder order = SweepOrder::BeamMajor;
  BeamLayout layout = BeamLayout::Hdl64;

  // Per-beam constant azimuth offset and per-point jitter, both as a fraction of one
  // azimuth step. Their sum stays below 0.5 so every step lands in its own column.
  double beam_azimuth_offset = 0.15;
  double azimuth_jitter = 0.15;
  double elevation_jitter = 0.0002;  // radians, uniform +-
  double range_noise = 0.01;         // meters, standard deviation along the ray

  double ground_z = -1.73;
  double road_half_width = 7.0;
  int road_label = 8;      // road
  int offroad_label = 16;  // terrain
  double wall_radius = 60.0;
  int wall_label = 14;     // vegetation
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  int random_obstacles = 0;  // extra primitives placed from the seed

  /// Street scene with cars, buildings, poles and trunks.
  static SynthConfig street();
  static SynthConfig from_json(const std::string& text);

  /// Beam elevation angles, top beam (ring 0) first.
  std::vector<double> beam_elevations() const;
  void check() const;
};

/// Ray-casts one sweep against the scene. Deterministic for a fixed (config, seed).
PointCloud synth_scan(const SynthConfig& config, std::uint64_t seed);

}  // namespace mvseg
