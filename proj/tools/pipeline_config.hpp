#pragma once

#include <mvseg/ingest.hpp>
#include <mvseg/proj_bev.hpp>
#include <mvseg/proj_rv.hpp>

#include <filesystem>
#include <string>

namespace mvflow {

/// Sensor, grid, taxonomy and synthetic-scene settings for one run.
///
/// JSON layout: {"preset": "semantickitti" | "nuscenes",
///               "rv": {"height", "width", "fov_up_deg", "fov_down_deg"},
///               "bev": {"radial_bins", "angular_bins", "z_bins", "r_min", "r_max", "z_min", "z_max"},
///               "classmap": {... ClassMap::from_json keys ...},
///               "synth": {... SynthConfig::from_json keys ...}}
/// Every section is optional; missing keys fall back to the preset.
struct PipelineConfig {
  std::string preset = "semantickitti";
  mvseg::RvSensorConfig rv;
  mvseg::BevGridConfig bev;
  mvseg::ClassMap classes;
  mvseg::SynthConfig synth;

  static PipelineConfig from_preset(const std::string& name);
  static PipelineConfig from_json(const std::string& text, const std::string& fallback_preset);
  /// `path` empty -> preset only.
  static PipelineConfig load(const std::filesystem::path& path, const std::string& fallback_preset);
};

}  // namespace mvflow
