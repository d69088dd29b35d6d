#include "pipeline_config.hpp"

#include <mvseg/errors.hpp>

#include <json.hpp>

#include <numbers>

namespace mvflow {

namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::from_preset(const std::string& name) {
  PipelineConfig c;
  c.preset = name;
  c.rv = mvseg::RvSensorConfig::preset(name);
  c.bev = mvseg::BevGridConfig::preset(name);
  c.classes = mvseg::ClassMap::preset(name);
  c.synth = mvseg::SynthConfig::street();
  c.synth.num_beams = c.rv.height;
  c.synth.points_per_beam = c.rv.width;
  c.synth.fov_up = c.rv.fov_up;
  c.synth.fov_down = c.rv.fov_down;
  return c;
}

PipelineConfig PipelineConfig::from_json(const std::string& text, const std::string& fallback_preset) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw mvseg::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw mvseg::ConfigError("config must be a JSON object");
  PipelineConfig c = from_preset(j.value("preset", fallback_preset));
  constexpr double deg = std::numbers::pi / 180.0;
  try {
    if (j.contains("rv")) {
      const auto& r = j.at("rv");
      take(r, "height", c.rv.height);
      take(r, "width", c.rv.width);
      if (r.contains("fov_up_deg")) c.rv.fov_up = r.at("fov_up_deg").get<double>() * deg;
      if (r.contains("fov_down_deg")) c.rv.fov_down = r.at("fov_down_deg").get<double>() * deg;
    }
    if (j.contains("bev")) {
      const auto& b = j.at("bev");
      take(b, "radial_bins", c.bev.radial_bins);
      take(b, "angular_bins", c.bev.angular_bins);
      take(b, "z_bins", c.bev.z_bins);
      take(b, "r_min", c.bev.r_min);
      take(b, "r_max", c.bev.r_max);
      take(b, "z_min", c.bev.z_min);
      take(b, "z_max", c.bev.z_max);
    }
  } catch (const json::exception& e) {
    throw mvseg::ConfigError(std::string("config: ") + e.what());
  }
  if (j.contains("classmap")) {
    json cm = j.at("classmap");
    if (!cm.contains("preset")) cm["preset"] = c.preset;
    c.classes = mvseg::ClassMap::from_json(cm.dump());
  }
  // the synthetic sensor follows the range-image geometry unless told otherwise
  c.synth.num_beams = c.rv.height;
  c.synth.points_per_beam = c.rv.width;
  c.synth.fov_up = c.rv.fov_up;
  c.synth.fov_down = c.rv.fov_down;
  if (j.contains("synth")) {
    json s = j.at("synth");
    if (!s.contains("num_beams")) s["num_beams"] = c.synth.num_beams;
    if (!s.contains("points_per_beam")) s["points_per_beam"] = c.synth.points_per_beam;
    if (!s.contains("fov_up_deg")) s["fov_up_deg"] = c.synth.fov_up / deg;
    if (!s.contains("fov_down_deg")) s["fov_down_deg"] = c.synth.fov_down / deg;
    c.synth = mvseg::SynthConfig::from_json(s.dump());
  }
  c.rv.check();
  c.bev.check();
  c.synth.check();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path, const std::string& fallback_preset) {
  if (path.empty()) return from_preset(fallback_preset);
  const auto bytes = mvseg::read_file(path);
  return from_json(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()), fallback_preset);
}

}  // namespace mvflow
