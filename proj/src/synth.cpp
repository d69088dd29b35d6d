#include "mvseg/errors.hpp"
#include "mvseg/ingest.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace mvseg {

namespace {

// Uniform draws built directly from the engine bits so that scans are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int label = -1;
  void offer(double candidate, int l) {
    if (candidate > 1e-6 && candidate < t) {
      t = candidate;
      label = l;
    }
  }
};

void hit_box(const Eigen::Vector3d& d, const Box& box, Hit& hit) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (0.0 < box.lo[a] || 0.0 > box.hi[a]) return;
      continue;
    }
    double ta = box.lo[a] / d[a];
    double tb = box.hi[a] / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 <= t1 && t1 > 0.0) hit.offer(t0 > 0.0 ? t0 : t1, box.label);
}

void hit_cylinder(const Eigen::Vector3d& d, const Cylinder& cyl, Hit& hit) {
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 0.0) {
    const double b = -2.0 * (d.x() * cyl.center.x() + d.y() * cyl.center.y());
    const double c = cyl.center.squaredNorm() - cyl.radius * cyl.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        const double z = t * d.z();
        if (t > 0.0 && z >= cyl.z_min && z <= cyl.z_max) {
          hit.offer(t, cyl.label);
          break;
        }
      }
    }
  }
  if (d.z() != 0.0) {
    const double t = cyl.z_max / d.z();
    if (t > 0.0) {
      const Eigen::Vector2d p(t * d.x(), t * d.y());
      if ((p - cyl.center).squaredNorm() <= cyl.radius * cyl.radius) hit.offer(t, cyl.label);
    }
  }
}

Eigen::Vector3d vec3(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

SynthConfig SynthConfig::street() {
  SynthConfig c;
  const double g = c.ground_z;
  c.boxes = {
      {{6.0, 2.6, g}, {10.2, 4.4, g + 1.5}, 0},        // car
      {{-13.0, -4.6, g}, {-8.6, -2.8, g + 1.5}, 0},    // car
      {{14.0, -3.2, g}, {18.5, -1.4, g + 1.6}, 0},     // car
      {{20.0, 2.5, g}, {28.0, 5.0, g + 3.5}, 3},       // truck
      {{3.0, -5.2, g}, {3.5, -4.7, g + 1.75}, 5},      // person
      {{15.0, 10.0, g}, {35.0, 25.0, g + 9.0}, 12},    // building
      {{-30.0, 12.0, g}, {-10.0, 30.0, g + 11.0}, 12}, // building
      {{5.0, -30.0, g}, {25.0, -12.0, g + 7.0}, 12},   // building
      {{-40.0, -25.0, g}, {-22.0, -10.0, g + 6.0}, 12},
      {{-6.0, 7.2, g}, {6.0, 7.4, g + 1.2}, 13},       // fence
  };
  c.cylinders = {
      {{5.0, -7.5}, 0.12, g, g + 4.5, 17},  // pole
      {{-6.0, 7.8}, 0.12, g, g + 4.0, 17},
      {{40.0, -7.5}, 0.12, g, g + 5.0, 17},
      {{12.0, 8.5}, 0.3, g, g + 3.0, 15},   // trunk
      {{-15.0, -8.5}, 0.35, g, g + 3.0, 15},
      {{30.0, 8.0}, 0.25, g, g + 3.0, 15},
      {{-25.0, 8.0}, 0.4, g, g + 2.5, 15},
  };
  return c;
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  SynthConfig c = street();
  try {
    const auto j = nlohmann::json::parse(text);
    constexpr double deg = std::numbers::pi / 180.0;
    if (j.contains("num_beams")) c.num_beams = j["num_beams"].get<int>();
    if (j.contains("points_per_beam")) c.points_per_beam = j["points_per_beam"].get<int>();
    if (j.contains("fov_up_deg")) c.fov_up = j["fov_up_deg"].get<double>() * deg;
    if (j.contains("fov_down_deg")) c.fov_down = j["fov_down_deg"].get<double>() * deg;
    if (j.contains("dropout")) c.dropout = j["dropout"].get<double>();
    if (j.contains("order"))
      c.order = j["order"].get<std::string>() == "azimuth" ? SweepOrder::AzimuthMajor : SweepOrder::BeamMajor;
    if (j.contains("layout"))
      c.layout = j["layout"].get<std::string>() == "uniform" ? BeamLayout::Uniform : BeamLayout::Hdl64;
    if (j.contains("range_noise")) c.range_noise = j["range_noise"].get<double>();
    if (j.contains("random_obstacles")) c.random_obstacles = j["random_obstacles"].get<int>();
    if (j.contains("ground_z")) c.ground_z = j["ground_z"].get<double>();
    if (j.contains("wall_radius")) c.wall_radius = j["wall_radius"].get<double>();
    if (j.contains("boxes")) {
      c.boxes.clear();
      for (const auto& b : j["boxes"]) c.boxes.push_back({vec3(b.at("lo")), vec3(b.at("hi")), b.at("label").get<int>()});
    }
    if (j.contains("cylinders")) {
      c.cylinders.clear();
      for (const auto& y : j["cylinders"])
        c.cylinders.push_back({{y.at("center").at(0).get<double>(), y.at("center").at(1).get<double>()},
                               y.at("radius").get<double>(), y.at("z_min").get<double>(),
                               y.at("z_max").get<double>(), y.at("label").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic scan config: ") + e.what());
  }
  c.check();
  return c;
}

void SynthConfig::check() const {
  if (num_beams < 1) throw ConfigError("num_beams must be >= 1");
  if (points_per_beam < 1) throw ConfigError("points_per_beam must be >= 1");
  if (!(fov_up > fov_down)) throw ConfigError("fov_up must exceed fov_down");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(std::abs(beam_azimuth_offset) + std::abs(azimuth_jitter) < 0.5))
    throw ConfigError("azimuth offset plus jitter must stay below half a step");
  if (!(wall_radius > 0.0)) throw ConfigError("wall_radius must be positive");
  if (!(ground_z < 0.0)) throw ConfigError("ground plane must lie below the sensor");
}

std::vector<double> SynthConfig::beam_elevations() const {
  const int n = num_beams;
  const double fov = fov_up - fov_down;
  std::vector<double> el(static_cast<std::size_t>(n));
  if (layout == BeamLayout::Uniform || n < 2) {
    for (int b = 0; b < n; ++b) el[b] = fov_up - (b + 0.5) * fov / n;
    return el;
  }
  // Two laser blocks: dense upper block, lower block with 1.5x the spacing.
  const int upper = (n + 1) / 2;
  const int lower = n - upper;
  const double top = fov_up - 0.03 * fov;
  const double bottom = fov_down + 0.02 * fov;
  const double units = (upper - 1) + 1.5 + 1.5 * (lower - 1);
  const double step = (top - bottom) / (lower > 0 ? units : std::max(upper - 1, 1));
  for (int b = 0; b < upper; ++b) el[b] = top - b * step;
  for (int b = 0; b < lower; ++b) el[upper + b] = el[upper - 1] - 1.5 * step * (b + 1);
  return el;
}

PointCloud synth_scan(const SynthConfig& config, std::uint64_t seed) {
  config.check();
  SynthConfig scene = config;
  if (scene.random_obstacles > 0) {
    Rng layout(seed ^ 0x9e3779b97f4a7c15ull);
    for (int k = 0; k < scene.random_obstacles; ++k) {
      const double rho = layout.uniform(5.0, 45.0);
      const double th = layout.uniform(-std::numbers::pi, std::numbers::pi);
      const Eigen::Vector2d c(rho * std::cos(th), rho * std::sin(th));
      if (layout.uniform() < 0.5) {
        const double hx = layout.uniform(0.3, 2.5), hy = layout.uniform(0.3, 2.5);
        const double h = layout.uniform(0.8, 4.0);
        scene.boxes.push_back({{c.x() - hx, c.y() - hy, scene.ground_z},
                               {c.x() + hx, c.y() + hy, scene.ground_z + h},
                               layout.uniform() < 0.5 ? 0 : 12});
      } else {
        scene.cylinders.push_back({c, layout.uniform(0.1, 0.5), scene.ground_z,
                                   scene.ground_z + layout.uniform(1.0, 5.0), layout.uniform() < 0.5 ? 17 : 15});
      }
    }
  }

  const int beams = scene.num_beams;
  const int steps = scene.points_per_beam;
  const auto elevations = scene.beam_elevations();
  const double step_angle = 2.0 * std::numbers::pi / steps;

  Rng rng(seed);
  std::vector<double> beam_offset(static_cast<std::size_t>(beams));
  for (auto& o : beam_offset) o = rng.uniform(-scene.beam_azimuth_offset, scene.beam_azimuth_offset);

  struct Sample {
    float x, y, z, remission;
    int label;
    bool kept;
  };
  std::vector<Sample> grid(static_cast<std::size_t>(beams) * steps);

  for (int b = 0; b < beams; ++b) {
    for (int k = 0; k < steps; ++k) {
      // azimuth sweeps from +pi down to -pi so that column index grows with k
      const double frac = k + 0.5 + beam_offset[b] + rng.uniform(-scene.azimuth_jitter, scene.azimuth_jitter);
      const double psi = std::numbers::pi - frac * step_angle;
      const double phi = elevations[b] + rng.uniform(-scene.elevation_jitter, scene.elevation_jitter);
      const Eigen::Vector3d d(std::cos(phi) * std::cos(psi), std::cos(phi) * std::sin(psi), std::sin(phi));

      Hit hit;
      if (d.z() < 0.0) {
        const double t = scene.ground_z / d.z();
        const double y = t * d.y();
        hit.offer(t, std::abs(y) < scene.road_half_width ? scene.road_label : scene.offroad_label);
      }
      const double dxy = std::hypot(d.x(), d.y());
      if (dxy > 0.0) hit.offer(scene.wall_radius / dxy, scene.wall_label);
      for (const auto& box : scene.boxes) hit_box(d, box, hit);
      for (const auto& cyl : scene.cylinders) hit_cylinder(d, cyl, hit);

      const double noise = scene.range_noise * rng.normal();
      const double t = std::max(hit.t + noise, 0.5 * hit.t);
      const float remission = static_cast<float>(rng.uniform());
      const bool kept = !(scene.dropout > 0.0 && rng.uniform() < scene.dropout);
      grid[static_cast<std::size_t>(b) * steps + k] = {static_cast<float>(t * d.x()), static_cast<float>(t * d.y()),
                                                      static_cast<float>(t * d.z()), remission, hit.label, kept};
    }
  }

  std::size_t kept = 0;
  for (const auto& s : grid) kept += s.kept;

  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(kept), 4);
  cloud.labels.reserve(kept);
  cloud.ring_ids.reserve(kept);
  Eigen::Index n = 0;
  auto emit = [&](int b, int k) {
    const auto& s = grid[static_cast<std::size_t>(b) * steps + k];
    if (!s.kept) return;
    cloud.points.row(n++) << s.x, s.y, s.z, s.remission;
    cloud.labels.push_back(s.label);
    cloud.ring_ids.push_back(b);
  };
  if (scene.order == SweepOrder::BeamMajor) {
    for (int b = 0; b < beams; ++b)
      for (int k = 0; k < steps; ++k) emit(b, k);
  } else {
    for (int k = 0; k < steps; ++k)
      for (int b = 0; b < beams; ++b) emit(b, k);
  }
  return cloud;
}

}  // namespace mvseg
