#include "mvseg/ingest.hpp"

#include "mvseg/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mvseg {

namespace {

std::uint32_t load_u32le(const std::byte* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

void store_u32le(std::byte* p, std::uint32_t v) {
  p[0] = std::byte(v & 0xff);
  p[1] = std::byte((v >> 8) & 0xff);
  p[2] = std::byte((v >> 16) & 0xff);
  p[3] = std::byte((v >> 24) & 0xff);
}

ClassMap build_map(int num_classes, std::initializer_list<std::pair<std::uint32_t, int>> learning,
                   std::vector<std::string> names) {
  // learning ids count from 1; learning id 0 is the unlabeled/ignored class
  ClassMap m;
  m.num_classes = num_classes;
  m.ignore_id = 255;
  m.names = std::move(names);
  for (auto [raw, learn] : learning) m.raw_to_train[raw] = learn == 0 ? m.ignore_id : learn - 1;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

void validate(const PointCloud& cloud, int num_classes, int ignore_id, int num_beams) {
  const auto n = cloud.size();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!cloud.points.row(i).allFinite())
      throw MalformedInput("non-finite value in point " + std::to_string(i));
  if (cloud.has_labels()) {
    if (static_cast<Eigen::Index>(cloud.labels.size()) != n)
      throw MalformedInput("label count " + std::to_string(cloud.labels.size()) + " != point count " +
                           std::to_string(n));
    if (num_classes > 0)
      for (std::size_t i = 0; i < cloud.labels.size(); ++i) {
        const auto l = cloud.labels[i];
        if (l != ignore_id && (l < 0 || l >= num_classes))
          throw MalformedInput("label " + std::to_string(l) + " out of range at point " + std::to_string(i));
      }
  }
  if (cloud.has_rings()) {
    if (static_cast<Eigen::Index>(cloud.ring_ids.size()) != n)
      throw MalformedInput("ring id count does not match point count");
    for (std::size_t i = 0; i < cloud.ring_ids.size(); ++i) {
      const auto r = cloud.ring_ids[i];
      if (r < 0 || (num_beams > 0 && r >= num_beams))
        throw MalformedInput("ring id " + std::to_string(r) + " out of range at point " + std::to_string(i));
    }
  }
}

CloudFingerprint fingerprint(const PointCloud& cloud) {
  // FNV-1a over N and the first/last records
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  const std::uint64_t n = static_cast<std::uint64_t>(cloud.size());
  mix(&n, sizeof n);
  if (n > 0) {
    mix(cloud.points.row(0).data(), 4 * sizeof(float));
    mix(cloud.points.row(cloud.size() - 1).data(), 4 * sizeof(float));
  }
  return h;
}

// ---------------------------------------------------------------------------

std::int32_t ClassMap::operator()(std::uint32_t raw) const {
  const auto it = raw_to_train.find(raw);
  return it == raw_to_train.end() ? ignore_id : it->second;
}

ClassMap ClassMap::identity_extension() const {
  ClassMap m;
  m.num_classes = num_classes;
  m.ignore_id = ignore_id;
  m.names = names;
  for (int c = 0; c < num_classes; ++c) m.raw_to_train[static_cast<std::uint32_t>(c)] = c;
  return m;
}

ClassMap ClassMap::semantickitti() {
  return build_map(19,
                   {{0, 0},    {1, 0},    {10, 1},   {11, 2},   {13, 5},   {15, 3},   {16, 5},
                    {18, 4},   {20, 5},   {30, 6},   {31, 7},   {32, 8},   {40, 9},   {44, 10},
                    {48, 11},  {49, 12},  {50, 13},  {51, 14},  {52, 0},   {60, 9},   {70, 15},
                    {71, 16},  {72, 17},  {80, 18},  {81, 19},  {99, 0},   {252, 1},  {253, 7},
                    {254, 6},  {255, 8},  {256, 5},  {257, 5},  {258, 4},  {259, 5}},
                   {"car", "bicycle", "motorcycle", "truck", "other-vehicle", "person", "bicyclist",
                    "motorcyclist", "road", "parking", "sidewalk", "other-ground", "building", "fence",
                    "vegetation", "trunk", "terrain", "pole", "traffic-sign"});
}

ClassMap ClassMap::nuscenes() {
  return build_map(16,
                   {{0, 0},   {1, 0},   {2, 7},   {3, 7},   {4, 7},   {5, 0},   {6, 7},   {7, 0},
                    {8, 0},   {9, 1},   {10, 0},  {11, 0},  {12, 8},  {13, 0},  {14, 2},  {15, 3},
                    {16, 3},  {17, 4},  {18, 5},  {19, 0},  {20, 0},  {21, 6},  {22, 9},  {23, 10},
                    {24, 11}, {25, 12}, {26, 13}, {27, 14}, {28, 15}, {29, 0},  {30, 16}, {31, 0}},
                   {"barrier", "bicycle", "bus", "car", "construction-vehicle", "motorcycle", "pedestrian",
                    "traffic-cone", "trailer", "truck", "driveable-surface", "other-flat", "sidewalk",
                    "terrain", "manmade", "vegetation"});
}

ClassMap ClassMap::preset(const std::string& name) {
  if (name == "semantickitti") return semantickitti();
  if (name == "nuscenes") return nuscenes();
  throw ConfigError("unknown class map preset '" + name + "'");
}

ClassMap ClassMap::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("class map: ") + e.what());
  }
  ClassMap m = j.contains("preset") ? preset(j["preset"].get<std::string>()) : ClassMap{};
  try {
    if (j.contains("num_classes")) m.num_classes = j["num_classes"].get<int>();
    if (j.contains("ignore_id")) {
      const int old_ignore = m.ignore_id;
      m.ignore_id = j["ignore_id"].get<int>();
      for (auto& [raw, train] : m.raw_to_train)
        if (train == old_ignore) train = m.ignore_id;
    }
    if (j.contains("names")) m.names = j["names"].get<std::vector<std::string>>();
    if (j.contains("raw_to_train"))
      for (const auto& [key, value] : j["raw_to_train"].items())
        m.raw_to_train[static_cast<std::uint32_t>(std::stoul(key))] = value.get<int>();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("class map: ") + e.what());
  }
  if (m.num_classes <= 0) throw ConfigError("class map: num_classes must be positive");
  if (m.ignore_id >= 0 && m.ignore_id < m.num_classes)
    throw ConfigError("class map: ignore_id collides with a train id");
  for (const auto& [raw, train] : m.raw_to_train)
    if (train != m.ignore_id && (train < 0 || train >= m.num_classes))
      throw ConfigError("class map: raw id " + std::to_string(raw) + " maps outside [0, num_classes)");
  return m;
}

ClassMap ClassMap::load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return from_json(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---------------------------------------------------------------------------

PointCloud read_scan(std::span<const std::byte> bytes) {
  if (bytes.size() % 16 != 0)
    throw MalformedInput("scan buffer of " + std::to_string(bytes.size()) +
                         " bytes is not a multiple of 16");
  const auto n = static_cast<Eigen::Index>(bytes.size() / 16);
  PointCloud cloud;
  cloud.points.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 4; ++c) {
      const float v = std::bit_cast<float>(load_u32le(bytes.data() + 16 * i + 4 * c));
      if (!std::isfinite(v)) throw MalformedInput("non-finite value in point " + std::to_string(i));
      cloud.points(i, c) = v;
    }
  }
  return cloud;
}

std::vector<std::byte> write_scan(const PointCloud& cloud) {
  std::vector<std::byte> out(static_cast<std::size_t>(cloud.size()) * 16);
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    for (int c = 0; c < 4; ++c)
      store_u32le(out.data() + 16 * i + 4 * c, std::bit_cast<std::uint32_t>(cloud.points(i, c)));
  return out;
}

std::vector<std::uint32_t> read_label_words(std::span<const std::byte> bytes) {
  if (bytes.size() % 4 != 0)
    throw MalformedInput("label buffer of " + std::to_string(bytes.size()) + " bytes is not a multiple of 4");
  std::vector<std::uint32_t> words(bytes.size() / 4);
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = load_u32le(bytes.data() + 4 * i);
  return words;
}

std::vector<std::int32_t> read_labels(std::span<const std::byte> bytes, const ClassMap& map) {
  const auto words = read_label_words(bytes);
  std::vector<std::int32_t> labels(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) labels[i] = map(words[i] & 0xffffu);
  return labels;
}

std::vector<std::byte> write_label_words(std::span<const std::uint32_t> words) {
  std::vector<std::byte> out(words.size() * 4);
  for (std::size_t i = 0; i < words.size(); ++i) store_u32le(out.data() + 4 * i, words[i]);
  return out;
}

void attach_labels(PointCloud& cloud, std::vector<std::int32_t> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != cloud.size())
    throw MalformedInput("label file holds " + std::to_string(labels.size()) + " entries but scan has " +
                         std::to_string(cloud.size()) + " points");
  cloud.labels = std::move(labels);
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

PointCloud load_scan(const std::filesystem::path& path) {
  try {
    return read_scan(read_file(path));
  } catch (const MalformedInput& e) {
    throw MalformedInput(path.string() + ": " + e.what());
  }
}

}  // namespace mvseg
