#include "cli_support.hpp"

#include <mvseg/errors.hpp>

#include <fstream>
#include <sstream>

namespace mvflow {

void require_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError("no such file: " + path.string());
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw UsageError("cannot read file: " + path.string());
}

void require_files(const std::vector<std::string>& paths) {
  for (const auto& p : paths) require_file(p);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw UsageError("cannot create output directory: " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mvseg::Error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void write_pgm(const fs::path& path, int height, int width, const std::vector<std::uint8_t>& pixels) {
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mvseg::Error("cannot write " + path.string());
  out << header;
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty list");
  return out;
}

std::vector<std::uint32_t> train_to_raw(const mvseg::ClassMap& map) {
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(map.num_classes), 0);
  std::vector<bool> seen(raw.size(), false);
  for (const auto& [r, t] : map.raw_to_train) {  // ascending raw ids
    if (t < 0 || t >= map.num_classes || seen[static_cast<std::size_t>(t)]) continue;
    raw[static_cast<std::size_t>(t)] = r;
    seen[static_cast<std::size_t>(t)] = true;
  }
  return raw;
}

std::vector<std::uint32_t> encode_labels(const std::vector<std::int32_t>& labels, const mvseg::ClassMap& map) {
  const auto raw = train_to_raw(map);
  std::vector<std::uint32_t> words(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0 && labels[i] < map.num_classes) words[i] = raw[static_cast<std::size_t>(labels[i])];
  return words;
}

std::string stem_of(const fs::path& path) { return path.stem().string(); }

}  // namespace mvflow
