#pragma once

#include <mvseg/ingest.hpp>
#include <mvseg/types.hpp>

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvflow {

namespace fs = std::filesystem;

/// Bad flags, missing inputs or an unusable config; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Throws UsageError naming the path when it is not a readable regular file.
void require_file(const fs::path& path);
void require_files(const std::vector<std::string>& paths);

void ensure_dir(const fs::path& dir);

void write_json(const fs::path& path, const nlohmann::json& j);
void write_text(const fs::path& path, const std::string& text);

/// 8-bit binary PGM.
void write_pgm(const fs::path& path, int height, int width, const std::vector<std::uint8_t>& pixels);

/// Comma separated list, e.g. "1,0.5,0.25".
std::vector<double> parse_doubles(const std::string& text, const char* what);

/// Smallest raw id of every train id; ignore and unknown ids map to 0.
std::vector<std::uint32_t> train_to_raw(const mvseg::ClassMap& map);
std::vector<std::uint32_t> encode_labels(const std::vector<std::int32_t>& labels, const mvseg::ClassMap& map);

std::string stem_of(const fs::path& path);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace mvflow
