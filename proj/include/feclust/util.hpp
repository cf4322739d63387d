#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace feclust {

using json = nlohmann::json;

/// Error raised by pipeline stages; carries the stage name in the message.
class PipelineError : public std::runtime_error {
 public:
  explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Metric undefined for the given partition (e.g. k out of range).
class UndefinedMetricError : public std::runtime_error {
 public:
  explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace util {

// Stable 64-bit FNV-1a. Used for config hashes and artifact checksums;
// must not depend on std::hash (implementation-defined).
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0) {
  std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Parses a JSONL file, calling `fn(line_number, object)` per non-empty line.
/// Malformed lines raise with the line number in the message.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

std::uint64_t checksum_file(const std::filesystem::path& path);

}  // namespace util
}  // namespace feclust
