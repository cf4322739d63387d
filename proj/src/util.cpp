#include "feclust/util.hpp"

#include <fstream>
#include <sstream>

namespace feclust::util {

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PipelineError("cannot open file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw PipelineError("cannot write file: " + path.string());
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw PipelineError("write failed: " + path.string());
  }
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) {
    throw PipelineError("cannot open file: " + path.string());
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON line");
    }
    fn(lineno, obj);
  }
}

std::uint64_t checksum_file(const std::filesystem::path& path) {
  return fnv1a64(read_file(path));
}

}  // namespace feclust::util
