#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace claimlab::io {

// Line-by-line reader for plain or gzip files (zlib reads both transparently,
// so compressed inputs are simply a matter of file content). Lines are
// returned without the trailing newline; a trailing carriage return is
// stripped as well.
class LineReader {
 public:
  explicit LineReader(const std::string& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  // Returns false at end of input.
  bool next(std::string& line);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<std::string> read_lines(const std::string& path);

// Writes content to path atomically (temp file in the same directory, then
// rename). Throws std::runtime_error on failure.
void atomic_write(const std::string& path, const std::string& content);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::string& path);
std::string hex64(std::uint64_t value);

}  // namespace claimlab::io
