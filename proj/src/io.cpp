#include "claimlab/io.hpp"

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace claimlab::io {

struct LineReader::Impl {
  gzFile file = nullptr;
  std::string buffer;
  std::size_t pos = 0;
  bool eof = false;

  bool fill() {
    if (eof) return false;
    char chunk[1 << 16];
    int n = gzread(file, chunk, sizeof(chunk));
    if (n < 0) {
      int err = 0;
      const char* msg = gzerror(file, &err);
      throw std::runtime_error(std::string("read error: ") + (msg ? msg : "?"));
    }
    if (n == 0) {
      eof = true;
      return false;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    return true;
  }
};

LineReader::LineReader(const std::string& path) : impl_(new Impl) {
  impl_->file = gzopen(path.c_str(), "rb");
  if (!impl_->file) {
    throw std::runtime_error("cannot open " + path);
  }
}

LineReader::~LineReader() {
  if (impl_ && impl_->file) gzclose(impl_->file);
}

bool LineReader::next(std::string& line) {
  Impl& im = *impl_;
  while (true) {
    std::size_t nl = im.buffer.find('\n', im.pos);
    if (nl != std::string::npos) {
      line.assign(im.buffer, im.pos, nl - im.pos);
      im.pos = nl + 1;
      if (im.pos > (1 << 20)) {  // drop consumed prefix
        im.buffer.erase(0, im.pos);
        im.pos = 0;
      }
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    if (!im.fill()) {
      if (im.pos < im.buffer.size()) {  // final line without newline
        line.assign(im.buffer, im.pos, im.buffer.size() - im.pos);
        im.pos = im.buffer.size();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
      return false;
    }
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  LineReader reader(path);
  std::vector<std::string> lines;
  std::string line;
  while (reader.next(line)) lines.push_back(line);
  return lines;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char chunk[1 << 16];
  while (in) {
    in.read(chunk, sizeof(chunk));
    std::streamsize n = in.gcount();
    if (n > 0) h = fnv1a64(std::string_view(chunk, static_cast<std::size_t>(n)), h);
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

}  // namespace claimlab::io
