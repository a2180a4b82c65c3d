#pragma once

#include "glift/types.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace glift::detail {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("cannot open for writing: " + path.string());
  }

  void magic(const char m[4]) { out_.write(m, 4); }
  void u32(uint32_t v) { raw(&v, sizeof v); }
  void u64(uint64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void bytes(const void* p, size_t n) { raw(p, n); }

  void close() {
    out_.close();
    if (!out_) throw FormatError("write failed");
  }

 private:
  void raw(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : in_(path, std::ios::binary), path_(path.string()) {
    if (!in_) throw FormatError("cannot open: " + path_);
  }

  void expect_magic(const char m[4]) {
    char got[4] = {};
    raw(got, 4);
    if (std::memcmp(got, m, 4) != 0)
      throw FormatError(path_ + ": bad magic, expected " +
                        std::string(m, 4));
  }
  void expect_version(uint32_t v) {
    const uint32_t got = u32();
    if (got != v)
      throw FormatError(path_ + ": unsupported version " +
                        std::to_string(got));
  }
  uint32_t u32() {
    uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  float f32() {
    float v;
    raw(&v, sizeof v);
    return v;
  }
  void bytes(void* p, size_t n) { raw(p, n); }

  void expect_eof() {
    in_.peek();
    if (!in_.eof()) throw FormatError(path_ + ": trailing bytes");
  }

 private:
  void raw(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw FormatError(path_ + ": truncated file");
  }
  std::ifstream in_;
  std::string path_;
};

// Guards absurd counts before allocating (truncated/corrupt headers).
inline size_t checked_count(uint64_t count, size_t bytes_per_item,
                            const char* what) {
  if (count > (1ull << 40) / std::max<size_t>(bytes_per_item, 1))
    throw FormatError(std::string(what) + ": implausible element count");
  return static_cast<size_t>(count);
}

}  // namespace glift::detail
