#pragma once
// Little-endian binary readers/writers shared by all on-disk formats.
// Read failures are reported as FormatError with a kind that distinguishes
// a wrong magic, an unsupported version, and a short file.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace sidkit {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, bad_version, truncated };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void magic(const char tag[4]) {
    out_.write(tag, 4);
    check();
  }

  void u8(std::uint8_t v) { put(&v, 1); }

  void u16(std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8)};
    put(b, 2);
  }

  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put(b, 4);
  }

  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put(b, 8);
  }

  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

  void finish() {
    out_.flush();
    check();
  }

 private:
  void put(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    check();
  }

  void check() {
    if (!out_) throw IoError("write failed: " + path_);
  }

  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path);
  }

  void expect_magic(const char tag[4]) {
    char got[4];
    take(got, 4);
    if (std::memcmp(got, tag, 4) != 0) {
      throw FormatError(FormatError::Kind::bad_magic,
                        path_ + ": bad magic, expected " + std::string(tag, 4));
    }
  }

  void expect_version(std::uint32_t expected) {
    const std::uint32_t got = u32();
    if (got != expected) {
      throw FormatError(FormatError::Kind::bad_version,
                        path_ + ": unsupported version " + std::to_string(got));
    }
  }

  std::uint8_t u8() {
    std::uint8_t v;
    take(&v, 1);
    return v;
  }

  std::uint16_t u16() {
    unsigned char b[2];
    take(b, 2);
    return static_cast<std::uint16_t>(b[0] | (std::uint16_t(b[1]) << 8));
  }

  std::uint32_t u32() {
    unsigned char b[4];
    take(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    unsigned char b[8];
    take(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

 private:
  void take(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(FormatError::Kind::truncated, path_ + ": truncated file");
    }
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace sidkit
