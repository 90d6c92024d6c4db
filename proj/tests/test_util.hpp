#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace sidkit::test {

// Self-deleting scratch directory so tests can write artifacts without
// polluting the build tree or colliding across test cases.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sidkit_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool same_file_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return read_file_bytes(a) == read_file_bytes(b);
}

// Flip one byte somewhere past the header so checksum/staleness checks fire.
inline void corrupt_file(const std::filesystem::path& p, std::size_t offset = 12) {
  auto bytes = read_file_bytes(p);
  if (offset >= bytes.size()) offset = bytes.size() - 1;
  bytes[offset] ^= 0xFF;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline void truncate_file(const std::filesystem::path& p, std::size_t keep) {
  auto bytes = read_file_bytes(p);
  if (keep > bytes.size()) keep = bytes.size();
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(keep));
}

}  // namespace sidkit::test
