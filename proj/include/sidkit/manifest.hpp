#pragma once
// Build manifest: records a content hash per pipeline artifact so downstream
// stages can refuse stale inputs instead of silently mixing generations.

#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "sidkit/binary_io.hpp"

namespace sidkit {

class StaleInputError : public IoError {
 public:
  using IoError::IoError;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

struct ManifestEntry {
  std::string path;
  std::uint64_t hash = 0;
};

// Text format, one artifact per line: key=path<TAB>hex-hash.
struct Manifest {
  std::map<std::string, ManifestEntry> entries;

  static Manifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      const auto tab = line.rfind('\t');
      if (eq == std::string::npos || tab == std::string::npos || tab <= eq) {
        throw FormatError(FormatError::Kind::bad_magic, path + ": malformed manifest line");
      }
      ManifestEntry e;
      e.path = line.substr(eq + 1, tab - eq - 1);
      e.hash = std::stoull(line.substr(tab + 1), nullptr, 16);
      m.entries[line.substr(0, eq)] = e;
    }
    return m;
  }

  // Missing manifest files are treated as empty so the first pipeline stage
  // can create them.
  static Manifest load_or_empty(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) return Manifest{};
    probe.close();
    return load(path);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open manifest for writing: " + path);
    char buf[32];
    for (const auto& [key, e] : entries) {
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(e.hash));
      out << key << '=' << e.path << '\t' << buf << "\n";
    }
    if (!out) throw IoError("manifest write failed: " + path);
  }

  void record(const std::string& key, const std::string& path) {
    entries[key] = {path, fnv1a64_file(path)};
  }

  // No-op when the key was never recorded; a recorded key whose file content
  // changed is a hard error.
  void verify(const std::string& key, const std::string& path) const {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    const std::uint64_t h = fnv1a64_file(path);
    if (h != it->second.hash) {
      throw StaleInputError("stale input: " + path + " no longer matches the manifest entry for " +
                            key);
    }
  }
};

}  // namespace sidkit
