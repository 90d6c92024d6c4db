#pragma once
// Semantic IDs: code tuples from a frozen quantizer, their packed 64-bit
// form, n-gram feature addressing for embedding tables, and prefix-trie
// analytics over a corpus.

#include <bit>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidkit/binary_io.hpp"
#include "sidkit/corpus.hpp"
#include "sidkit/rqvae.hpp"

namespace sidkit {

struct SemanticId {
  std::vector<std::uint32_t> codes;  // root level first
};

struct PackedSemanticId {
  std::uint64_t value = 0;
};

inline std::uint32_t bits_needed(std::uint32_t codebook_size) {
  if (codebook_size <= 1) return 1;
  return std::bit_width(codebook_size - 1);
}

// Big-endian field order: the level-1 code occupies the highest bits, so
// numeric prefixes of the packed value follow trie prefixes of the tuple.
inline PackedSemanticId pack(const SemanticId& sid, std::uint32_t bits_per_token) {
  const std::size_t L = sid.codes.size();
  if (L == 0) throw std::invalid_argument("pack: empty code tuple");
  if (bits_per_token == 0 || std::size_t{bits_per_token} * L > 64) {
    throw std::invalid_argument("pack: code tuple does not fit in 64 bits");
  }
  const std::uint64_t limit = bits_per_token == 64 ? 0 : (std::uint64_t{1} << bits_per_token);
  PackedSemanticId p;
  for (std::size_t l = 0; l < L; ++l) {
    if (bits_per_token < 64 && sid.codes[l] >= limit) {
      throw std::invalid_argument("pack: token exceeds field width");
    }
    p.value |= std::uint64_t{sid.codes[l]} << ((L - 1 - l) * bits_per_token);
  }
  return p;
}

inline SemanticId unpack(PackedSemanticId packed, std::uint32_t num_levels,
                         std::uint32_t bits_per_token) {
  if (num_levels == 0 || bits_per_token == 0 ||
      std::size_t{bits_per_token} * num_levels > 64) {
    throw std::invalid_argument("unpack: invalid level count or field width");
  }
  const std::uint64_t mask =
      bits_per_token == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits_per_token) - 1;
  SemanticId sid;
  sid.codes.resize(num_levels);
  for (std::uint32_t l = 0; l < num_levels; ++l) {
    sid.codes[l] =
        static_cast<std::uint32_t>((packed.value >> ((num_levels - 1 - l) * bits_per_token)) & mask);
  }
  return sid;
}

// Feature address for one n-gram: which table and which row within it.
struct NgramFeature {
  std::uint32_t n = 0;
  std::uint32_t table_index = 0;
  std::uint64_t row_index = 0;
};

// Unigrams give one table per level with K rows; bigrams one table per
// adjacent level pair with K^2 rows, row = c_i * K + c_{i+1}. Higher orders
// are rejected: the table size K^n is already impractical at n = 3.
inline std::vector<NgramFeature> extract_ngrams(const SemanticId& sid, std::uint32_t n,
                                                std::uint32_t codebook_size) {
  if (n != 1 && n != 2) throw std::invalid_argument("extract_ngrams: n must be 1 or 2");
  if (codebook_size == 0) throw std::invalid_argument("extract_ngrams: codebook_size must be >= 1");
  const std::size_t L = sid.codes.size();
  if (L < n) throw std::invalid_argument("extract_ngrams: code tuple shorter than n");
  for (auto c : sid.codes) {
    if (c >= codebook_size) throw std::invalid_argument("extract_ngrams: code out of range");
  }
  std::vector<NgramFeature> feats;
  feats.reserve(L - n + 1);
  for (std::size_t i = 0; i + n <= L; ++i) {
    NgramFeature f;
    f.n = n;
    f.table_index = static_cast<std::uint32_t>(i);
    f.row_index = n == 1 ? sid.codes[i]
                         : std::uint64_t{sid.codes[i]} * codebook_size + sid.codes[i + 1];
    feats.push_back(f);
  }
  return feats;
}

inline SemanticId assign_semantic_id(const RqVaeModel& m, std::span<const float> x) {
  if (!m.frozen) throw std::logic_error("assign_semantic_id requires a frozen model");
  SemanticId sid;
  sid.codes = quantize(m.codebooks, encode(m, x)).codes;
  return sid;
}

// Fixed-width packed storage versus the float embedding it replaces.
inline double storage_compression_ratio(std::uint32_t embedding_dim) {
  return (embedding_dim * 4.0) / 8.0;
}

// ---- id map file -------------------------------------------------------

struct SidMapEntry {
  ItemId item = 0;
  std::uint64_t packed = 0;
};

struct SidMap {
  std::uint8_t num_levels = 0;
  std::uint8_t bits_per_token = 16;
  std::vector<SidMapEntry> entries;
};

inline SidMap build_sid_map(const RqVaeModel& m, const Corpus& corpus,
                            std::uint32_t bits_per_token = 16) {
  if (!m.frozen) throw std::logic_error("build_sid_map requires a frozen model");
  if (bits_per_token < bits_needed(m.config.codebook_size)) {
    throw std::invalid_argument("build_sid_map: field width too small for codebook");
  }
  SidMap map;
  map.num_levels = static_cast<std::uint8_t>(m.config.num_levels);
  map.bits_per_token = static_cast<std::uint8_t>(bits_per_token);
  map.entries.reserve(corpus.items.size());
  for (const CorpusItem& item : corpus.items) {
    const SemanticId sid = assign_semantic_id(m, item.embedding);
    map.entries.push_back({item.id, pack(sid, bits_per_token).value});
  }
  return map;
}

inline constexpr char kSidMapMagic[4] = {'S', 'Q', 'S', '1'};
inline constexpr std::uint32_t kSidMapVersion = 1;

inline void write_sid_map(const SidMap& map, const std::string& path) {
  BinaryWriter w(path);
  w.magic(kSidMapMagic);
  w.u32(kSidMapVersion);
  w.u32(static_cast<std::uint32_t>(map.entries.size()));
  w.u8(map.num_levels);
  w.u8(map.bits_per_token);
  for (const SidMapEntry& e : map.entries) {
    w.u32(e.item);
    w.u64(e.packed);
  }
  w.finish();
}

inline SidMap read_sid_map(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kSidMapMagic);
  r.expect_version(kSidMapVersion);
  SidMap map;
  const std::uint32_t n = r.u32();
  map.num_levels = r.u8();
  map.bits_per_token = r.u8();
  map.entries.resize(n);
  for (SidMapEntry& e : map.entries) {
    e.item = r.u32();
    e.packed = r.u64();
  }
  return map;
}

// ---- prefix trie analytics ---------------------------------------------

struct PrefixStats {
  std::uint32_t prefix_len = 0;
  double avg_cos_sim = 0.0;
  std::uint64_t p25_size = 0;
  std::uint64_t p50_size = 0;
  std::uint64_t p75_size = 0;
  std::uint64_t num_groups = 0;
};

namespace detail {

inline double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 0.0 ? dot / denom : 0.0;
}

inline std::uint64_t nearest_rank(const std::vector<std::uint64_t>& sorted, double p) {
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * double(n)));
  if (rank == 0) rank = 1;
  return sorted[rank - 1];
}

}  // namespace detail

// Groups items by shared ID prefix at every length and reports the mean
// pairwise embedding cosine over the pairs of each group, pooled across
// groups. Groups with more than max_pairs_per_bucket pairs contribute that
// many sampled pairs instead of all of them.
inline std::vector<PrefixStats> prefix_similarity_report(const Corpus& corpus,
                                                         const std::vector<SemanticId>& ids,
                                                         std::size_t max_pairs_per_bucket,
                                                         std::uint64_t seed) {
  if (ids.empty() || ids.size() != corpus.items.size()) {
    throw std::invalid_argument("prefix report: ids must align with the corpus");
  }
  if (max_pairs_per_bucket == 0) {
    throw std::invalid_argument("prefix report: max_pairs_per_bucket must be >= 1");
  }
  const std::size_t L = ids.front().codes.size();
  for (const SemanticId& sid : ids) {
    if (sid.codes.size() != L) throw std::invalid_argument("prefix report: ragged code tuples");
  }
  Rng rng(seed);
  std::vector<PrefixStats> report;
  report.reserve(L);
  for (std::size_t n = 1; n <= L; ++n) {
    // std::map keys give a deterministic group order for the subsampler.
    std::map<std::vector<std::uint32_t>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::vector<std::uint32_t> key(ids[i].codes.begin(), ids[i].codes.begin() + n);
      groups[std::move(key)].push_back(i);
    }
    PrefixStats stats;
    stats.prefix_len = static_cast<std::uint32_t>(n);
    stats.num_groups = groups.size();
    std::vector<std::uint64_t> sizes;
    sizes.reserve(groups.size());
    double cos_sum = 0.0;
    std::size_t pair_count = 0;
    for (const auto& [key, members] : groups) {
      sizes.push_back(members.size());
      const std::size_t m = members.size();
      if (m < 2) continue;
      const std::size_t all_pairs = m * (m - 1) / 2;
      if (all_pairs <= max_pairs_per_bucket) {
        for (std::size_t a = 0; a < m; ++a) {
          for (std::size_t b = a + 1; b < m; ++b) {
            cos_sum += detail::cosine(corpus.items[members[a]].embedding,
                                      corpus.items[members[b]].embedding);
            ++pair_count;
          }
        }
      } else {
        for (std::size_t s = 0; s < max_pairs_per_bucket; ++s) {
          const std::size_t a = rng.uniform_below(m);
          std::size_t b = rng.uniform_below(m - 1);
          if (b >= a) ++b;
          cos_sum += detail::cosine(corpus.items[members[a]].embedding,
                                    corpus.items[members[b]].embedding);
          ++pair_count;
        }
      }
    }
    stats.avg_cos_sim = pair_count > 0 ? cos_sum / double(pair_count)
                                       : std::numeric_limits<double>::quiet_NaN();
    std::sort(sizes.begin(), sizes.end());
    stats.p25_size = detail::nearest_rank(sizes, 0.25);
    stats.p50_size = detail::nearest_rank(sizes, 0.50);
    stats.p75_size = detail::nearest_rank(sizes, 0.75);
    report.push_back(stats);
  }
  return report;
}

inline void write_prefix_report(const std::vector<PrefixStats>& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "prefix_len\tavg_cos_sim\tp25_size\tp50_size\tp75_size\tnum_groups\n";
  char buf[64];
  for (const PrefixStats& s : report) {
    std::snprintf(buf, sizeof buf, "%.6g", s.avg_cos_sim);
    out << s.prefix_len << '\t' << buf << '\t' << s.p25_size << '\t' << s.p50_size << '\t'
        << s.p75_size << '\t' << s.num_groups << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sidkit
