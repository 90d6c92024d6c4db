#pragma once
// Synthetic item corpus with a planted cluster hierarchy, power-law
// popularity, day-stamped arrivals, and a click log whose labels are driven
// by embedding similarity. The cluster tree is the generator's ground truth;
// models only ever see the embeddings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidkit/binary_io.hpp"
#include "sidkit/rng.hpp"

namespace sidkit {

using ItemId = std::uint32_t;

// ItemId 0 is the history pad sentinel and never appears in a corpus.
inline constexpr ItemId kPadItemId = 0;

struct CorpusItem {
  ItemId id = 0;
  std::uint32_t arrival_day = 0;
  float popularity_weight = 1.0f;
  std::vector<std::uint16_t> cluster_path;  // per-level child index, root first
  std::vector<float> embedding;             // L2 normalized, length Corpus::dim
};

struct Corpus {
  std::uint32_t dim = 0;
  std::vector<CorpusItem> items;
};

struct HierarchyGenConfig {
  std::uint32_t depth = 3;
  std::vector<std::uint32_t> branching = {8, 16, 8};
  // One sigma per tree level plus a final within-leaf noise sigma.
  std::vector<double> noise_sigmas = {1.0, 0.35, 0.12, 0.04};
  std::uint32_t embedding_dim = 256;
  std::uint32_t num_items = 10000;
  double power_law_alpha = 1.2;
  std::uint32_t num_days = 8;
  double new_items_per_day_fraction = 0.3;
};

inline void validate(const HierarchyGenConfig& cfg) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("corpus config: " + msg); };
  if (cfg.depth == 0) fail("depth must be >= 1");
  if (cfg.branching.size() != cfg.depth) fail("branching must have depth entries");
  for (auto b : cfg.branching) {
    if (b < 2) fail("branching factors must be >= 2");
  }
  if (cfg.noise_sigmas.size() != cfg.depth + 1) fail("noise_sigmas must have depth+1 entries");
  for (std::size_t i = 0; i < cfg.noise_sigmas.size(); ++i) {
    const double s = cfg.noise_sigmas[i];
    if (!std::isfinite(s) || s < 0.0) fail("noise sigmas must be finite and >= 0");
    if (i > 0 && !(s < cfg.noise_sigmas[i - 1])) fail("noise sigmas must be strictly decreasing");
  }
  if (cfg.embedding_dim == 0) fail("embedding_dim must be >= 1");
  if (cfg.num_items == 0) fail("num_items must be >= 1");
  if (!std::isfinite(cfg.power_law_alpha) || cfg.power_law_alpha <= 0.0) fail("alpha must be finite and > 0");
  if (cfg.num_days == 0) fail("num_days must be >= 1");
  const double f = cfg.new_items_per_day_fraction;
  if (!std::isfinite(f) || f <= 0.0 || f >= 1.0) fail("new_items_per_day_fraction must be in (0, 1)");
}

namespace detail {

// Cluster centers, level by level. Level l holds prod(branching[0..l]) rows
// of embedding_dim values; children are stored contiguously per parent.
using CenterTree = std::vector<std::vector<double>>;

inline CenterTree draw_center_tree(const HierarchyGenConfig& cfg, Rng& rng) {
  CenterTree levels(cfg.depth);
  std::size_t nodes = 1;
  for (std::uint32_t l = 0; l < cfg.depth; ++l) {
    nodes *= cfg.branching[l];
    levels[l].resize(nodes * cfg.embedding_dim);
    const double sigma = cfg.noise_sigmas[l];
    for (std::size_t n = 0; n < nodes; ++n) {
      const double* parent =
          l == 0 ? nullptr : &levels[l - 1][(n / cfg.branching[l]) * cfg.embedding_dim];
      double* out = &levels[l][n * cfg.embedding_dim];
      for (std::uint32_t d = 0; d < cfg.embedding_dim; ++d) {
        out[d] = (parent ? parent[d] : 0.0) + sigma * rng.normal();
      }
    }
  }
  return levels;
}

// Draws the per-item fields given a finished leaf level. leaf_branching is
// the bottom-level child count (it can exceed cfg.branching.back() when the
// tree has been extended with drift leaves).
inline Corpus draw_items(const HierarchyGenConfig& cfg, const CenterTree& levels,
                         std::uint32_t leaf_branching, Rng& rng) {
  Corpus corpus;
  corpus.dim = cfg.embedding_dim;
  corpus.items.resize(cfg.num_items);
  const std::size_t num_leaves = levels.back().size() / cfg.embedding_dim;
  const double leaf_sigma = cfg.noise_sigmas[cfg.depth];
  for (std::uint32_t i = 0; i < cfg.num_items; ++i) {
    CorpusItem& item = corpus.items[i];
    item.id = i + 1;
    // Items land on leaves with replacement, so any num_items works.
    std::size_t leaf = rng.uniform_below(num_leaves);
    item.cluster_path.resize(cfg.depth);
    std::size_t node = leaf;
    for (std::uint32_t l = cfg.depth; l-- > 0;) {
      const std::uint32_t b = (l == cfg.depth - 1) ? leaf_branching : cfg.branching[l];
      item.cluster_path[l] = static_cast<std::uint16_t>(node % b);
      node /= b;
    }
    const double* center = &levels.back()[leaf * cfg.embedding_dim];
    item.embedding.resize(cfg.embedding_dim);
    double norm_sq = 0.0;
    for (std::uint32_t d = 0; d < cfg.embedding_dim; ++d) {
      const double v = center[d] + leaf_sigma * rng.normal();
      item.embedding[d] = static_cast<float>(v);
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > 0.0) {
      for (auto& v : item.embedding) v = static_cast<float>(v / norm);
    }
    const double u = std::max(rng.uniform(), 1e-12);
    item.popularity_weight = static_cast<float>(std::pow(u, -cfg.power_law_alpha));
    if (cfg.num_days > 1 && rng.uniform() >= 1.0 - cfg.new_items_per_day_fraction) {
      item.arrival_day = 1 + static_cast<std::uint32_t>(rng.uniform_below(cfg.num_days - 1));
    } else {
      item.arrival_day = 0;
    }
  }
  return corpus;
}

}  // namespace detail

inline Corpus generate_corpus(const HierarchyGenConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  const detail::CenterTree levels = detail::draw_center_tree(cfg, rng);
  return detail::draw_items(cfg, levels, cfg.branching.back(), rng);
}

// A later snapshot of the same catalog: the center tree from base_seed is
// replayed exactly, every bottom-level parent grows round(new_leaf_fraction *
// branching.back()) extra leaves, and the items themselves are redrawn from
// drift_seed over the extended leaf set.
inline Corpus generate_drifted_corpus(const HierarchyGenConfig& cfg, std::uint64_t base_seed,
                                      std::uint64_t drift_seed, double new_leaf_fraction) {
  validate(cfg);
  if (!std::isfinite(new_leaf_fraction) || new_leaf_fraction < 0.0) {
    throw std::invalid_argument("new_leaf_fraction must be finite and >= 0");
  }
  Rng base_rng(base_seed);
  detail::CenterTree levels = detail::draw_center_tree(cfg, base_rng);

  Rng drift_rng(drift_seed);
  const std::uint32_t base_b = cfg.branching.back();
  std::uint32_t extra = static_cast<std::uint32_t>(std::llround(new_leaf_fraction * base_b));
  if (new_leaf_fraction > 0.0 && extra == 0) extra = 1;
  const std::uint32_t leaf_b = base_b + extra;
  if (extra > 0) {
    const std::size_t parents = levels.back().size() / cfg.embedding_dim / base_b;
    const std::vector<double>& old_leaves = levels.back();
    std::vector<double> leaves(parents * leaf_b * cfg.embedding_dim);
    const double sigma = cfg.noise_sigmas[cfg.depth - 1];
    for (std::size_t p = 0; p < parents; ++p) {
      const double* parent = cfg.depth >= 2
                                 ? &levels[cfg.depth - 2][p * cfg.embedding_dim]
                                 : nullptr;
      for (std::uint32_t c = 0; c < leaf_b; ++c) {
        double* out = &leaves[(p * leaf_b + c) * cfg.embedding_dim];
        if (c < base_b) {
          const double* src = &old_leaves[(p * base_b + c) * cfg.embedding_dim];
          std::copy(src, src + cfg.embedding_dim, out);
        } else {
          for (std::uint32_t d = 0; d < cfg.embedding_dim; ++d) {
            out[d] = (parent ? parent[d] : 0.0) + sigma * drift_rng.normal();
          }
        }
      }
    }
    levels.back() = std::move(leaves);
  }
  return detail::draw_items(cfg, levels, leaf_b, drift_rng);
}

// ---- corpus file format ------------------------------------------------

inline constexpr char kCorpusMagic[4] = {'S', 'Q', 'C', '1'};
inline constexpr std::uint32_t kCorpusVersion = 1;

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  BinaryWriter w(path);
  w.magic(kCorpusMagic);
  w.u32(kCorpusVersion);
  w.u32(static_cast<std::uint32_t>(corpus.items.size()));
  w.u32(corpus.dim);
  for (const CorpusItem& item : corpus.items) {
    if (item.embedding.size() != corpus.dim) {
      throw std::invalid_argument("corpus item embedding dimension mismatch");
    }
    if (item.cluster_path.size() > 255) {
      throw std::invalid_argument("cluster path too deep to serialize");
    }
    w.u32(item.id);
    w.u32(item.arrival_day);
    w.f32(item.popularity_weight);
    w.u8(static_cast<std::uint8_t>(item.cluster_path.size()));
    for (auto c : item.cluster_path) w.u16(c);
    for (auto v : item.embedding) w.f32(v);
  }
  w.finish();
}

inline Corpus read_corpus(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kCorpusMagic);
  r.expect_version(kCorpusVersion);
  Corpus corpus;
  const std::uint32_t n = r.u32();
  corpus.dim = r.u32();
  corpus.items.resize(n);
  for (CorpusItem& item : corpus.items) {
    item.id = r.u32();
    item.arrival_day = r.u32();
    item.popularity_weight = r.f32();
    item.cluster_path.resize(r.u8());
    for (auto& c : item.cluster_path) c = r.u16();
    item.embedding.resize(corpus.dim);
    for (auto& v : item.embedding) v = r.f32();
  }
  return corpus;
}

// ---- interaction log ---------------------------------------------------

struct InteractionEvent {
  std::uint32_t day = 0;
  std::vector<ItemId> history;  // fixed length, kPadItemId padded at the tail
  ItemId context = 0;
  ItemId candidate = 0;
  bool clicked = false;
};

struct InteractionLog {
  std::uint32_t history_len = 16;
  std::vector<InteractionEvent> events;
};

// Hidden click model: the label is a coin flip on a logistic function of the
// cosine between the candidate and the mean of history plus context.
inline constexpr double kTopicAffinity = 0.8;
inline constexpr double kClickScale = 4.0;
inline constexpr double kClickBias = -2.0;

inline double click_probability(double cosine) {
  return 1.0 / (1.0 + std::exp(-(kClickScale * cosine + kClickBias)));
}

namespace detail {

// Popularity-weighted sampling over the items whose arrival day has passed.
// Items are kept sorted by arrival day so the day-d eligible set is a prefix.
struct WeightedPool {
  std::vector<std::size_t> order;  // indices into the corpus
  std::vector<double> cum_weight;  // cumulative weights over `order`

  void build(const Corpus& corpus, const std::vector<std::size_t>& members) {
    order = members;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const CorpusItem& ia = corpus.items[a];
      const CorpusItem& ib = corpus.items[b];
      if (ia.arrival_day != ib.arrival_day) return ia.arrival_day < ib.arrival_day;
      return ia.id < ib.id;
    });
    cum_weight.resize(order.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      acc += corpus.items[order[i]].popularity_weight;
      cum_weight[i] = acc;
    }
  }

  std::size_t eligible_count(const Corpus& corpus, std::uint32_t day) const {
    auto it = std::upper_bound(order.begin(), order.end(), day,
                               [&](std::uint32_t d, std::size_t idx) {
                                 return d < corpus.items[idx].arrival_day;
                               });
    return static_cast<std::size_t>(it - order.begin());
  }

  // Returns a corpus index; caller guarantees at least one eligible item.
  std::size_t sample(const Corpus& corpus, std::uint32_t day, Rng& rng) const {
    const std::size_t n = eligible_count(corpus, day);
    const double total = cum_weight[n - 1];
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cum_weight.begin(), cum_weight.begin() + n, u);
    if (it == cum_weight.begin() + n) --it;
    return order[static_cast<std::size_t>(it - cum_weight.begin())];
  }
};

}  // namespace detail

inline InteractionLog generate_interactions(const Corpus& corpus, std::uint32_t num_days,
                                            std::uint32_t events_per_day, std::uint64_t seed,
                                            std::uint32_t history_len = 16) {
  if (corpus.items.empty()) throw std::invalid_argument("interactions: corpus is empty");
  if (num_days == 0 || events_per_day == 0) {
    throw std::invalid_argument("interactions: num_days and events_per_day must be >= 1");
  }
  if (history_len == 0) throw std::invalid_argument("interactions: history_len must be >= 1");

  detail::WeightedPool global;
  {
    std::vector<std::size_t> all(corpus.items.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    global.build(corpus, all);
  }
  if (global.eligible_count(corpus, 0) == 0) {
    throw std::invalid_argument("interactions: no items are available on day 0");
  }

  // One pool per top-level cluster; items without a cluster path fall back to
  // the global pool.
  std::map<std::uint16_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    if (!corpus.items[i].cluster_path.empty()) {
      members[corpus.items[i].cluster_path[0]].push_back(i);
    }
  }
  std::map<std::uint16_t, detail::WeightedPool> topic_pools;
  for (auto& [top, idx] : members) topic_pools[top].build(corpus, idx);

  Rng rng(seed);
  InteractionLog log;
  log.history_len = history_len;
  log.events.reserve(static_cast<std::size_t>(num_days) * events_per_day);

  std::vector<double> pooled(corpus.dim);
  for (std::uint32_t day = 0; day < num_days; ++day) {
    for (std::uint32_t e = 0; e < events_per_day; ++e) {
      InteractionEvent ev;
      ev.day = day;
      const std::size_t anchor = global.sample(corpus, day, rng);
      const detail::WeightedPool* topic = &global;
      const CorpusItem& anchor_item = corpus.items[anchor];
      if (!anchor_item.cluster_path.empty()) {
        auto it = topic_pools.find(anchor_item.cluster_path[0]);
        if (it != topic_pools.end() && it->second.eligible_count(corpus, day) > 0) {
          topic = &it->second;
        }
      }
      auto draw = [&]() {
        const detail::WeightedPool& pool = rng.uniform() < kTopicAffinity ? *topic : global;
        return pool.sample(corpus, day, rng);
      };
      const std::uint32_t used = 1 + static_cast<std::uint32_t>(rng.uniform_below(history_len));
      ev.history.assign(history_len, kPadItemId);
      std::fill(pooled.begin(), pooled.end(), 0.0);
      for (std::uint32_t h = 0; h < used; ++h) {
        const std::size_t idx = draw();
        ev.history[h] = corpus.items[idx].id;
        for (std::uint32_t d = 0; d < corpus.dim; ++d) pooled[d] += corpus.items[idx].embedding[d];
      }
      const std::size_t ctx = draw();
      ev.context = corpus.items[ctx].id;
      for (std::uint32_t d = 0; d < corpus.dim; ++d) pooled[d] += corpus.items[ctx].embedding[d];
      const std::size_t cand = global.sample(corpus, day, rng);
      ev.candidate = corpus.items[cand].id;

      double dot = 0.0, cand_sq = 0.0, pool_sq = 0.0;
      for (std::uint32_t d = 0; d < corpus.dim; ++d) {
        const double c = corpus.items[cand].embedding[d];
        dot += c * pooled[d];
        cand_sq += c * c;
        pool_sq += pooled[d] * pooled[d];
      }
      const double denom = std::sqrt(cand_sq) * std::sqrt(pool_sq);
      const double cosine = denom > 0.0 ? dot / denom : 0.0;
      ev.clicked = rng.uniform() < click_probability(cosine);
      log.events.push_back(std::move(ev));
    }
  }
  return log;
}

inline constexpr char kInteractionsMagic[4] = {'S', 'Q', 'I', '1'};
inline constexpr std::uint32_t kInteractionsVersion = 1;

inline void write_interactions(const InteractionLog& log, const std::string& path) {
  BinaryWriter w(path);
  w.magic(kInteractionsMagic);
  w.u32(kInteractionsVersion);
  w.u32(static_cast<std::uint32_t>(log.events.size()));
  w.u32(log.history_len);
  for (const InteractionEvent& ev : log.events) {
    if (ev.history.size() != log.history_len) {
      throw std::invalid_argument("interaction event history length mismatch");
    }
    w.u32(ev.day);
    for (auto h : ev.history) w.u32(h);
    w.u32(ev.context);
    w.u32(ev.candidate);
    w.u8(ev.clicked ? 1 : 0);
  }
  w.finish();
}

inline InteractionLog read_interactions(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kInteractionsMagic);
  r.expect_version(kInteractionsVersion);
  InteractionLog log;
  const std::uint32_t n = r.u32();
  log.history_len = r.u32();
  log.events.resize(n);
  for (InteractionEvent& ev : log.events) {
    ev.day = r.u32();
    ev.history.resize(log.history_len);
    for (auto& h : ev.history) h = r.u32();
    ev.context = r.u32();
    ev.candidate = r.u32();
    ev.clicked = r.u8() != 0;
  }
  return log;
}

}  // namespace sidkit
