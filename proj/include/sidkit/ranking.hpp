#pragma once
// Sequential CTR ranker. An item becomes a fixed-width representation via
// one of three regimes: a random hash bucket embedding, a learned linear
// projection of its content embedding, or the sum of its Semantic ID n-gram
// embeddings. Mean-pooled history, context, and candidate representations
// are concatenated and scored by a small MLP trained with per-event BCE in
// day order.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/metrics.hpp"
#include "sidkit/nn.hpp"
#include "sidkit/rng.hpp"
#include "sidkit/semantic_id.hpp"

namespace sidkit {

enum class ReprKind { vid_random_hash, content_embedding, sid_unigram_sum, sid_bigram_sum };

inline const char* to_string(ReprKind kind) {
  switch (kind) {
    case ReprKind::vid_random_hash: return "vid_random_hash";
    case ReprKind::content_embedding: return "content_embedding";
    case ReprKind::sid_unigram_sum: return "sid_unigram_sum";
    case ReprKind::sid_bigram_sum: return "sid_bigram_sum";
  }
  return "?";
}

inline ReprKind parse_repr_kind(const std::string& name) {
  if (name == "vid_random_hash") return ReprKind::vid_random_hash;
  if (name == "content_embedding") return ReprKind::content_embedding;
  if (name == "sid_unigram_sum") return ReprKind::sid_unigram_sum;
  if (name == "sid_bigram_sum") return ReprKind::sid_bigram_sum;
  throw std::invalid_argument("unknown representation kind: " + name);
}

struct RepresentationConfig {
  ReprKind kind = ReprKind::vid_random_hash;
  std::uint32_t num_hash_buckets = 1024;  // vid_random_hash only
  std::uint32_t embedding_dim = 32;
  std::uint64_t hash_seed = 0;
};

// Per-item lookups shared by all regimes. Content spans point into the
// corpus, which must outlive the catalog.
struct FeatureCatalog {
  std::uint32_t content_dim = 0;
  std::uint32_t codebook_size = 0;
  std::uint32_t num_levels = 0;
  std::unordered_map<ItemId, std::span<const float>> content;
  std::unordered_map<ItemId, SemanticId> sid;
};

inline FeatureCatalog make_feature_catalog(const Corpus& corpus, const SidMap* map,
                                           std::uint32_t codebook_size) {
  FeatureCatalog cat;
  cat.content_dim = corpus.dim;
  cat.codebook_size = codebook_size;
  for (const CorpusItem& item : corpus.items) {
    cat.content[item.id] = item.embedding;
  }
  if (map) {
    cat.num_levels = map->num_levels;
    for (const SidMapEntry& e : map->entries) {
      cat.sid[e.item] = unpack({e.packed}, map->num_levels, map->bits_per_token);
    }
  }
  return cat;
}

// FNV-1a over the four little-endian id bytes; the seed perturbs the offset
// basis so different runs get independent bucket layouts.
inline std::uint64_t hash_bucket(ItemId id, std::uint64_t hash_seed, std::uint32_t num_buckets) {
  if (num_buckets == 0) throw std::invalid_argument("hash_bucket: num_buckets must be >= 1");
  std::uint64_t h = 14695981039346656037ull ^ hash_seed;
  for (int i = 0; i < 4; ++i) {
    h ^= (id >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
  return h % num_buckets;
}

struct EmbeddingTable {
  std::uint64_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<double> weights;  // rows x dim, row major

  double* row(std::uint64_t r) { return &weights[r * dim]; }
  const double* row(std::uint64_t r) const { return &weights[r * dim]; }
};

struct RankingModel {
  RepresentationConfig repr;
  std::vector<EmbeddingTable> tables;  // hash: 1 table; sid n-grams: one per table index
  std::vector<double> projection;      // content kind: embedding_dim x content_dim
  std::uint32_t content_dim = 0;
  Mlp scorer;  // input 3 * embedding_dim, sigmoid applied on top
};

inline std::size_t embedding_param_count(const RankingModel& m) {
  std::size_t n = m.projection.size();
  for (const EmbeddingTable& t : m.tables) n += t.weights.size();
  return n;
}

inline RankingModel make_ranking_model(const RepresentationConfig& repr,
                                       const FeatureCatalog& catalog,
                                       const std::vector<std::uint32_t>& hidden_dims,
                                       std::uint64_t seed) {
  if (repr.embedding_dim == 0) throw std::invalid_argument("embedding_dim must be >= 1");
  RankingModel m;
  m.repr = repr;
  Rng rng(seed);
  auto add_table = [&](std::uint64_t rows) {
    EmbeddingTable t;
    t.rows = rows;
    t.dim = repr.embedding_dim;
    t.weights.resize(rows * repr.embedding_dim);
    for (auto& w : t.weights) w = rng.uniform(-0.05, 0.05);
    m.tables.push_back(std::move(t));
  };
  switch (repr.kind) {
    case ReprKind::vid_random_hash:
      if (repr.num_hash_buckets == 0) throw std::invalid_argument("need at least one bucket");
      add_table(repr.num_hash_buckets);
      break;
    case ReprKind::content_embedding: {
      if (catalog.content_dim == 0) throw std::invalid_argument("catalog has no content dim");
      m.content_dim = catalog.content_dim;
      const double limit = std::sqrt(6.0 / (double(m.content_dim) + double(repr.embedding_dim)));
      m.projection.resize(std::size_t{repr.embedding_dim} * m.content_dim);
      for (auto& w : m.projection) w = rng.uniform(-limit, limit);
      break;
    }
    case ReprKind::sid_unigram_sum: {
      if (catalog.num_levels == 0 || catalog.codebook_size == 0) {
        throw std::invalid_argument("catalog has no semantic ids");
      }
      for (std::uint32_t l = 0; l < catalog.num_levels; ++l) add_table(catalog.codebook_size);
      break;
    }
    case ReprKind::sid_bigram_sum: {
      if (catalog.num_levels < 2 || catalog.codebook_size == 0) {
        throw std::invalid_argument("catalog has no semantic ids or only one level");
      }
      const std::uint64_t rows = std::uint64_t{catalog.codebook_size} * catalog.codebook_size;
      for (std::uint32_t l = 0; l + 1 < catalog.num_levels; ++l) add_table(rows);
      break;
    }
  }
  std::vector<std::uint32_t> dims = hidden_dims;
  dims.push_back(1);
  m.scorer = make_mlp(3 * repr.embedding_dim, dims);
  mlp_init(m.scorer, rng);
  return m;
}

namespace detail {

// Rows of the model's tables an item maps to. Content items use the
// projection instead and return no rows.
inline void item_rows(const RankingModel& m, const FeatureCatalog& catalog, ItemId id,
                      std::vector<std::pair<std::uint32_t, std::uint64_t>>& out) {
  out.clear();
  switch (m.repr.kind) {
    case ReprKind::vid_random_hash:
      out.emplace_back(0, hash_bucket(id, m.repr.hash_seed, m.repr.num_hash_buckets));
      break;
    case ReprKind::content_embedding:
      break;
    case ReprKind::sid_unigram_sum:
    case ReprKind::sid_bigram_sum: {
      auto it = catalog.sid.find(id);
      if (it == catalog.sid.end()) {
        throw std::out_of_range("item has no semantic id: " + std::to_string(id));
      }
      const std::uint32_t n = m.repr.kind == ReprKind::sid_unigram_sum ? 1 : 2;
      for (const NgramFeature& f : extract_ngrams(it->second, n, catalog.codebook_size)) {
        out.emplace_back(f.table_index, f.row_index);
      }
      break;
    }
  }
}

inline std::span<const float> content_of(const FeatureCatalog& catalog, ItemId id) {
  auto it = catalog.content.find(id);
  if (it == catalog.content.end()) {
    throw std::out_of_range("item has no content embedding: " + std::to_string(id));
  }
  return it->second;
}

}  // namespace detail

inline std::vector<double> represent_item(const RankingModel& m, const FeatureCatalog& catalog,
                                          ItemId id) {
  std::vector<double> rep(m.repr.embedding_dim, 0.0);
  if (m.repr.kind == ReprKind::content_embedding) {
    const std::span<const float> x = detail::content_of(catalog, id);
    if (x.size() != m.content_dim) throw std::invalid_argument("content dim mismatch");
    for (std::uint32_t o = 0; o < m.repr.embedding_dim; ++o) {
      const double* row = &m.projection[std::size_t{o} * m.content_dim];
      double acc = 0.0;
      for (std::uint32_t i = 0; i < m.content_dim; ++i) acc += row[i] * x[i];
      rep[o] = acc;
    }
    return rep;
  }
  std::vector<std::pair<std::uint32_t, std::uint64_t>> rows;
  detail::item_rows(m, catalog, id, rows);
  for (const auto& [t, r] : rows) {
    const double* src = m.tables[t].row(r);
    for (std::uint32_t i = 0; i < m.repr.embedding_dim; ++i) rep[i] += src[i];
  }
  return rep;
}

struct EventGrads {
  MlpGrads scorer;
  // Deterministic iteration order matters for reproducible updates.
  std::map<std::pair<std::uint32_t, std::uint64_t>, std::vector<double>> rows;
  std::vector<double> projection;
  double loss = 0.0;
  double prob = 0.5;
};

// Forward pass for one event; when `grads` is non-null also runs backward
// for the BCE loss against `label` and fills parameter gradients.
inline double score_event(const RankingModel& m, const FeatureCatalog& catalog,
                          std::span<const ItemId> history, ItemId context, ItemId candidate,
                          bool label = false, EventGrads* grads = nullptr) {
  const std::uint32_t dim = m.repr.embedding_dim;
  std::vector<ItemId> present;
  present.reserve(history.size());
  for (ItemId id : history) {
    if (id != kPadItemId) present.push_back(id);
  }
  std::vector<double> input(3 * dim, 0.0);
  for (ItemId id : present) {
    const std::vector<double> rep = represent_item(m, catalog, id);
    for (std::uint32_t i = 0; i < dim; ++i) input[i] += rep[i];
  }
  if (!present.empty()) {
    for (std::uint32_t i = 0; i < dim; ++i) input[i] /= double(present.size());
  }
  const std::vector<double> ctx_rep = represent_item(m, catalog, context);
  const std::vector<double> cand_rep = represent_item(m, catalog, candidate);
  for (std::uint32_t i = 0; i < dim; ++i) {
    input[dim + i] = ctx_rep[i];
    input[2 * dim + i] = cand_rep[i];
  }
  MlpActs acts;
  mlp_forward(m.scorer, input.data(), acts);
  const double logit = acts.out.back()[0];
  if (!std::isfinite(logit)) throw NumericError("scorer produced non-finite logit");
  const double prob = 1.0 / (1.0 + std::exp(-logit));
  if (!grads) return prob;

  const double y = label ? 1.0 : 0.0;
  const double p = std::min(std::max(prob, 1e-12), 1.0 - 1e-12);
  grads->prob = prob;
  grads->loss = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  grads->scorer.match(m.scorer);
  grads->rows.clear();
  grads->projection.assign(m.projection.size(), 0.0);

  std::vector<double> d_input(3 * dim, 0.0);
  mlp_backward(m.scorer, input.data(), acts, {prob - y}, grads->scorer, d_input.data());

  std::vector<std::pair<std::uint32_t, std::uint64_t>> rows;
  auto route = [&](ItemId id, const double* d_rep, double scale) {
    if (m.repr.kind == ReprKind::content_embedding) {
      const std::span<const float> x = detail::content_of(catalog, id);
      for (std::uint32_t o = 0; o < dim; ++o) {
        double* prow = &grads->projection[std::size_t{o} * m.content_dim];
        const double g = d_rep[o] * scale;
        for (std::uint32_t i = 0; i < m.content_dim; ++i) prow[i] += g * x[i];
      }
      return;
    }
    detail::item_rows(m, catalog, id, rows);
    for (const auto& key : rows) {
      auto [it, fresh] = grads->rows.try_emplace(key);
      if (fresh) it->second.assign(dim, 0.0);
      for (std::uint32_t i = 0; i < dim; ++i) it->second[i] += d_rep[i] * scale;
    }
  };
  if (!present.empty()) {
    const double scale = 1.0 / double(present.size());
    for (ItemId id : present) route(id, d_input.data(), scale);
  }
  route(context, d_input.data() + dim, 1.0);
  route(candidate, d_input.data() + 2 * dim, 1.0);
  return prob;
}

inline double score(const RankingModel& m, const FeatureCatalog& catalog,
                    std::span<const ItemId> history, ItemId context, ItemId candidate) {
  return score_event(m, catalog, history, context, candidate);
}

struct RankingOptState {
  std::int64_t step = 0;
  MlpAdam scorer;
  AdamState projection;
  std::vector<AdamState> tables;  // moments over full tables, rows touched lazily
};

// One BCE step on a single event. Embedding rows not touched by the event
// keep their Adam moments unchanged; bias correction uses the global step.
inline double train_event(RankingModel& m, const FeatureCatalog& catalog,
                          const InteractionEvent& ev, RankingOptState& opt,
                          const AdamParams& hp) {
  EventGrads grads;
  score_event(m, catalog, ev.history, ev.context, ev.candidate, ev.clicked, &grads);
  const std::int64_t t = ++opt.step;
  opt.scorer.match(m.scorer);
  mlp_adam_update(m.scorer, grads.scorer, opt.scorer, hp, t);
  if (!m.projection.empty()) {
    adam_update(m.projection, grads.projection, opt.projection, hp, t);
  }
  opt.tables.resize(m.tables.size());
  for (std::size_t i = 0; i < m.tables.size(); ++i) {
    opt.tables[i].ensure(m.tables[i].weights.size());
  }
  const std::uint32_t dim = m.repr.embedding_dim;
  for (const auto& [key, g] : grads.rows) {
    EmbeddingTable& table = m.tables[key.first];
    AdamState& st = opt.tables[key.first];
    const std::size_t off = key.second * dim;
    adam_update(table.weights.data() + off, g.data(), st.m.data() + off, st.v.data() + off, dim,
                hp, t);
  }
  return grads.loss;
}

struct RankTrainLog {
  std::vector<double> day_mean_loss;
  std::size_t events_trained = 0;
};

// Trains on all events with day < train_day_end, in day order with a seeded
// within-day shuffle. Events must already be sorted by day.
inline RankTrainLog train_sequential(RankingModel& m, const FeatureCatalog& catalog,
                                     const InteractionLog& log, std::uint32_t train_day_end,
                                     std::uint64_t seed, const AdamParams& hp = {}) {
  for (std::size_t i = 1; i < log.events.size(); ++i) {
    if (log.events[i].day < log.events[i - 1].day) {
      throw std::invalid_argument("train_sequential: events are not sorted by day");
    }
  }
  std::map<std::uint32_t, std::vector<std::size_t>> by_day;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    if (log.events[i].day < train_day_end) by_day[log.events[i].day].push_back(i);
  }
  if (by_day.empty()) throw std::invalid_argument("train_sequential: empty training range");

  Rng rng(seed);
  RankingOptState opt;
  RankTrainLog out;
  for (auto& [day, idx] : by_day) {
    rng.shuffle(idx);
    double loss_sum = 0.0;
    for (std::size_t i : idx) {
      loss_sum += train_event(m, catalog, log.events[i], opt, hp);
    }
    out.day_mean_loss.push_back(loss_sum / double(idx.size()));
    out.events_trained += idx.size();
  }
  return out;
}

struct EvalReport {
  std::optional<double> ctr_auc;
  std::optional<double> ctr_1d_auc;
  std::size_t num_eval_events = 0;
  std::size_t num_cold_start_events = 0;
  std::optional<double> delta_ctr_auc_pct;     // filled by comparisons
  std::optional<double> delta_ctr_1d_auc_pct;  // filled by comparisons
};

// Scores the eval day and reports overall AUC plus the slice of events whose
// candidate first arrived on that day.
inline EvalReport evaluate(const RankingModel& m, const FeatureCatalog& catalog,
                           const InteractionLog& log, std::uint32_t eval_day,
                           const Corpus& corpus) {
  std::unordered_map<ItemId, std::uint32_t> arrival;
  arrival.reserve(corpus.items.size());
  for (const CorpusItem& item : corpus.items) arrival[item.id] = item.arrival_day;

  EvalReport report;
  std::vector<double> scores, cold_scores;
  std::vector<std::uint8_t> labels, cold_labels;
  for (const InteractionEvent& ev : log.events) {
    if (ev.day != eval_day) continue;
    const double p = score(m, catalog, ev.history, ev.context, ev.candidate);
    scores.push_back(p);
    labels.push_back(ev.clicked ? 1 : 0);
    auto it = arrival.find(ev.candidate);
    if (it != arrival.end() && it->second == eval_day) {
      cold_scores.push_back(p);
      cold_labels.push_back(ev.clicked ? 1 : 0);
    }
  }
  report.num_eval_events = scores.size();
  report.num_cold_start_events = cold_scores.size();
  if (!scores.empty()) report.ctr_auc = roc_auc(scores, labels);
  if (!cold_scores.empty()) report.ctr_1d_auc = roc_auc(cold_scores, cold_labels);
  return report;
}

}  // namespace sidkit
