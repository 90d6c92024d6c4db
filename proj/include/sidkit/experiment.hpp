#pragma once
// Paired representation experiments and the snapshot drift study. Every
// comparison trains variant and baseline rankers under the same seeds and
// reports percent deltas with sign-test p-values.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidkit/corpus.hpp"
#include "sidkit/metrics.hpp"
#include "sidkit/ranking.hpp"
#include "sidkit/rqvae.hpp"
#include "sidkit/semantic_id.hpp"

namespace sidkit {

struct ComparisonSpec {
  ReprKind variant = ReprKind::sid_unigram_sum;
  ReprKind baseline = ReprKind::vid_random_hash;
  std::uint32_t hash_buckets = 0;  // 0 = match the non-hash side's row count
};

struct ExperimentSpec {
  std::string corpus_path;
  std::string interactions_path;
  std::string sid_map_path;
  std::uint32_t train_days = 7;
  std::uint32_t eval_day = 7;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  std::uint32_t embedding_dim = 32;
  std::vector<std::uint32_t> hidden = {64, 32};
  double learning_rate = 1e-3;
  std::uint32_t codebook_size = 0;  // 0 = infer from the id map
  std::vector<ComparisonSpec> comparisons;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
inline std::vector<T> parse_list(const std::string& value, const char* what) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(static_cast<T>(std::stoull(tok)));
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("bad ") + what + " entry: " + tok);
    }
  }
  if (out.empty()) throw std::invalid_argument(std::string("empty list for ") + what);
  return out;
}

}  // namespace detail

// Line-oriented key=value config. `compare=` may repeat; its value is
// variant:baseline with an optional :bucket-count third field.
inline ExperimentSpec parse_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment config: " + path);
  ExperimentSpec spec;
  bool eval_day_set = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("experiment config line " + std::to_string(line_no) +
                                  ": expected key=value");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key == "corpus") {
      spec.corpus_path = value;
    } else if (key == "interactions") {
      spec.interactions_path = value;
    } else if (key == "sid_map") {
      spec.sid_map_path = value;
    } else if (key == "train_days") {
      spec.train_days = static_cast<std::uint32_t>(std::stoul(value));
    } else if (key == "eval_day") {
      spec.eval_day = static_cast<std::uint32_t>(std::stoul(value));
      eval_day_set = true;
    } else if (key == "seeds") {
      spec.seeds = detail::parse_list<std::uint64_t>(value, "seeds");
    } else if (key == "embedding_dim") {
      spec.embedding_dim = static_cast<std::uint32_t>(std::stoul(value));
    } else if (key == "hidden") {
      spec.hidden = detail::parse_list<std::uint32_t>(value, "hidden");
    } else if (key == "learning_rate") {
      spec.learning_rate = std::stod(value);
    } else if (key == "codebook_size") {
      spec.codebook_size = static_cast<std::uint32_t>(std::stoul(value));
    } else if (key == "compare") {
      std::vector<std::string> parts;
      std::stringstream ss(value);
      std::string tok;
      while (std::getline(ss, tok, ':')) parts.push_back(detail::trim(tok));
      if (parts.size() != 2 && parts.size() != 3) {
        throw std::invalid_argument("compare wants variant:baseline[:buckets], got " + value);
      }
      ComparisonSpec cmp;
      cmp.variant = parse_repr_kind(parts[0]);
      cmp.baseline = parse_repr_kind(parts[1]);
      if (parts.size() == 3) cmp.hash_buckets = static_cast<std::uint32_t>(std::stoul(parts[2]));
      spec.comparisons.push_back(cmp);
    } else {
      throw std::invalid_argument("experiment config line " + std::to_string(line_no) +
                                  ": unknown key " + key);
    }
  }
  if (spec.corpus_path.empty() || spec.interactions_path.empty()) {
    throw std::invalid_argument("experiment config needs corpus= and interactions=");
  }
  if (spec.comparisons.empty()) throw std::invalid_argument("experiment config has no compare=");
  if (spec.train_days == 0) throw std::invalid_argument("train_days must be >= 1");
  if (!eval_day_set) spec.eval_day = spec.train_days;
  bool wants_sid = false;
  for (const auto& c : spec.comparisons) {
    for (ReprKind k : {c.variant, c.baseline}) {
      wants_sid |= k == ReprKind::sid_unigram_sum || k == ReprKind::sid_bigram_sum;
    }
  }
  if (wants_sid && spec.sid_map_path.empty()) {
    throw std::invalid_argument("experiment config needs sid_map= for semantic-id kinds");
  }
  return spec;
}

struct RunResult {
  std::uint64_t seed = 0;
  EvalReport report;
  std::size_t embed_params = 0;
};

inline RunResult run_ranking_once(const Corpus& corpus, const InteractionLog& log,
                                  const FeatureCatalog& catalog, ReprKind kind,
                                  std::uint32_t hash_buckets, std::uint32_t embedding_dim,
                                  const std::vector<std::uint32_t>& hidden, double lr,
                                  std::uint32_t train_days, std::uint32_t eval_day,
                                  std::uint64_t seed) {
  RepresentationConfig repr;
  repr.kind = kind;
  repr.num_hash_buckets = hash_buckets;
  repr.embedding_dim = embedding_dim;
  repr.hash_seed = seed;
  RankingModel model = make_ranking_model(repr, catalog, hidden, seed);
  AdamParams hp;
  hp.lr = lr;
  train_sequential(model, catalog, log, train_days, seed, hp);
  RunResult run;
  run.seed = seed;
  run.report = evaluate(model, catalog, log, eval_day, corpus);
  run.embed_params = embedding_param_count(model);
  return run;
}

struct ComparisonResult {
  ComparisonSpec spec;
  std::uint32_t resolved_buckets = 0;
  std::vector<RunResult> variant_runs, baseline_runs;
  std::vector<double> delta_ctr_pct, delta_ctr1d_pct;  // per seed, percent
  double mean_delta_ctr_pct = 0.0, std_delta_ctr_pct = 0.0;
  double mean_delta_ctr1d_pct = 0.0, std_delta_ctr1d_pct = 0.0;
  double mean_delta_ctr_abs = 0.0;  // absolute AUC units
  double sign_p_ctr1d_one_sided = 1.0;
  double delta_embed_params_pct = 0.0;
};

namespace detail {

inline std::uint64_t repr_row_count(ReprKind kind, const FeatureCatalog& catalog) {
  switch (kind) {
    case ReprKind::sid_unigram_sum:
      return std::uint64_t{catalog.num_levels} * catalog.codebook_size;
    case ReprKind::sid_bigram_sum:
      return std::uint64_t{catalog.num_levels - 1} * catalog.codebook_size * catalog.codebook_size;
    case ReprKind::content_embedding:
      return catalog.content_dim;
    case ReprKind::vid_random_hash:
      return 0;
  }
  return 0;
}

}  // namespace detail

// Matched-capacity rule: an unspecified hash bucket count copies the row
// count of whatever the hash side is being compared against.
inline std::uint32_t resolve_hash_buckets(const ComparisonSpec& cmp,
                                          const FeatureCatalog& catalog) {
  if (cmp.hash_buckets != 0) return cmp.hash_buckets;
  const bool v_hash = cmp.variant == ReprKind::vid_random_hash;
  const bool b_hash = cmp.baseline == ReprKind::vid_random_hash;
  if (v_hash == b_hash) return 1024;
  const std::uint64_t rows = detail::repr_row_count(v_hash ? cmp.baseline : cmp.variant, catalog);
  return rows > 0 ? static_cast<std::uint32_t>(rows) : 1024;
}

// Computes the aggregate deltas from the per-run reports. Split out so
// callers that produced the runs themselves can reuse the arithmetic.
inline void finalize_comparison(ComparisonResult& res) {
  if (res.variant_runs.size() != res.baseline_runs.size()) {
    throw std::invalid_argument("compare: run count mismatch");
  }
  std::vector<double> ctr_abs;
  for (std::size_t i = 0; i < res.variant_runs.size(); ++i) {
    const RunResult& v = res.variant_runs[i];
    const RunResult& b = res.baseline_runs[i];
    if (v.seed != b.seed) throw std::invalid_argument("compare: mismatched seeds across runs");
    if (v.report.ctr_auc && b.report.ctr_auc) {
      res.delta_ctr_pct.push_back(100.0 * (*v.report.ctr_auc - *b.report.ctr_auc) /
                                  *b.report.ctr_auc);
      ctr_abs.push_back(*v.report.ctr_auc - *b.report.ctr_auc);
    }
    if (v.report.ctr_1d_auc && b.report.ctr_1d_auc) {
      res.delta_ctr1d_pct.push_back(100.0 * (*v.report.ctr_1d_auc - *b.report.ctr_1d_auc) /
                                    *b.report.ctr_1d_auc);
    }
  }
  if (!res.delta_ctr_pct.empty()) {
    res.mean_delta_ctr_pct = mean(res.delta_ctr_pct);
    res.std_delta_ctr_pct = sample_stddev(res.delta_ctr_pct);
    res.mean_delta_ctr_abs = mean(ctr_abs);
  }
  if (!res.delta_ctr1d_pct.empty()) {
    res.mean_delta_ctr1d_pct = mean(res.delta_ctr1d_pct);
    res.std_delta_ctr1d_pct = sample_stddev(res.delta_ctr1d_pct);
    res.sign_p_ctr1d_one_sided = sign_test_one_sided(res.delta_ctr1d_pct);
  }
  if (!res.variant_runs.empty() && res.baseline_runs.front().embed_params > 0) {
    const double v = double(res.variant_runs.front().embed_params);
    const double b = double(res.baseline_runs.front().embed_params);
    res.delta_embed_params_pct = 100.0 * (v - b) / b;
  }
}

inline ComparisonResult compare_representations(
    const Corpus& corpus, const InteractionLog& log, const FeatureCatalog& catalog,
    const ComparisonSpec& cmp, const std::vector<std::uint64_t>& seeds,
    std::uint32_t embedding_dim, const std::vector<std::uint32_t>& hidden, double lr,
    std::uint32_t train_days, std::uint32_t eval_day) {
  if (seeds.empty()) throw std::invalid_argument("compare: need at least one seed");
  ComparisonResult res;
  res.spec = cmp;
  res.resolved_buckets = resolve_hash_buckets(cmp, catalog);
  for (std::uint64_t seed : seeds) {
    res.variant_runs.push_back(run_ranking_once(corpus, log, catalog, cmp.variant,
                                                res.resolved_buckets, embedding_dim, hidden, lr,
                                                train_days, eval_day, seed));
    res.baseline_runs.push_back(run_ranking_once(corpus, log, catalog, cmp.baseline,
                                                 res.resolved_buckets, embedding_dim, hidden, lr,
                                                 train_days, eval_day, seed));
  }
  finalize_comparison(res);
  return res;
}

namespace detail {

inline std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "na";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

struct ExperimentOutput {
  std::vector<ComparisonResult> comparisons;
};

inline ExperimentOutput run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
  const Corpus corpus = read_corpus(spec.corpus_path);
  const InteractionLog log = read_interactions(spec.interactions_path);
  SidMap map;
  bool have_map = false;
  if (!spec.sid_map_path.empty()) {
    map = read_sid_map(spec.sid_map_path);
    have_map = true;
  }
  std::uint32_t codebook_size = spec.codebook_size;
  if (codebook_size == 0 && have_map) {
    std::uint64_t max_code = 0;
    for (const SidMapEntry& e : map.entries) {
      const SemanticId sid = unpack({e.packed}, map.num_levels, map.bits_per_token);
      for (auto c : sid.codes) max_code = std::max<std::uint64_t>(max_code, c);
    }
    codebook_size = static_cast<std::uint32_t>(max_code + 1);
  }
  const FeatureCatalog catalog =
      make_feature_catalog(corpus, have_map ? &map : nullptr, codebook_size);

  std::filesystem::create_directories(out_dir);
  std::ofstream runs(std::filesystem::path(out_dir) / "runs.tsv");
  if (!runs) throw IoError("cannot open runs.tsv under " + out_dir);
  runs << "comparison\trole\tkind\tseed\tctr_auc\tctr_1d_auc\teval_events\tcold_events\t"
          "embed_params\n";
  std::ofstream agg(std::filesystem::path(out_dir) / "aggregate.tsv");
  if (!agg) throw IoError("cannot open aggregate.tsv under " + out_dir);
  agg << "comparison\tvariant\tbaseline\thash_buckets\tdelta_ctr_auc_pct_mean\t"
         "delta_ctr_auc_pct_std\tdelta_ctr_1d_auc_pct_mean\tdelta_ctr_1d_auc_pct_std\t"
         "delta_embed_params_pct\tsign_p_ctr_1d\n";

  ExperimentOutput out;
  for (std::size_t c = 0; c < spec.comparisons.size(); ++c) {
    ComparisonResult res = compare_representations(
        corpus, log, catalog, spec.comparisons[c], spec.seeds, spec.embedding_dim, spec.hidden,
        spec.learning_rate, spec.train_days, spec.eval_day);
    for (const char* role : {"variant", "baseline"}) {
      const auto& runs_vec =
          std::string(role) == "variant" ? res.variant_runs : res.baseline_runs;
      const ReprKind kind =
          std::string(role) == "variant" ? res.spec.variant : res.spec.baseline;
      for (const RunResult& r : runs_vec) {
        runs << c << '\t' << role << '\t' << to_string(kind) << '\t' << r.seed << '\t'
             << detail::fmt_opt(r.report.ctr_auc) << '\t' << detail::fmt_opt(r.report.ctr_1d_auc)
             << '\t' << r.report.num_eval_events << '\t' << r.report.num_cold_start_events << '\t'
             << r.embed_params << "\n";
      }
    }
    agg << c << '\t' << to_string(res.spec.variant) << '\t' << to_string(res.spec.baseline)
        << '\t' << res.resolved_buckets << '\t' << detail::fmt(res.mean_delta_ctr_pct) << '\t'
        << detail::fmt(res.std_delta_ctr_pct) << '\t' << detail::fmt(res.mean_delta_ctr1d_pct)
        << '\t' << detail::fmt(res.std_delta_ctr1d_pct) << '\t'
        << detail::fmt(res.delta_embed_params_pct) << '\t'
        << detail::fmt(res.sign_p_ctr1d_one_sided) << "\n";
    out.comparisons.push_back(std::move(res));
  }
  if (!runs || !agg) throw IoError("write failed under " + out_dir);
  return out;
}

// ---- snapshot drift study ----------------------------------------------

// Mean cosine between matching top-level cluster centroids of two corpus
// snapshots. Low alignment means the snapshots do not share a hierarchy and
// encoder drift cannot be separated from catalog churn.
inline double snapshot_alignment(const Corpus& a, const Corpus& b) {
  auto centroids = [](const Corpus& c) {
    std::map<std::uint16_t, std::pair<std::vector<double>, std::size_t>> acc;
    for (const CorpusItem& item : c.items) {
      if (item.cluster_path.empty()) continue;
      auto& [sum, count] = acc[item.cluster_path[0]];
      if (sum.empty()) sum.assign(c.dim, 0.0);
      for (std::uint32_t d = 0; d < c.dim; ++d) sum[d] += item.embedding[d];
      ++count;
    }
    return acc;
  };
  const auto ca = centroids(a);
  const auto cb = centroids(b);
  double cos_sum = 0.0;
  std::size_t n = 0;
  for (const auto& [top, va] : ca) {
    auto it = cb.find(top);
    if (it == cb.end()) continue;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t d = 0; d < va.first.size(); ++d) {
      dot += va.first[d] * it->second.first[d];
      na += va.first[d] * va.first[d];
      nb += it->second.first[d] * it->second.first[d];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    cos_sum += denom > 0.0 ? dot / denom : 0.0;
    ++n;
  }
  if (n == 0) return 0.0;
  return cos_sum / double(n);
}

struct StabilitySpec {
  ReprKind kind = ReprKind::sid_bigram_sum;
  std::uint32_t embedding_dim = 32;
  std::vector<std::uint32_t> hidden = {64, 32};
  double learning_rate = 1e-3;
  std::uint32_t train_days = 7;
  std::uint32_t eval_day = 7;
  std::uint32_t bits_per_token = 16;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  double min_alignment = 0.5;
};

struct StabilityResult {
  double alignment = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> v0_runs, v1_runs;
  std::vector<double> delta_ctr_abs;  // v1 - v0, absolute AUC units
  double mean_abs_delta_ctr = 0.0;
  double sign_p_two_sided = 1.0;
};

// Retrains the ranker on the later snapshot twice: once with IDs assigned by
// the old frozen encoder, once with IDs from the refreshed encoder. Both
// models must be frozen and are applied to the same (new) corpus.
inline StabilityResult run_stability_study(const RqVaeModel& model_v0,
                                           const RqVaeModel& model_v1, const Corpus& corpus0,
                                           const Corpus& corpus1, const InteractionLog& log1,
                                           const StabilitySpec& spec) {
  StabilityResult res;
  res.alignment = snapshot_alignment(corpus0, corpus1);
  if (res.alignment < spec.min_alignment) {
    throw std::invalid_argument("stability study: snapshots do not share a hierarchy (alignment " +
                                detail::fmt(res.alignment) + ")");
  }
  const SidMap map0 = build_sid_map(model_v0, corpus1, spec.bits_per_token);
  const SidMap map1 = build_sid_map(model_v1, corpus1, spec.bits_per_token);
  const FeatureCatalog cat0 = make_feature_catalog(corpus1, &map0, model_v0.config.codebook_size);
  const FeatureCatalog cat1 = make_feature_catalog(corpus1, &map1, model_v1.config.codebook_size);
  res.seeds = spec.seeds;
  for (std::uint64_t seed : spec.seeds) {
    res.v0_runs.push_back(run_ranking_once(corpus1, log1, cat0, spec.kind, 0, spec.embedding_dim,
                                           spec.hidden, spec.learning_rate, spec.train_days,
                                           spec.eval_day, seed));
    res.v1_runs.push_back(run_ranking_once(corpus1, log1, cat1, spec.kind, 0, spec.embedding_dim,
                                           spec.hidden, spec.learning_rate, spec.train_days,
                                           spec.eval_day, seed));
  }
  std::vector<double> deltas;
  for (std::size_t i = 0; i < res.v0_runs.size(); ++i) {
    if (res.v0_runs[i].report.ctr_auc && res.v1_runs[i].report.ctr_auc) {
      deltas.push_back(*res.v1_runs[i].report.ctr_auc - *res.v0_runs[i].report.ctr_auc);
    }
  }
  res.delta_ctr_abs = deltas;
  if (!deltas.empty()) {
    std::vector<double> abs_d(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) abs_d[i] = std::abs(deltas[i]);
    res.mean_abs_delta_ctr = mean(abs_d);
    res.sign_p_two_sided = sign_test_two_sided(deltas);
  }
  return res;
}

inline void write_stability_report(const StabilityResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "seed\tctr_auc_old_ids\tctr_auc_new_ids\tctr_1d_auc_old_ids\tctr_1d_auc_new_ids\n";
  for (std::size_t i = 0; i < res.v0_runs.size(); ++i) {
    out << res.seeds[i] << '\t' << detail::fmt_opt(res.v0_runs[i].report.ctr_auc) << '\t'
        << detail::fmt_opt(res.v1_runs[i].report.ctr_auc) << '\t'
        << detail::fmt_opt(res.v0_runs[i].report.ctr_1d_auc) << '\t'
        << detail::fmt_opt(res.v1_runs[i].report.ctr_1d_auc) << "\n";
  }
  out << "# alignment\t" << detail::fmt(res.alignment) << "\n";
  out << "# mean_abs_delta_ctr_auc\t" << detail::fmt(res.mean_abs_delta_ctr) << "\n";
  out << "# sign_p_two_sided\t" << detail::fmt(res.sign_p_two_sided) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sidkit
