// Command line front end for the semantic id toolkit: corpus generation,
// quantizer training, id assignment, trie analytics, ranking experiments,
// and the snapshot drift study.
//
// Exit codes: 0 success, 2 usage error, 3 missing or stale input, 4 numeric
// failure during training.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sidkit/sidkit.hpp"

namespace {

using namespace sidkit;

struct GenDataArgs {
  std::string out_corpus;
  std::string out_interactions;
  std::string manifest;
  std::uint64_t seed = 1;
  HierarchyGenConfig cfg;
  std::uint32_t events_per_day = 3000;
  std::uint32_t history_len = 16;
  std::optional<std::uint64_t> drift_from_seed;
  double drift_new_leaf_fraction = 0.2;
};

void run_gen_data(const GenDataArgs& a) {
  Corpus corpus;
  if (a.drift_from_seed) {
    corpus = generate_drifted_corpus(a.cfg, *a.drift_from_seed, a.seed, a.drift_new_leaf_fraction);
  } else {
    corpus = generate_corpus(a.cfg, a.seed);
  }
  write_corpus(corpus, a.out_corpus);
  std::printf("corpus: %zu items, dim %u -> %s\n", corpus.items.size(), corpus.dim,
              a.out_corpus.c_str());
  Manifest manifest = a.manifest.empty() ? Manifest{} : Manifest::load_or_empty(a.manifest);
  if (!a.manifest.empty()) manifest.record("corpus", a.out_corpus);
  if (!a.out_interactions.empty()) {
    const InteractionLog log = generate_interactions(corpus, a.cfg.num_days, a.events_per_day,
                                                     a.seed + 1, a.history_len);
    write_interactions(log, a.out_interactions);
    std::size_t clicks = 0;
    for (const auto& ev : log.events) clicks += ev.clicked ? 1 : 0;
    std::printf("interactions: %zu events over %u days, click rate %.3f -> %s\n",
                log.events.size(), a.cfg.num_days,
                double(clicks) / double(log.events.size()), a.out_interactions.c_str());
    if (!a.manifest.empty()) manifest.record("interactions", a.out_interactions);
  }
  if (!a.manifest.empty()) manifest.save(a.manifest);
}

struct TrainArgs {
  std::string corpus_path;
  std::string out_model;
  std::string out_log;
  std::string manifest;
  std::uint64_t seed = 1;
  std::int64_t steps = 1500;
  RqVaeConfig cfg;
  std::vector<std::uint32_t> encoder_dims;  // empty = derived from dims
  std::vector<std::uint32_t> decoder_dims;
  bool no_resets = false;
};

void run_train_rqvae(const TrainArgs& a) {
  Manifest manifest = a.manifest.empty() ? Manifest{} : Manifest::load_or_empty(a.manifest);
  if (!a.manifest.empty()) manifest.verify("corpus", a.corpus_path);
  const Corpus corpus = read_corpus(a.corpus_path);
  RqVaeConfig cfg = a.cfg;
  cfg.input_dim = corpus.dim;
  cfg.encoder_dims = a.encoder_dims.empty()
                         ? std::vector<std::uint32_t>{cfg.input_dim, cfg.input_dim / 2, cfg.latent_dim}
                         : a.encoder_dims;
  cfg.decoder_dims = a.decoder_dims.empty()
                         ? std::vector<std::uint32_t>{cfg.latent_dim, cfg.input_dim / 2, cfg.input_dim}
                         : a.decoder_dims;
  RqVaeModel model = make_rqvae(cfg, a.seed);
  const TrainingLog log = train(model, corpus, a.steps, a.seed, !a.no_resets);
  freeze(model);
  save_model(model, a.out_model);
  if (!a.out_log.empty()) write_training_log(log, a.out_log);
  if (!log.entries.empty()) {
    const TrainingLogEntry& last = log.entries.back();
    std::printf("final step %lld: recon %.6f rqvae %.6f total %.6f\n",
                static_cast<long long>(last.step), last.recon, last.rqvae, last.total);
  }
  std::printf("codebook utilization over last 10 batches:");
  for (std::size_t l = 0; l < log.window_utilization.size(); ++l) {
    std::printf(" l%zu=%.3f", l + 1, log.window_utilization[l]);
  }
  std::printf("\nfrozen checkpoint -> %s\n", a.out_model.c_str());
  if (!a.manifest.empty()) {
    manifest.record("model", a.out_model);
    manifest.save(a.manifest);
  }
}

struct EncodeArgs {
  std::string model_path;
  std::string corpus_path;
  std::string out_map;
  std::string manifest;
  std::uint32_t bits_per_token = 16;
};

void run_encode(const EncodeArgs& a) {
  Manifest manifest = a.manifest.empty() ? Manifest{} : Manifest::load_or_empty(a.manifest);
  if (!a.manifest.empty()) {
    manifest.verify("corpus", a.corpus_path);
    manifest.verify("model", a.model_path);
  }
  const RqVaeModel model = load_model(a.model_path);
  const Corpus corpus = read_corpus(a.corpus_path);
  const SidMap map = build_sid_map(model, corpus, a.bits_per_token);
  write_sid_map(map, a.out_map);
  std::printf("assigned %zu ids (%u levels, %u bits per token) -> %s\n", map.entries.size(),
              unsigned(map.num_levels), unsigned(map.bits_per_token), a.out_map.c_str());
  std::printf("storage compression vs float embedding: %.0fx\n",
              storage_compression_ratio(corpus.dim));
  if (!a.manifest.empty()) {
    manifest.record("sid_map", a.out_map);
    manifest.save(a.manifest);
  }
}

struct TrieArgs {
  std::string map_path;
  std::string corpus_path;
  std::string out_path;
  std::string manifest;
  std::size_t max_pairs = 200;
  std::uint64_t seed = 1;
};

void run_analyze_trie(const TrieArgs& a) {
  Manifest manifest = a.manifest.empty() ? Manifest{} : Manifest::load_or_empty(a.manifest);
  if (!a.manifest.empty()) {
    manifest.verify("corpus", a.corpus_path);
    manifest.verify("sid_map", a.map_path);
  }
  const Corpus corpus = read_corpus(a.corpus_path);
  const SidMap map = read_sid_map(a.map_path);
  std::unordered_map<ItemId, SemanticId> by_item;
  for (const SidMapEntry& e : map.entries) {
    by_item[e.item] = unpack({e.packed}, map.num_levels, map.bits_per_token);
  }
  std::vector<SemanticId> ids;
  ids.reserve(corpus.items.size());
  for (const CorpusItem& item : corpus.items) {
    auto it = by_item.find(item.id);
    if (it == by_item.end()) {
      throw std::invalid_argument("corpus item " + std::to_string(item.id) +
                                  " has no assigned id");
    }
    ids.push_back(it->second);
  }
  const std::vector<PrefixStats> report =
      prefix_similarity_report(corpus, ids, a.max_pairs, a.seed);
  write_prefix_report(report, a.out_path);
  for (const PrefixStats& s : report) {
    std::printf("prefix %u: avg cos %.4f, subtrie size p25/p50/p75 = %llu/%llu/%llu (%llu groups)\n",
                s.prefix_len, s.avg_cos_sim, static_cast<unsigned long long>(s.p25_size),
                static_cast<unsigned long long>(s.p50_size),
                static_cast<unsigned long long>(s.p75_size),
                static_cast<unsigned long long>(s.num_groups));
  }
}

struct ExperimentArgs {
  std::string config_path;
  std::string out_dir;
  std::string manifest;
};

void run_run_experiment(const ExperimentArgs& a) {
  const ExperimentSpec spec = parse_experiment_spec(a.config_path);
  if (!a.manifest.empty()) {
    Manifest manifest = Manifest::load_or_empty(a.manifest);
    manifest.verify("corpus", spec.corpus_path);
    manifest.verify("interactions", spec.interactions_path);
    if (!spec.sid_map_path.empty()) manifest.verify("sid_map", spec.sid_map_path);
  }
  const ExperimentOutput out = run_experiment(spec, a.out_dir);
  for (const ComparisonResult& res : out.comparisons) {
    std::printf("%s vs %s (buckets %u): ctr %+0.2f%% +- %.2f, ctr-1d %+0.2f%% +- %.2f, "
                "params %+0.1f%%, sign p %.4f\n",
                to_string(res.spec.variant), to_string(res.spec.baseline), res.resolved_buckets,
                res.mean_delta_ctr_pct, res.std_delta_ctr_pct, res.mean_delta_ctr1d_pct,
                res.std_delta_ctr1d_pct, res.delta_embed_params_pct, res.sign_p_ctr1d_one_sided);
  }
  std::printf("wrote %s/runs.tsv and %s/aggregate.tsv\n", a.out_dir.c_str(), a.out_dir.c_str());
}

struct StabilityArgs {
  std::string corpus0_path;
  std::string corpus1_path;
  std::string interactions_path;
  std::string out_path;
  std::uint64_t rqvae_seed = 1;
  std::int64_t rqvae_steps = 1200;
  RqVaeConfig rqvae;
  StabilitySpec spec;
};

void run_stability(const StabilityArgs& a) {
  const Corpus c0 = read_corpus(a.corpus0_path);
  const Corpus c1 = read_corpus(a.corpus1_path);
  const InteractionLog log1 = read_interactions(a.interactions_path);
  auto train_frozen = [&](const Corpus& c, std::uint64_t seed) {
    RqVaeConfig cfg = a.rqvae;
    cfg.input_dim = c.dim;
    cfg.encoder_dims = {cfg.input_dim, cfg.input_dim / 2, cfg.latent_dim};
    cfg.decoder_dims = {cfg.latent_dim, cfg.input_dim / 2, cfg.input_dim};
    RqVaeModel m = make_rqvae(cfg, seed);
    train(m, c, a.rqvae_steps, seed);
    freeze(m);
    return m;
  };
  // Both snapshots train from the same seed so the comparison isolates the
  // catalog change instead of mixing in fresh-initialization luck.
  const RqVaeModel v0 = train_frozen(c0, a.rqvae_seed);
  const RqVaeModel v1 = train_frozen(c1, a.rqvae_seed);
  const StabilityResult res = run_stability_study(v0, v1, c0, c1, log1, a.spec);
  write_stability_report(res, a.out_path);
  std::printf("snapshot alignment %.3f, mean |delta ctr auc| %.4f, two-sided sign p %.4f\n",
              res.alignment, res.mean_abs_delta_ctr, res.sign_p_two_sided);
  std::printf("report -> %s\n", a.out_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic id toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "generate a synthetic corpus and click log");
  cmd_gen->add_option("--out-corpus", gen.out_corpus, "corpus output path")->required();
  cmd_gen->add_option("--out-interactions", gen.out_interactions, "interaction log output path");
  cmd_gen->add_option("--seed", gen.seed, "rng seed (interactions use seed+1)");
  cmd_gen->add_option("--items", gen.cfg.num_items, "number of items");
  cmd_gen->add_option("--dim", gen.cfg.embedding_dim, "embedding dimension");
  cmd_gen->add_option("--depth", gen.cfg.depth, "hierarchy depth");
  cmd_gen->add_option("--branching", gen.cfg.branching, "children per level")->delimiter(',');
  cmd_gen->add_option("--noise-sigmas", gen.cfg.noise_sigmas,
                      "per-level offset sigmas plus leaf noise")->delimiter(',');
  cmd_gen->add_option("--alpha", gen.cfg.power_law_alpha, "popularity power-law exponent");
  cmd_gen->add_option("--days", gen.cfg.num_days, "number of days");
  cmd_gen->add_option("--new-frac", gen.cfg.new_items_per_day_fraction,
                      "fraction of items arriving after day 0");
  cmd_gen->add_option("--events-per-day", gen.events_per_day, "interaction events per day");
  cmd_gen->add_option("--history-len", gen.history_len, "history slots per event");
  cmd_gen->add_option("--drift-from-seed", gen.drift_from_seed,
                      "re-use this seed's cluster tree and draw a drifted snapshot");
  cmd_gen->add_option("--drift-new-leaf-frac", gen.drift_new_leaf_fraction,
                      "fraction of extra leaves per parent in the drifted snapshot");
  cmd_gen->add_option("--manifest", gen.manifest, "manifest to record outputs in");

  TrainArgs tr;
  CLI::App* cmd_train = app.add_subcommand("train-rqvae", "train and freeze the quantizer");
  cmd_train->add_option("--corpus", tr.corpus_path, "corpus path")->required();
  cmd_train->add_option("--out-model", tr.out_model, "checkpoint output path")->required();
  cmd_train->add_option("--out-log", tr.out_log, "training log tsv path");
  cmd_train->add_option("--steps", tr.steps, "training steps");
  cmd_train->add_option("--seed", tr.seed, "rng seed");
  cmd_train->add_option("--batch-size", tr.cfg.batch_size, "batch size");
  cmd_train->add_option("--levels", tr.cfg.num_levels, "quantization levels");
  cmd_train->add_option("--codebook-size", tr.cfg.codebook_size, "vectors per codebook");
  cmd_train->add_option("--latent-dim", tr.cfg.latent_dim, "latent dimension");
  cmd_train->add_option("--encoder-dims", tr.encoder_dims, "encoder layer widths")->delimiter(',');
  cmd_train->add_option("--decoder-dims", tr.decoder_dims, "decoder layer widths")->delimiter(',');
  cmd_train->add_option("--beta", tr.cfg.beta, "commitment weight");
  cmd_train->add_option("--lr", tr.cfg.learning_rate, "learning rate");
  cmd_train->add_option("--reset-threshold", tr.cfg.reset_threshold,
                        "usage at or below this count triggers a reset");
  cmd_train->add_flag("--no-resets", tr.no_resets, "disable dead-code resets");
  cmd_train->add_option("--manifest", tr.manifest, "manifest to verify inputs against");

  EncodeArgs enc;
  CLI::App* cmd_enc = app.add_subcommand("encode", "assign packed ids to a corpus");
  cmd_enc->add_option("--model", enc.model_path, "frozen checkpoint")->required();
  cmd_enc->add_option("--corpus", enc.corpus_path, "corpus path")->required();
  cmd_enc->add_option("--out", enc.out_map, "id map output path")->required();
  cmd_enc->add_option("--bits-per-token", enc.bits_per_token, "packed field width");
  cmd_enc->add_option("--manifest", enc.manifest, "manifest to verify inputs against");

  TrieArgs trie;
  CLI::App* cmd_trie = app.add_subcommand("analyze-trie", "prefix-similarity report");
  cmd_trie->add_option("--sid-map", trie.map_path, "id map path")->required();
  cmd_trie->add_option("--corpus", trie.corpus_path, "corpus path")->required();
  cmd_trie->add_option("--out", trie.out_path, "report tsv path")->required();
  cmd_trie->add_option("--max-pairs", trie.max_pairs, "pair budget per bucket");
  cmd_trie->add_option("--seed", trie.seed, "pair subsampling seed");
  cmd_trie->add_option("--manifest", trie.manifest, "manifest to verify inputs against");

  ExperimentArgs exp;
  CLI::App* cmd_exp = app.add_subcommand("run-experiment", "paired representation comparisons");
  cmd_exp->add_option("--config", exp.config_path, "key=value experiment config")->required();
  cmd_exp->add_option("--out-dir", exp.out_dir, "output directory")->required();
  cmd_exp->add_option("--manifest", exp.manifest, "manifest to verify inputs against");

  StabilityArgs stab;
  CLI::App* cmd_stab = app.add_subcommand("stability-study", "old vs refreshed id assignments");
  cmd_stab->add_option("--corpus0", stab.corpus0_path, "older snapshot")->required();
  cmd_stab->add_option("--corpus1", stab.corpus1_path, "newer snapshot")->required();
  cmd_stab->add_option("--interactions", stab.interactions_path, "newer snapshot click log")
      ->required();
  cmd_stab->add_option("--out", stab.out_path, "report tsv path")->required();
  cmd_stab->add_option("--rqvae-steps", stab.rqvae_steps, "quantizer training steps");
  cmd_stab->add_option("--rqvae-seed", stab.rqvae_seed, "quantizer seed, shared by both snapshots");
  cmd_stab->add_option("--codebook-size", stab.rqvae.codebook_size, "vectors per codebook");
  cmd_stab->add_option("--levels", stab.rqvae.num_levels, "quantization levels");
  cmd_stab->add_option("--latent-dim", stab.rqvae.latent_dim, "latent dimension");
  cmd_stab->add_option("--seeds", stab.spec.seeds, "ranking seeds")->delimiter(',');
  cmd_stab->add_option("--train-days", stab.spec.train_days, "ranking training days");
  cmd_stab->add_option("--eval-day", stab.spec.eval_day, "evaluation day");
  cmd_stab->add_option("--dim", stab.spec.embedding_dim, "ranking embedding dim");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(cmd_gen)) run_gen_data(gen);
    else if (app.got_subcommand(cmd_train)) run_train_rqvae(tr);
    else if (app.got_subcommand(cmd_enc)) run_encode(enc);
    else if (app.got_subcommand(cmd_trie)) run_analyze_trie(trie);
    else if (app.got_subcommand(cmd_exp)) run_run_experiment(exp);
    else if (app.got_subcommand(cmd_stab)) run_stability(stab);
    return 0;
  } catch (const sidkit::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const sidkit::StaleInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sidkit::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sidkit::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "invalid request: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
