#pragma once
// Residual-quantized autoencoder. An encoder MLP maps a content embedding to
// a latent, L codebooks greedily quantize the residual chain, and a decoder
// reconstructs the input from the summed codebook vectors.
//
// Loss per example: ||x - xhat||^2 + sum_l (beta * ||r_l - sg[e]||^2 +
// ||sg[r_l] - e||^2), summed over dims and averaged over the batch. The
// decoder gradient reaches the encoder through the straight-through copy of
// the quantized latent; codebook vectors receive gradient only from the
// second quantization term, and residuals are treated as constant w.r.t. the
// codebooks, so level l gets nothing from the terms of deeper levels.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidkit/binary_io.hpp"
#include "sidkit/corpus.hpp"
#include "sidkit/nn.hpp"
#include "sidkit/rng.hpp"

namespace sidkit {

struct RqVaeConfig {
  std::uint32_t input_dim = 256;
  std::uint32_t latent_dim = 64;
  std::vector<std::uint32_t> encoder_dims = {256, 128, 64};
  std::vector<std::uint32_t> decoder_dims = {64, 128, 256};
  std::uint32_t num_levels = 4;
  std::uint32_t codebook_size = 64;
  double beta = 0.25;
  double learning_rate = 1e-3;
  std::uint32_t batch_size = 256;
  std::uint32_t reset_threshold = 0;  // usage <= threshold within a batch triggers a reset
};

inline void validate(const RqVaeConfig& cfg) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("rqvae config: " + msg); };
  if (cfg.input_dim == 0 || cfg.latent_dim == 0) fail("dims must be >= 1");
  if (cfg.encoder_dims.empty() || cfg.decoder_dims.empty()) fail("empty layer list");
  for (auto d : cfg.encoder_dims) {
    if (d == 0) fail("zero encoder width");
  }
  for (auto d : cfg.decoder_dims) {
    if (d == 0) fail("zero decoder width");
  }
  if (cfg.encoder_dims.back() != cfg.latent_dim) fail("encoder must end at latent_dim");
  if (cfg.decoder_dims.back() != cfg.input_dim) fail("decoder must end at input_dim");
  if (cfg.num_levels == 0) fail("num_levels must be >= 1");
  if (cfg.codebook_size == 0) fail("codebook_size must be >= 1");
  if (!(cfg.beta > 0.0) || cfg.beta > 1.0) fail("beta must be in (0, 1]");
  if (!(cfg.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (cfg.batch_size == 0) fail("batch_size must be >= 1");
}

struct Codebook {
  std::uint32_t level = 0;  // 1-based
  std::uint32_t dim = 0;
  std::vector<double> vectors;              // codebook_size x dim, row major
  std::vector<std::uint32_t> usage_counts;  // per-batch tallies, trainer managed

  std::uint32_t size() const { return static_cast<std::uint32_t>(usage_counts.size()); }
  double* vec(std::uint32_t k) { return &vectors[std::size_t{k} * dim]; }
  const double* vec(std::uint32_t k) const { return &vectors[std::size_t{k} * dim]; }
};

struct RqVaeModel {
  RqVaeConfig config;
  Mlp encoder, decoder;
  std::vector<Codebook> codebooks;
  bool frozen = false;
  // First train step seeds the codebooks from that batch's residuals.
  bool codebooks_initialized = false;
};

inline RqVaeModel make_rqvae(const RqVaeConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  RqVaeModel m;
  m.config = cfg;
  Rng rng(seed);
  m.encoder = make_mlp(cfg.input_dim, cfg.encoder_dims);
  mlp_init(m.encoder, rng);
  m.decoder = make_mlp(cfg.latent_dim, cfg.decoder_dims);
  mlp_init(m.decoder, rng);
  m.codebooks.resize(cfg.num_levels);
  for (std::uint32_t l = 0; l < cfg.num_levels; ++l) {
    Codebook& cb = m.codebooks[l];
    cb.level = l + 1;
    cb.dim = cfg.latent_dim;
    cb.vectors.assign(std::size_t{cfg.codebook_size} * cfg.latent_dim, 0.0);
    cb.usage_counts.assign(cfg.codebook_size, 0);
  }
  return m;
}

struct QuantizationResult {
  std::vector<std::uint32_t> codes;            // one per level
  std::vector<std::vector<double>> residuals;  // L+1 entries, residuals[0] is z
  std::vector<double> quantized_latent;        // sum of the selected vectors
  std::vector<double> reconstruction;          // filled by loss(), not quantize()
};

inline std::vector<double> encode(const RqVaeModel& m, std::span<const float> x) {
  if (x.size() != m.config.input_dim) throw std::invalid_argument("encode: input dim mismatch");
  std::vector<double> xd(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw std::invalid_argument("encode: non-finite input");
    xd[i] = x[i];
  }
  MlpActs acts;
  mlp_forward(m.encoder, xd.data(), acts);
  if (!all_finite(acts.out.back())) throw NumericError("encoder produced non-finite latent");
  return acts.out.back();
}

// Greedy nearest-neighbor quantization, level by level. Ties pick the lowest
// index. Residuals are maintained as r_{l+1} = z - (e_1 + ... + e_l) with the
// running sum accumulated in level order, so z - quantized_latent reproduces
// the final residual bit for bit.
inline QuantizationResult quantize(const std::vector<Codebook>& books,
                                   std::span<const double> z) {
  if (books.empty()) throw std::invalid_argument("quantize: no codebooks");
  const std::size_t dim = z.size();
  for (double v : z) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite latent");
  }
  QuantizationResult q;
  q.codes.reserve(books.size());
  q.residuals.reserve(books.size() + 1);
  q.residuals.emplace_back(z.begin(), z.end());
  std::vector<double> sum(dim, 0.0);
  for (const Codebook& cb : books) {
    if (cb.dim != dim) throw std::invalid_argument("quantize: codebook dim mismatch");
    if (cb.size() == 0) throw std::invalid_argument("quantize: empty codebook");
    const std::vector<double>& r = q.residuals.back();
    std::uint32_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::uint32_t k = 0; k < cb.size(); ++k) {
      const double* e = cb.vec(k);
      double dist = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = r[i] - e[i];
        dist += d * d;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    q.codes.push_back(best);
    const double* e = cb.vec(best);
    std::vector<double> next(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      sum[i] += e[i];
      next[i] = z[i] - sum[i];
    }
    q.residuals.push_back(std::move(next));
  }
  q.quantized_latent = std::move(sum);
  return q;
}

inline std::vector<double> decode(const RqVaeModel& m, std::span<const double> z_hat) {
  if (z_hat.size() != m.config.latent_dim) {
    throw std::invalid_argument("decode: latent dim mismatch");
  }
  MlpActs acts;
  mlp_forward(m.decoder, z_hat.data(), acts);
  if (!all_finite(acts.out.back())) throw NumericError("decoder produced non-finite output");
  return acts.out.back();
}

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double rqvae = 0.0;
  QuantizationResult q;
};

inline LossBreakdown loss(const RqVaeModel& m, std::span<const float> x) {
  LossBreakdown out;
  const std::vector<double> z = encode(m, x);
  out.q = quantize(m.codebooks, z);
  out.q.reconstruction = decode(m, out.q.quantized_latent);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = double(x[i]) - out.q.reconstruction[i];
    out.recon += d * d;
  }
  const double beta = m.config.beta;
  for (std::size_t l = 0; l < m.codebooks.size(); ++l) {
    const double* e = m.codebooks[l].vec(out.q.codes[l]);
    const std::vector<double>& r = out.q.residuals[l];
    double dist = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = r[i] - e[i];
      dist += d * d;
    }
    out.rqvae += beta * dist + dist;
  }
  out.total = out.recon + out.rqvae;
  return out;
}

// Overwrites every codebook vector whose batch usage is at or below the
// threshold with the matching-level residual of a random batch element
// (level 1 draws encoder outputs, level l draws r_l). Clears the usage
// tallies afterwards. Returns the number of vectors replaced.
inline std::uint32_t reset_dead_codes(std::vector<Codebook>& books,
                                      const std::vector<QuantizationResult>& batch,
                                      std::uint32_t reset_threshold, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("reset_dead_codes: empty batch");
  std::uint32_t replaced = 0;
  for (std::size_t l = 0; l < books.size(); ++l) {
    Codebook& cb = books[l];
    for (std::uint32_t k = 0; k < cb.size(); ++k) {
      if (cb.usage_counts[k] <= reset_threshold) {
        const std::size_t pick = rng.uniform_below(batch.size());
        const std::vector<double>& r = batch[pick].residuals[l];
        std::copy(r.begin(), r.end(), cb.vec(k));
        ++replaced;
      }
    }
    std::fill(cb.usage_counts.begin(), cb.usage_counts.end(), 0u);
  }
  return replaced;
}

struct RqVaeOptState {
  std::int64_t step = 0;
  MlpAdam encoder, decoder;
  std::vector<AdamState> codebooks;
};

struct TrainStepStats {
  double recon = 0.0;
  double rqvae = 0.0;
  double total = 0.0;
  std::uint32_t resets = 0;
  std::vector<double> utilization;                   // per level, this batch
  std::vector<std::vector<std::uint8_t>> used_mask;  // per level, per code
};

namespace detail {

// Seeds each level's codebook with residuals of the first batch: a sample
// without replacement when the batch is large enough, otherwise every batch
// residual plus jittered duplicates.
inline void init_codebooks_from_batch(RqVaeModel& m,
                                      const std::vector<std::vector<double>>& latents,
                                      Rng& rng) {
  const std::uint32_t K = m.config.codebook_size;
  const std::uint32_t dim = m.config.latent_dim;
  const std::size_t B = latents.size();
  std::vector<std::vector<double>> residual = latents;
  std::vector<std::vector<double>> sums(B, std::vector<double>(dim, 0.0));
  for (std::size_t l = 0; l < m.codebooks.size(); ++l) {
    Codebook& cb = m.codebooks[l];
    std::vector<std::size_t> picks;
    if (B >= K) {
      std::vector<std::size_t> idx(B);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      rng.shuffle(idx);
      picks.assign(idx.begin(), idx.begin() + K);
    } else {
      picks.resize(K);
      std::iota(picks.begin(), picks.begin() + B, std::size_t{0});
      for (std::size_t k = B; k < K; ++k) picks[k] = rng.uniform_below(B);
    }
    for (std::uint32_t k = 0; k < K; ++k) {
      double* out = cb.vec(k);
      const std::vector<double>& src = residual[picks[k]];
      for (std::uint32_t d = 0; d < dim; ++d) out[d] = src[d];
      if (B < K && k >= B) {
        for (std::uint32_t d = 0; d < dim; ++d) out[d] += 0.01 * rng.normal();
      }
    }
    // Advance the residual chain through the freshly seeded level.
    for (std::size_t b = 0; b < B; ++b) {
      std::uint32_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::uint32_t k = 0; k < K; ++k) {
        const double* e = cb.vec(k);
        double dist = 0.0;
        for (std::uint32_t d = 0; d < dim; ++d) {
          const double diff = residual[b][d] - e[d];
          dist += diff * diff;
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      }
      const double* e = cb.vec(best);
      for (std::uint32_t d = 0; d < dim; ++d) {
        sums[b][d] += e[d];
        residual[b][d] = latents[b][d] - sums[b][d];
      }
    }
  }
  m.codebooks_initialized = true;
}

}  // namespace detail

// Mean-over-batch gradients for every parameter tensor, plus the per-example
// quantization results the reset step samples from.
struct RqVaeGradients {
  MlpGrads encoder, decoder;
  std::vector<std::vector<double>> codebooks;  // per level, K x dim
  std::vector<QuantizationResult> results;
  double recon = 0.0;
  double rqvae = 0.0;
  double total = 0.0;
};

// Forward plus manual backward over one batch. Tallies usage counts but does
// not touch parameters.
inline RqVaeGradients compute_batch_gradients(RqVaeModel& m,
                                              const std::vector<std::span<const float>>& batch) {
  if (batch.empty()) throw std::invalid_argument("compute_batch_gradients: empty batch");
  const std::uint32_t D = m.config.input_dim;
  const std::uint32_t Dp = m.config.latent_dim;
  const std::uint32_t K = m.config.codebook_size;
  const std::size_t L = m.codebooks.size();
  const double B = static_cast<double>(batch.size());
  const double beta = m.config.beta;

  RqVaeGradients g;
  g.encoder.match(m.encoder);
  g.decoder.match(m.decoder);
  g.codebooks.resize(L);
  for (auto& cg : g.codebooks) cg.assign(std::size_t{K} * Dp, 0.0);
  g.results.reserve(batch.size());

  std::vector<double> xd(D), d_xhat(D), d_zhat(Dp), d_z(Dp);
  MlpActs enc_acts, dec_acts;
  for (auto x : batch) {
    if (x.size() != D) throw std::invalid_argument("batch input dim mismatch");
    for (std::size_t i = 0; i < D; ++i) xd[i] = x[i];
    mlp_forward(m.encoder, xd.data(), enc_acts);
    const std::vector<double>& z = enc_acts.out.back();
    if (!all_finite(z)) throw NumericError("encoder produced non-finite latent");
    QuantizationResult q = quantize(m.codebooks, z);
    mlp_forward(m.decoder, q.quantized_latent.data(), dec_acts);
    const std::vector<double>& xhat = dec_acts.out.back();
    if (!all_finite(xhat)) throw NumericError("decoder produced non-finite output");

    double recon = 0.0;
    for (std::uint32_t i = 0; i < D; ++i) {
      const double d = xd[i] - xhat[i];
      recon += d * d;
      d_xhat[i] = 2.0 * (xhat[i] - xd[i]) / B;
    }
    double rqvae = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const double* e = m.codebooks[l].vec(q.codes[l]);
      const std::vector<double>& r = q.residuals[l];
      double dist = 0.0;
      for (std::uint32_t i = 0; i < Dp; ++i) {
        const double d = r[i] - e[i];
        dist += d * d;
      }
      rqvae += beta * dist + dist;
      m.codebooks[l].usage_counts[q.codes[l]] += 1;
    }
    g.recon += recon / B;
    g.rqvae += rqvae / B;

    mlp_backward(m.decoder, q.quantized_latent.data(), dec_acts, {d_xhat.begin(), d_xhat.end()},
                 g.decoder, d_zhat.data());
    // Straight-through: the decoder gradient lands on z unchanged; the
    // commitment terms add 2*beta*(r_l - e) at every level since each
    // residual shifts one-for-one with z.
    for (std::uint32_t i = 0; i < Dp; ++i) d_z[i] = d_zhat[i];
    for (std::size_t l = 0; l < L; ++l) {
      const double* e = m.codebooks[l].vec(q.codes[l]);
      const std::vector<double>& r = q.residuals[l];
      for (std::uint32_t i = 0; i < Dp; ++i) {
        d_z[i] += 2.0 * beta * (r[i] - e[i]) / B;
      }
    }
    mlp_backward(m.encoder, xd.data(), enc_acts, {d_z.begin(), d_z.end()}, g.encoder, nullptr);
    for (std::size_t l = 0; l < L; ++l) {
      const double* e = m.codebooks[l].vec(q.codes[l]);
      const std::vector<double>& r = q.residuals[l];
      double* cg = &g.codebooks[l][std::size_t{q.codes[l]} * Dp];
      for (std::uint32_t i = 0; i < Dp; ++i) {
        cg[i] += 2.0 * (e[i] - r[i]) / B;
      }
    }
    g.results.push_back(std::move(q));
  }
  g.total = g.recon + g.rqvae;
  return g;
}

inline TrainStepStats train_step(RqVaeModel& m, const std::vector<std::span<const float>>& batch,
                                 RqVaeOptState& opt, Rng& rng, bool enable_resets = true) {
  if (m.frozen) throw std::logic_error("train_step on a frozen model");
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const std::uint32_t K = m.config.codebook_size;
  const std::size_t L = m.codebooks.size();

  if (!m.codebooks_initialized) {
    std::vector<std::vector<double>> latents;
    latents.reserve(batch.size());
    for (auto x : batch) latents.push_back(encode(m, x));
    detail::init_codebooks_from_batch(m, latents, rng);
  }

  for (auto& cb : m.codebooks) std::fill(cb.usage_counts.begin(), cb.usage_counts.end(), 0u);
  RqVaeGradients grads = compute_batch_gradients(m, batch);

  TrainStepStats stats;
  stats.recon = grads.recon;
  stats.rqvae = grads.rqvae;
  stats.total = grads.total;
  stats.utilization.resize(L);
  stats.used_mask.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    stats.used_mask[l].assign(K, 0);
    std::uint32_t used = 0;
    for (std::uint32_t k = 0; k < K; ++k) {
      if (m.codebooks[l].usage_counts[k] > 0) {
        stats.used_mask[l][k] = 1;
        ++used;
      }
    }
    stats.utilization[l] = double(used) / double(K);
  }

  const AdamParams hp{.lr = m.config.learning_rate};
  const std::int64_t t = ++opt.step;
  opt.encoder.match(m.encoder);
  opt.decoder.match(m.decoder);
  opt.codebooks.resize(L);
  mlp_adam_update(m.encoder, grads.encoder, opt.encoder, hp, t);
  mlp_adam_update(m.decoder, grads.decoder, opt.decoder, hp, t);
  for (std::size_t l = 0; l < L; ++l) {
    adam_update(m.codebooks[l].vectors, grads.codebooks[l], opt.codebooks[l], hp, t);
  }

  if (enable_resets) {
    stats.resets = reset_dead_codes(m.codebooks, grads.results, m.config.reset_threshold, rng);
  }
  return stats;
}

struct TrainingLogEntry {
  std::int64_t step = 0;
  double recon = 0.0;
  double rqvae = 0.0;
  double total = 0.0;
  std::uint32_t resets = 0;
  std::vector<double> utilization;
};

struct TrainingLog {
  std::vector<TrainingLogEntry> entries;
  // Fraction of codes selected at least once over the last 10 batches.
  std::vector<double> window_utilization;
};

inline TrainingLog train(RqVaeModel& m, const Corpus& corpus, std::int64_t steps,
                         std::uint64_t seed, bool enable_resets = true) {
  if (m.frozen) throw std::logic_error("train on a frozen model");
  if (corpus.items.empty()) throw std::invalid_argument("train: empty corpus");
  if (corpus.dim != m.config.input_dim) throw std::invalid_argument("train: corpus dim mismatch");

  Rng rng(seed);
  RqVaeOptState opt;
  TrainingLog log;
  const std::size_t n = corpus.items.size();
  const std::size_t L = m.codebooks.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t pos = n;  // forces a shuffle before the first batch

  std::deque<std::vector<std::vector<std::uint8_t>>> window;
  for (std::int64_t step = 1; step <= steps; ++step) {
    if (pos >= n) {
      rng.shuffle(order);
      pos = 0;
    }
    const std::size_t take = std::min<std::size_t>(m.config.batch_size, n - pos);
    std::vector<std::span<const float>> batch;
    batch.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      batch.emplace_back(corpus.items[order[pos + i]].embedding);
    }
    pos += take;

    TrainStepStats stats;
    try {
      stats = train_step(m, batch, opt, rng, enable_resets);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    }
    window.push_back(stats.used_mask);
    if (window.size() > 10) window.pop_front();
    log.entries.push_back({step, stats.recon, stats.rqvae, stats.total, stats.resets,
                           stats.utilization});
  }

  log.window_utilization.assign(L, 0.0);
  if (!window.empty()) {
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<std::uint8_t> seen(m.config.codebook_size, 0);
      for (const auto& masks : window) {
        for (std::uint32_t k = 0; k < m.config.codebook_size; ++k) seen[k] |= masks[l][k];
      }
      std::uint32_t used = 0;
      for (auto s : seen) used += s;
      log.window_utilization[l] = double(used) / double(m.config.codebook_size);
    }
  }
  return log;
}

inline void freeze(RqVaeModel& m) { m.frozen = true; }

// ---- checkpoint format -------------------------------------------------

inline constexpr char kModelMagic[4] = {'S', 'Q', 'M', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const RqVaeModel& m, const std::string& path) {
  BinaryWriter w(path);
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  const RqVaeConfig& c = m.config;
  w.u32(c.input_dim);
  w.u32(c.latent_dim);
  w.u32(static_cast<std::uint32_t>(c.encoder_dims.size()));
  for (auto d : c.encoder_dims) w.u32(d);
  w.u32(static_cast<std::uint32_t>(c.decoder_dims.size()));
  for (auto d : c.decoder_dims) w.u32(d);
  w.u32(c.num_levels);
  w.u32(c.codebook_size);
  w.f32(static_cast<float>(c.beta));
  w.f32(static_cast<float>(c.learning_rate));
  w.u32(c.batch_size);
  w.u32(c.reset_threshold);
  w.u8(m.frozen ? 1 : 0);
  for (const Mlp* mlp : {&m.encoder, &m.decoder}) {
    for (const DenseLayer& l : mlp->layers) {
      for (double v : l.weight) w.f32(static_cast<float>(v));
      for (double v : l.bias) w.f32(static_cast<float>(v));
    }
  }
  for (const Codebook& cb : m.codebooks) {
    for (double v : cb.vectors) w.f32(static_cast<float>(v));
  }
  w.finish();
}

inline RqVaeModel load_model(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kModelMagic);
  r.expect_version(kModelVersion);
  RqVaeConfig c;
  c.input_dim = r.u32();
  c.latent_dim = r.u32();
  c.encoder_dims.resize(r.u32());
  for (auto& d : c.encoder_dims) d = r.u32();
  c.decoder_dims.resize(r.u32());
  for (auto& d : c.decoder_dims) d = r.u32();
  c.num_levels = r.u32();
  c.codebook_size = r.u32();
  c.beta = r.f32();
  c.learning_rate = r.f32();
  c.batch_size = r.u32();
  c.reset_threshold = r.u32();
  validate(c);
  RqVaeModel m = make_rqvae(c, 0);
  m.frozen = r.u8() != 0;
  for (Mlp* mlp : {&m.encoder, &m.decoder}) {
    for (DenseLayer& l : mlp->layers) {
      for (auto& v : l.weight) v = r.f32();
      for (auto& v : l.bias) v = r.f32();
    }
  }
  for (Codebook& cb : m.codebooks) {
    for (auto& v : cb.vectors) v = r.f32();
  }
  m.codebooks_initialized = true;
  return m;
}

inline void write_training_log(const TrainingLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "step\trecon_loss\trqvae_loss\ttotal_loss\tresets";
  const std::size_t L = log.entries.empty() ? 0 : log.entries.front().utilization.size();
  for (std::size_t l = 1; l <= L; ++l) out << "\tutil_l" << l;
  out << "\n";
  char buf[64];
  for (const TrainingLogEntry& e : log.entries) {
    out << e.step;
    for (double v : {e.recon, e.rqvae, e.total}) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << '\t' << buf;
    }
    out << '\t' << e.resets;
    for (double u : e.utilization) {
      std::snprintf(buf, sizeof buf, "%.6g", u);
      out << '\t' << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sidkit
