#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "series2vec/attention.hpp"
#include "series2vec/autodiff.hpp"
#include "series2vec/common.hpp"
#include "series2vec/data.hpp"
#include "series2vec/encoder.hpp"
#include "series2vec/loss.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/rng.hpp"
#include "series2vec/similarity.hpp"
#include "series2vec/spectral.hpp"

namespace s2v {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t patience = 10;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  bool use_attention = true;
  bool use_spectral = true;
  bool use_temporal = true;
  SoftDtwConfig dtw;
  EncoderConfig encoder;
  std::size_t attention_heads = 8;

  void validate() const {
    check_arg(batch_size >= 2, "TrainConfig: batch_size must be >= 2 (the pairwise "
                               "loss needs at least one pair)");
    check_arg(epochs >= 1, "TrainConfig: epochs must be >= 1");
    check_arg(lr >= 0.0, "TrainConfig: lr must be >= 0");
    check_arg(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
              "TrainConfig: decay rates must lie in [0, 1)");
    check_arg(eps > 0.0, "TrainConfig: eps must be > 0");
    check_arg(patience >= 1, "TrainConfig: patience must be >= 1");
    check_arg(val_fraction >= 0.0 && val_fraction < 1.0,
              "TrainConfig: val_fraction must lie in [0, 1)");
    check_arg(use_spectral || use_temporal,
              "TrainConfig: at least one of use_spectral/use_temporal must be true");
    dtw.validate();
    encoder.validate();
    check_arg(attention_heads >= 1 && encoder.repr_dim % attention_heads == 0,
              "TrainConfig: repr_dim must be a positive multiple of attention_heads");
  }
};

namespace detail {
// child-stream tags so each component draws from an independent seeded stream
inline constexpr std::uint64_t kRngEncTime = 0x0101;
inline constexpr std::uint64_t kRngAttTime = 0x0102;
inline constexpr std::uint64_t kRngEncFreq = 0x0103;
inline constexpr std::uint64_t kRngAttFreq = 0x0104;
inline constexpr std::uint64_t kRngSplit = 0x0201;
inline constexpr std::uint64_t kRngShuffle = 0x0202;
inline constexpr std::uint64_t kRngHead = 0x0301;
}  // namespace detail

/// All learnable state: one encoder and one attention block per branch.
/// Every component is always materialized; the ablation switches control
/// which ones are trained and used.
struct ModelState {
  EncoderConfig encoder_cfg;
  std::size_t attention_heads = 8;
  std::size_t input_channels = 0;
  bool use_attention = true;
  bool use_spectral = true;
  bool use_temporal = true;

  EncoderParams enc_time, enc_freq;
  AttentionParams att_time, att_freq;

  template <typename Fn>
  void visit_all(Fn&& f) {
    enc_time.visit([&](const std::string& n, NdArray& a) { f("time_encoder." + n, a); });
    att_time.visit([&](const std::string& n, NdArray& a) { f("time_attention." + n, a); });
    enc_freq.visit([&](const std::string& n, NdArray& a) { f("freq_encoder." + n, a); });
    att_freq.visit([&](const std::string& n, NdArray& a) { f("freq_attention." + n, a); });
  }

  std::size_t repr_dim() const {
    return encoder_cfg.repr_dim *
           ((use_temporal ? 1 : 0) + (use_spectral ? 1 : 0));
  }
};

inline ModelState init_model(const TrainConfig& cfg, std::size_t d_x) {
  cfg.validate();
  check_arg(d_x >= 1, "init_model: channel count must be >= 1");
  ModelState s;
  s.encoder_cfg = cfg.encoder;
  s.attention_heads = cfg.attention_heads;
  s.input_channels = d_x;
  s.use_attention = cfg.use_attention;
  s.use_spectral = cfg.use_spectral;
  s.use_temporal = cfg.use_temporal;
  Rng root(cfg.seed);
  Rng r_et = root.child(detail::kRngEncTime);
  Rng r_at = root.child(detail::kRngAttTime);
  Rng r_ef = root.child(detail::kRngEncFreq);
  Rng r_af = root.child(detail::kRngAttFreq);
  s.enc_time = init_encoder_params(cfg.encoder, d_x, r_et);
  s.att_time = init_attention_params(cfg.encoder.repr_dim, cfg.attention_heads, r_at);
  s.enc_freq = init_encoder_params(cfg.encoder, d_x, r_ef);
  s.att_freq = init_attention_params(cfg.encoder.repr_dim, cfg.attention_heads, r_af);
  return s;
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<NdArray> m, v;  // aligned with the parameter registry
  std::size_t step = 0;

  void reset(const std::vector<NdArray*>& params) {
    m.clear();
    v.clear();
    for (const NdArray* p : params) {
      m.emplace_back(p->shape());
      v.emplace_back(p->shape());
    }
    step = 0;
  }
};

/// Bias-corrected adaptive-moment update; eps sits outside the square root.
inline void adam_step(const std::vector<NdArray*>& params,
                      const std::vector<const NdArray*>& grads, AdamState& state,
                      double lr, double beta1, double beta2, double eps) {
  check_arg(params.size() == grads.size() && params.size() == state.m.size(),
            "adam_step: registry size mismatch");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    NdArray& p = *params[k];
    const NdArray& g = *grads[k];
    check_arg(p.same_shape(g) && p.same_shape(state.m[k]),
              "adam_step: shape mismatch for parameter " + std::to_string(k));
    double* mp = state.m[k].ptr();
    double* vp = state.v[k].ptr();
    double* pp = p.ptr();
    const double* gp = g.data().data();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      mp[i] = beta1 * mp[i] + (1.0 - beta1) * gp[i];
      vp[i] = beta2 * vp[i] + (1.0 - beta2) * gp[i] * gp[i];
      const double mhat = mp[i] / bc1;
      const double vhat = vp[i] / bc2;
      pp[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// lazy pairwise-distance cache
// ---------------------------------------------------------------------------

/// Caches the dataset-level pairwise distances that batches keep revisiting
/// across epochs. Distances are pure functions of the two samples, so the
/// cache cannot change any result, only skip recomputation.
class PairCache {
 public:
  explicit PairCache(std::size_t n)
      : n_(n), vals_(n >= 2 ? n * (n - 1) / 2 : 0,
                     std::numeric_limits<double>::quiet_NaN()) {}

  template <typename DistFn>
  NdArray batch_matrix(const std::vector<std::size_t>& idx, std::size_t threads,
                       DistFn dist) {
    const std::size_t b = idx.size();
    check_arg(b >= 2, "PairCache: need at least 2 indices");
    std::vector<std::pair<std::size_t, std::size_t>> missing;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = i + 1; j < b; ++j) {
        const std::size_t slot = tri_index(idx[i], idx[j]);
        if (std::isnan(vals_[slot])) missing.emplace_back(idx[i], idx[j]);
      }
    if (!missing.empty()) {
      std::vector<double> computed(missing.size());
      const std::size_t workers =
          std::max<std::size_t>(1, std::min(threads, missing.size()));
      if (workers <= 1) {
        for (std::size_t p = 0; p < missing.size(); ++p)
          computed[p] = dist(missing[p].first, missing[p].second);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t)
          pool.emplace_back([&, t]() {
            for (std::size_t p = t; p < missing.size(); p += workers)
              computed[p] = dist(missing[p].first, missing[p].second);
          });
        for (std::thread& th : pool) th.join();
      }
      for (std::size_t p = 0; p < missing.size(); ++p)
        vals_[tri_index(missing[p].first, missing[p].second)] = computed[p];
    }
    NdArray raw({b, b});
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = i + 1; j < b; ++j) {
        const double v = vals_[tri_index(idx[i], idx[j])];
        raw[i * b + j] = v;
        raw[j * b + i] = v;
      }
    return raw;
  }

 private:
  std::size_t tri_index(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    check_arg(a < b && b < n_, "PairCache: bad index pair");
    return a * (2 * n_ - a - 1) / 2 + (b - a - 1);
  }

  std::size_t n_;
  std::vector<double> vals_;
};

/// Divides a raw symmetric distance matrix by its maximum (unchanged when
/// all-zero) and records the divisor.
inline PairwiseDistanceMatrix normalize_targets(NdArray raw, DistanceKind kind) {
  PairwiseDistanceMatrix m;
  m.kind = kind;
  double mx = 0.0;
  for (std::size_t i = 0; i < raw.numel(); ++i) mx = std::max(mx, raw[i]);
  m.divisor = mx;
  if (mx > 0.0)
    for (std::size_t i = 0; i < raw.numel(); ++i) raw[i] /= mx;
  m.values = std::move(raw);
  return m;
}

// ---------------------------------------------------------------------------
// pretraining
// ---------------------------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct PretrainResult {
  ModelState state;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_loss = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Registry of the parameters a pretraining step updates, in a fixed order.
inline void active_pretrain_params(ModelState& s, std::vector<NdArray*>& out) {
  out.clear();
  auto push_all = [&out](auto& component) {
    component.visit([&out](const std::string&, NdArray& a) { out.push_back(&a); });
  };
  if (s.use_temporal) {
    push_all(s.enc_time);
    if (s.use_attention) push_all(s.att_time);
  }
  if (s.use_spectral) {
    push_all(s.enc_freq);
    if (s.use_attention) push_all(s.att_freq);
  }
}

struct BranchBatch {
  NdArray inputs;   // [B, d, L] time samples or [B, d, M] spectra
  NdArray targets;  // normalized [B, B]
};

/// One pretext forward pass; lifts parameters as trainable or frozen and
/// returns the scalar total-loss node. When param_ids is given, the lifted
/// parameter node ids are appended in active_pretrain_params order.
inline Var pretext_loss(Tape& tape, ModelState& s, const BranchBatch* time_b,
                        const BranchBatch* freq_b, bool trainable,
                        std::vector<std::size_t>* param_ids = nullptr,
                        LossBreakdown* breakdown = nullptr) {
  auto record = [&](const std::vector<Var>& vars) {
    if (!param_ids) return;
    for (const Var& v : vars) param_ids->push_back(v.id);
  };
  std::vector<Var> losses;
  double lt = 0.0, lf = 0.0;
  if (time_b) {
    EncoderVars ev = lift(tape, s.enc_time, trainable);
    record(ev.vars);
    Var r = encode_batch(tape, time_b->inputs, ev);
    if (s.use_attention) {
      AttentionVars av = lift(tape, s.att_time, trainable);
      record(av.vars);
      r = batch_attend(r, av);
    }
    losses.push_back(sim_loss(r, time_b->targets));
    lt = losses.back().value().scalar_value();
  }
  if (freq_b) {
    EncoderVars ev = lift(tape, s.enc_freq, trainable);
    record(ev.vars);
    Var r = encode_batch(tape, freq_b->inputs, ev);
    if (s.use_attention) {
      AttentionVars av = lift(tape, s.att_freq, trainable);
      record(av.vars);
      r = batch_attend(r, av);
    }
    losses.push_back(sim_loss(r, freq_b->targets));
    lf = losses.back().value().scalar_value();
  }
  check_arg(!losses.empty(), "pretext_loss: no active branch");
  Var total = losses.size() == 2 ? add(losses[0], losses[1]) : losses[0];
  if (breakdown) {
    breakdown->time_term = lt;
    breakdown->freq_term = lf;
    breakdown->total = total.value().scalar_value();
  }
  return total;
}

inline std::vector<SpectralSeries> spectra_of(const Dataset& ds) {
  std::vector<SpectralSeries> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.push_back(real_dft_magnitude(ds.sample(i)));
  return out;
}

inline NdArray stack_spectra(const std::vector<SpectralSeries>& spectra,
                             const std::vector<std::size_t>& idx) {
  check_arg(!idx.empty(), "stack_spectra: empty batch");
  const std::size_t d = spectra[idx[0]].channels(), M = spectra[idx[0]].bins();
  NdArray out({idx.size(), d, M});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const NdArray& m = spectra[idx[b]].magnitudes;
    for (std::size_t k = 0; k < d * M; ++k) out[b * d * M + k] = m[k];
  }
  return out;
}

/// Consecutive chunks of size batch_size; a trailing chunk smaller than 2
/// is dropped (the pairwise loss needs at least one pair).
inline std::vector<std::vector<std::size_t>> make_batches(
    const std::vector<std::size_t>& order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace detail

/// Self-supervised pretraining: per batch, match representation dot
/// products to normalized pairwise distances in each active branch; Adam
/// updates; early stopping on the held-out validation loss; returns the
/// best-validation state and the full loss history.
inline PretrainResult pretrain(const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  check_arg(dataset.size() >= 2, "pretrain: dataset must contain at least 2 series");
  dataset.validate();

  const std::size_t threads = worker_threads();
  PretrainResult result;
  result.state = init_model(cfg, dataset.channels());
  ModelState& model = result.state;

  // fixed validation split: shuffle once, last val_fraction goes to validation
  Rng root(cfg.seed);
  Rng splitter = root.child(detail::kRngSplit);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  splitter.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(cfg.val_fraction * static_cast<double>(order.size()) + 1e-9));
  if (order.size() - n_val < 2) n_val = 0;  // keep training viable on tiny sets
  std::vector<std::size_t> train_idx(order.begin(),
                                     order.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val),
                                   order.end());

  std::vector<SpectralSeries> spectra;
  if (cfg.use_spectral) spectra = detail::spectra_of(dataset);

  PairCache time_cache(dataset.size());
  PairCache freq_cache(dataset.size());
  auto time_dist = [&](std::size_t i, std::size_t j) {
    return soft_dtw(dataset.sample(i), dataset.sample(j), cfg.dtw);
  };
  auto freq_dist = [&](std::size_t i, std::size_t j) {
    return euclidean_spectral(spectra[i], spectra[j]);
  };

  auto make_branches = [&](const std::vector<std::size_t>& idx,
                           detail::BranchBatch& tb, detail::BranchBatch& fb) {
    if (cfg.use_temporal) {
      tb.inputs = dataset.gather(idx);
      tb.targets =
          normalize_targets(time_cache.batch_matrix(idx, threads, time_dist),
                            DistanceKind::time)
              .values;
    }
    if (cfg.use_spectral) {
      fb.inputs = detail::stack_spectra(spectra, idx);
      fb.targets =
          normalize_targets(freq_cache.batch_matrix(idx, threads, freq_dist),
                            DistanceKind::frequency)
              .values;
    }
  };

  std::vector<NdArray*> registry;
  detail::active_pretrain_params(model, registry);
  AdamState opt;
  opt.reset(registry);

  Rng shuffler = root.child(detail::kRngShuffle);
  ModelState best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0, since_best = 0;

  const std::vector<std::vector<std::size_t>> val_batches =
      detail::make_batches(val_idx, cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffler.shuffle(train_idx);
    const std::vector<std::vector<std::size_t>> batches =
        detail::make_batches(train_idx, cfg.batch_size);
    check_arg(!batches.empty(),
              "pretrain: training split yields no batch with >= 2 samples");

    double train_loss = 0.0;
    for (const std::vector<std::size_t>& idx : batches) {
      detail::BranchBatch tb, fb;
      make_branches(idx, tb, fb);
      Tape tape;
      std::vector<std::size_t> param_ids;
      Var loss = detail::pretext_loss(tape, model, cfg.use_temporal ? &tb : nullptr,
                                      cfg.use_spectral ? &fb : nullptr, true,
                                      &param_ids);
      train_loss += loss.value().scalar_value();
      tape.backward(loss);
      check_arg(param_ids.size() == registry.size(),
                "pretrain: parameter registry out of sync");
      std::vector<const NdArray*> grads;
      grads.reserve(param_ids.size());
      for (std::size_t id : param_ids) grads.push_back(&tape.grad(id));
      adam_step(registry, grads, opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    }
    train_loss /= static_cast<double>(batches.size());

    double val_loss = train_loss;  // fallback when no validation batch exists
    if (!val_batches.empty()) {
      val_loss = 0.0;
      for (const std::vector<std::size_t>& idx : val_batches) {
        detail::BranchBatch tb, fb;
        make_branches(idx, tb, fb);
        Tape tape;
        Var loss = detail::pretext_loss(tape, model, cfg.use_temporal ? &tb : nullptr,
                                        cfg.use_spectral ? &fb : nullptr, false);
        val_loss += loss.value().scalar_value();
      }
      val_loss /= static_cast<double>(val_batches.size());
    }

    result.history.push_back({epoch, train_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      best = model;
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) break;
    }
  }

  if (best_epoch > 0) result.state = best;
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val;
  return result;
}

// ---------------------------------------------------------------------------
// representation extraction
// ---------------------------------------------------------------------------

/// Per-sample representations: concatenated active-branch encoder outputs,
/// [r_time, r_freq]. No attention here — extraction must not depend on
/// batch composition.
inline NdArray extract_representations(const Dataset& dataset, ModelState& state,
                                       std::size_t chunk = 64) {
  check_arg(dataset.size() >= 1, "extract_representations: empty dataset");
  check_arg(dataset.channels() == state.input_channels,
            "extract_representations: dataset has " +
                std::to_string(dataset.channels()) + " channels but model expects " +
                std::to_string(state.input_channels));
  check_arg(chunk >= 1, "extract_representations: chunk must be >= 1");
  const std::size_t n = dataset.size(), K = state.encoder_cfg.repr_dim;
  const std::size_t D = state.repr_dim();
  check_arg(D > 0, "extract_representations: no active branch");
  NdArray out({n, D});

  std::vector<SpectralSeries> spectra;
  if (state.use_spectral) spectra = detail::spectra_of(dataset);

  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    std::size_t col = 0;
    if (state.use_temporal) {
      const NdArray r = encode_batch_plain(dataset.gather(idx), state.enc_time);
      for (std::size_t b = 0; b < idx.size(); ++b)
        for (std::size_t k = 0; k < K; ++k) out[(start + b) * D + k] = r[b * K + k];
      col += K;
    }
    if (state.use_spectral) {
      const NdArray r =
          encode_batch_plain(detail::stack_spectra(spectra, idx), state.enc_freq);
      for (std::size_t b = 0; b < idx.size(); ++b)
        for (std::size_t k = 0; k < K; ++k)
          out[(start + b) * D + col + k] = r[b * K + k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// fine-tuning
// ---------------------------------------------------------------------------

struct FinetuneResult {
  ModelState state;
  NdArray head_w;  // [D, C]
  NdArray head_b;  // [C]
  std::vector<double> epoch_losses;
};

/// Supervised fine-tuning: an affine head on the concatenated
/// representations, trained jointly with the active encoders under
/// cross-entropy. The attention blocks stay frozen (representation path
/// only).
inline FinetuneResult finetune(const Dataset& dataset, const ModelState& start,
                               std::size_t epochs, double lr, std::uint64_t seed,
                               std::size_t batch_size = 64) {
  check_arg(dataset.labels.has_value(), "finetune: dataset must be labeled");
  check_arg(dataset.size() >= 1, "finetune: empty dataset");
  check_arg(batch_size >= 1, "finetune: batch_size must be >= 1");
  check_arg(lr >= 0.0, "finetune: lr must be >= 0");
  const std::size_t C = dataset.num_classes();
  check_arg(C >= 2, "finetune: need at least 2 classes");
  for (std::size_t l : *dataset.labels)
    check_arg(l < C, "finetune: label out of range");

  FinetuneResult result;
  result.state = start;
  ModelState& model = result.state;
  check_arg(dataset.channels() == model.input_channels,
            "finetune: dataset has " + std::to_string(dataset.channels()) +
                " channels but model expects " + std::to_string(model.input_channels));
  const std::size_t D = model.repr_dim();

  Rng head_rng = Rng(seed).child(detail::kRngHead);
  result.head_w = detail::glorot({D, C}, D, C, head_rng);
  result.head_b = NdArray({C});
  if (epochs == 0) return result;

  std::vector<SpectralSeries> spectra;
  if (model.use_spectral) spectra = detail::spectra_of(dataset);

  std::vector<NdArray*> registry;
  auto rebuild_registry = [&]() {
    registry.clear();
    if (model.use_temporal)
      model.enc_time.visit(
          [&](const std::string&, NdArray& a) { registry.push_back(&a); });
    if (model.use_spectral)
      model.enc_freq.visit(
          [&](const std::string&, NdArray& a) { registry.push_back(&a); });
    registry.push_back(&result.head_w);
    registry.push_back(&result.head_b);
  };
  rebuild_registry();
  AdamState opt;
  opt.reset(registry);

  Rng shuffler = Rng(seed).child(detail::kRngShuffle);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    shuffler.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t startb = 0; startb < order.size(); startb += batch_size) {
      const std::size_t end = std::min(order.size(), startb + batch_size);
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(startb),
          order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<std::size_t> batch_labels(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b)
        batch_labels[b] = (*dataset.labels)[idx[b]];

      Tape tape;
      std::vector<std::size_t> param_ids;
      std::vector<Var> parts;
      if (model.use_temporal) {
        EncoderVars ev = lift(tape, model.enc_time, true);
        for (const Var& v : ev.vars) param_ids.push_back(v.id);
        parts.push_back(encode_batch(tape, dataset.gather(idx), ev));
      }
      if (model.use_spectral) {
        EncoderVars ev = lift(tape, model.enc_freq, true);
        for (const Var& v : ev.vars) param_ids.push_back(v.id);
        parts.push_back(encode_batch(tape, detail::stack_spectra(spectra, idx), ev));
      }
      Var reps = parts.size() == 2 ? concat_cols(parts) : parts[0];
      Var w = tape.param(result.head_w);
      Var b = tape.param(result.head_b);
      param_ids.push_back(w.id);
      param_ids.push_back(b.id);
      Var logits = add_row_bias(matmul(reps, w), b);
      Var loss = cross_entropy_mean(logits, batch_labels);
      epoch_loss += loss.value().scalar_value();
      ++n_batches;
      tape.backward(loss);

      check_arg(param_ids.size() == registry.size(),
                "finetune: parameter registry out of sync");
      std::vector<const NdArray*> grads;
      grads.reserve(param_ids.size());
      for (std::size_t id : param_ids) grads.push_back(&tape.grad(id));
      adam_step(registry, grads, opt, lr, 0.9, 0.999, 1e-8);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n_batches));
  }
  return result;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

/// Writes <prefix>.bin (raw little-endian float64, tensors in visit order)
/// and <prefix>.json (shapes, offsets, and model config).
inline void save_checkpoint(ModelState& state, const std::string& prefix) {
  namespace fs = std::filesystem;
  const fs::path parent = fs::path(prefix).parent_path();
  if (!parent.empty()) fs::create_directories(parent);

  std::ofstream bin(prefix + ".bin", std::ios::binary);
  check_runtime(static_cast<bool>(bin), "save_checkpoint: cannot write " + prefix +
                                            ".bin");
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  state.visit_all([&](const std::string& name, NdArray& a) {
    bin.write(reinterpret_cast<const char*>(a.data().data()),
              static_cast<std::streamsize>(a.numel() * sizeof(double)));
    tensors.push_back({{"name", name}, {"shape", a.shape()}, {"offset", offset}});
    offset += a.numel();
  });
  bin.close();

  nlohmann::json j;
  j["format"] = "series2vec-checkpoint";
  j["version"] = 1;
  j["encoder"] = {{"layers", state.encoder_cfg.layers},
                  {"filters", state.encoder_cfg.filters},
                  {"kernel_width", state.encoder_cfg.kernel_width},
                  {"repr_dim", state.encoder_cfg.repr_dim}};
  j["attention_heads"] = state.attention_heads;
  j["input_channels"] = state.input_channels;
  j["use_attention"] = state.use_attention;
  j["use_spectral"] = state.use_spectral;
  j["use_temporal"] = state.use_temporal;
  j["values"] = offset;
  j["tensors"] = tensors;
  std::ofstream side(prefix + ".json");
  check_runtime(static_cast<bool>(side), "save_checkpoint: cannot write " + prefix +
                                             ".json");
  side << j.dump(2) << "\n";
}

inline ModelState load_checkpoint(const std::string& prefix) {
  std::ifstream side(prefix + ".json");
  check_runtime(static_cast<bool>(side),
                "load_checkpoint: cannot open " + prefix + ".json");
  nlohmann::json j;
  try {
    side >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("load_checkpoint: bad sidecar JSON: " +
                             std::string(e.what()));
  }
  check_runtime(j.value("format", "") == "series2vec-checkpoint",
                "load_checkpoint: not a checkpoint sidecar");

  TrainConfig cfg;
  cfg.encoder.layers = j.at("encoder").at("layers").get<std::size_t>();
  cfg.encoder.filters = j.at("encoder").at("filters").get<std::size_t>();
  cfg.encoder.kernel_width = j.at("encoder").at("kernel_width").get<std::size_t>();
  cfg.encoder.repr_dim = j.at("encoder").at("repr_dim").get<std::size_t>();
  cfg.attention_heads = j.at("attention_heads").get<std::size_t>();
  cfg.use_attention = j.at("use_attention").get<bool>();
  cfg.use_spectral = j.at("use_spectral").get<bool>();
  cfg.use_temporal = j.at("use_temporal").get<bool>();
  ModelState state = init_model(cfg, j.at("input_channels").get<std::size_t>());

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  check_runtime(static_cast<bool>(bin),
                "load_checkpoint: cannot open " + prefix + ".bin");
  std::size_t cursor = 0;
  const nlohmann::json& tensors = j.at("tensors");
  std::size_t ti = 0;
  state.visit_all([&](const std::string& name, NdArray& a) {
    check_runtime(ti < tensors.size(), "load_checkpoint: sidecar lists too few tensors");
    const nlohmann::json& meta = tensors[ti++];
    check_runtime(meta.at("name").get<std::string>() == name,
                  "load_checkpoint: tensor order mismatch at " + name);
    const Shape want = meta.at("shape").get<Shape>();
    check_runtime(want == a.shape(), "load_checkpoint: shape mismatch for " + name);
    bin.read(reinterpret_cast<char*>(a.ptr()),
             static_cast<std::streamsize>(a.numel() * sizeof(double)));
    check_runtime(static_cast<bool>(bin),
                  "load_checkpoint: truncated binary at " + name);
    cursor += a.numel();
  });
  check_runtime(ti == tensors.size(), "load_checkpoint: sidecar lists extra tensors");
  check_runtime(cursor == j.at("values").get<std::size_t>(),
                "load_checkpoint: value count mismatch");
  return state;
}

inline void save_history(const std::vector<EpochStats>& history,
                         const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const EpochStats& e : history)
    j.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"val_loss", e.val_loss}});
  std::ofstream out(path);
  check_runtime(static_cast<bool>(out), "save_history: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace s2v
