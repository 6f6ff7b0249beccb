// include/ctxasr/text_encoder.h
//
// Copyright (c)  2026  ctxasr authors
//
// Prompt text encoder: a small pre-norm transformer pretrained with the
// masked-language-model objective.  At ASR time it embeds content and style
// prompts; the style rows receive a trainable indicator vector v while the
// encoder body stays frozen.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ctxasr/adam.h"
#include "ctxasr/bpe.h"
#include "ctxasr/nn.h"
#include "ctxasr/rng.h"
#include "ctxasr/tensor.h"

namespace ctxasr {

struct TextEncoderConfig {
  int32_t vocab_size = 388;
  int32_t dim = 64;  // c
  int32_t layers = 2;
  int32_t heads = 2;
  int32_t ffn_hidden = 128;
  int32_t max_positions = 128;  // longer prompts keep their rightmost tokens
  bool operator==(const TextEncoderConfig&) const = default;
};

template <typename T>
struct TextEncoder {
  TextEncoderConfig cfg;
  ParamStore<T> params;
  Tensor<T> embed;  // vocab x c
  struct Layer {
    LayerNormParams<T> ln_self;
    Mha<T> self_attn;
    LayerNormParams<T> ln_ffn;
    Ffn<T> ffn;
  };
  std::vector<Layer> layers;
  LayerNormParams<T> final_ln;
  Linear<T> mlm_head;  // c -> vocab, zero-init so untrained loss is ln(vocab)
  Tensor<T> style_v;   // the style indicator vector, dimension c
};

template <typename T>
TextEncoder<T> MakeTextEncoder(const TextEncoderConfig& cfg, Rng& rng) {
  if (cfg.vocab_size <= BpeModel::kByteBase || cfg.dim <= 0 ||
      cfg.layers <= 0 || cfg.heads <= 0 || cfg.max_positions <= 0) {
    throw ContractError("MakeTextEncoder: bad config");
  }
  TextEncoder<T> enc;
  enc.cfg = cfg;
  const int64_t c = cfg.dim;
  enc.embed = enc.params.add(
      "text_enc.embed",
      Tensor<T>::randn({cfg.vocab_size, c}, rng,
                       static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)))));
  for (int32_t l = 0; l < cfg.layers; ++l) {
    const std::string base = "text_enc.layer" + std::to_string(l);
    typename TextEncoder<T>::Layer layer;
    layer.ln_self = MakeLayerNorm(enc.params, base + ".ln_self", c);
    layer.self_attn =
        MakeMha(enc.params, base + ".self", c, c, c, c, cfg.heads, rng);
    layer.ln_ffn = MakeLayerNorm(enc.params, base + ".ln_ffn", c);
    layer.ffn = MakeFfn(enc.params, base + ".ffn", c, cfg.ffn_hidden, rng);
    enc.layers.push_back(layer);
  }
  enc.final_ln = MakeLayerNorm(enc.params, "text_enc.final_ln", c);
  enc.mlm_head = MakeLinear(enc.params, "text_enc.mlm_head", c,
                            cfg.vocab_size, rng, /*zero_init=*/true);
  enc.style_v = enc.params.add("text_enc.style_v", Tensor<T>::zeros({c}));
  return enc;
}

// Embedding + positions + transformer body + final layer norm.  Empty input
// yields a 0 x c matrix.  Sequences beyond max_positions keep their tail
// (most recent text), consistent with history truncation.
template <typename T>
Tensor<T> EncodeText(const TextEncoder<T>& enc, std::vector<int32_t> tokens) {
  const int64_t c = enc.cfg.dim;
  if (tokens.empty()) return Tensor<T>::zeros({0, c});
  if (static_cast<int64_t>(tokens.size()) > enc.cfg.max_positions) {
    tokens.erase(tokens.begin(),
                 tokens.end() - static_cast<size_t>(enc.cfg.max_positions));
  }
  std::vector<int64_t> ids;
  ids.reserve(tokens.size());
  for (int32_t t : tokens) {
    if (t < 0 || t >= enc.cfg.vocab_size) {
      throw ContractError("EncodeText: token id out of range");
    }
    ids.push_back(t);
  }
  const int64_t len = static_cast<int64_t>(ids.size());
  Tensor<T> h = add(gather_rows(enc.embed, ids), SinusoidalPositions<T>(len, c));
  for (const auto& layer : enc.layers) {
    Tensor<T> q = ApplyLayerNorm(h, layer.ln_self);
    h = add(h, ApplyMha(q, q, layer.self_attn));
    h = add(h, ApplyFfn(ApplyLayerNorm(h, layer.ln_ffn), layer.ffn));
  }
  return ApplyLayerNorm(h, enc.final_ln);
}

// Joint prompt representation: content rows first, then style rows with the
// indicator vector v added to each.  The validity mask covers every row.
template <typename T>
struct PromptEmbeddings {
  Tensor<T> content;  // n x c
  Tensor<T> style;    // m x c
  Tensor<T> joint;    // (n+m) x c
  std::vector<uint8_t> valid;
  int64_t n_content = 0;
  int64_t n_style = 0;
};

template <typename T>
PromptEmbeddings<T> EncodePrompts(const TextEncoder<T>& enc,
                                  const std::vector<int32_t>& content_tokens,
                                  const std::vector<int32_t>& style_tokens,
                                  bool freeze_body = false) {
  PromptEmbeddings<T> out;
  Tensor<T> style_base;
  {
    // Under the freeze the encoder body contributes no gradients; v is added
    // outside the guard and therefore still trains.
    std::optional<NoGradGuard> guard;
    if (freeze_body) guard.emplace();
    out.content = EncodeText(enc, content_tokens);
    style_base = EncodeText(enc, style_tokens);
  }
  out.style = style_base.rows() > 0 ? add_bias(style_base, enc.style_v)
                                    : style_base;
  out.n_content = out.content.rows();
  out.n_style = out.style.rows();
  if (out.n_content > 0 && out.n_style > 0) {
    out.joint = concat(out.content, out.style, 0);
  } else if (out.n_content > 0) {
    out.joint = out.content;
  } else {
    out.joint = out.style;  // possibly 0 rows
  }
  out.valid.assign(static_cast<size_t>(out.n_content + out.n_style), 1);
  return out;
}

// BERT-style corruption: each position selected independently at mask_rate;
// selected positions become MASK with p_mask, a random non-special token
// with p_random, and stay unchanged otherwise.  Labels record the original
// token at every selected position.
struct MlmMaskConfig {
  double mask_rate = 0.15;
  double p_mask = 0.8;
  double p_random = 0.1;
};

struct MlmMasked {
  std::vector<int32_t> corrupted;
  std::vector<std::pair<int64_t, int32_t>> labels;  // (position, original)
};

inline MlmMasked MlmMask(const std::vector<int32_t>& tokens, Rng& rng,
                         const MlmMaskConfig& cfg, int32_t vocab_size) {
  if (cfg.mask_rate < 0.0 || cfg.mask_rate > 1.0) {
    throw ContractError("MlmMask: mask_rate outside [0, 1]");
  }
  MlmMasked out;
  out.corrupted = tokens;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!rng.bernoulli(cfg.mask_rate)) continue;
    out.labels.emplace_back(static_cast<int64_t>(i), tokens[i]);
    const double roll = rng.uniform();
    if (roll < cfg.p_mask) {
      out.corrupted[i] = BpeModel::kMaskId;
    } else if (roll < cfg.p_mask + cfg.p_random) {
      out.corrupted[i] = static_cast<int32_t>(
          rng.uniform_int(BpeModel::kByteBase, vocab_size - 1));
    }  // else keep the original token
  }
  return out;
}

// Mean cross-entropy over masked positions of one sequence.  When the mask
// selects nothing, one position is forced so every sample contributes.
template <typename T>
Tensor<T> MlmLoss(const TextEncoder<T>& enc, const std::vector<int32_t>& tokens,
                  Rng& rng, const MlmMaskConfig& cfg) {
  if (tokens.empty()) throw ContractError("MlmLoss: empty sequence");
  MlmMasked m = MlmMask(tokens, rng, cfg, enc.cfg.vocab_size);
  if (m.labels.empty()) {
    const int64_t pos =
        rng.uniform_int(0, static_cast<int64_t>(tokens.size()) - 1);
    m.labels.emplace_back(pos, tokens[static_cast<size_t>(pos)]);
    m.corrupted[static_cast<size_t>(pos)] = BpeModel::kMaskId;
  }
  // Positions beyond max_positions are dropped by the left-truncation in
  // EncodeText; shift label positions accordingly.
  int64_t offset = 0;
  if (static_cast<int64_t>(tokens.size()) > enc.cfg.max_positions) {
    offset = static_cast<int64_t>(tokens.size()) - enc.cfg.max_positions;
  }
  Tensor<T> h = EncodeText(enc, m.corrupted);
  std::vector<int64_t> rows;
  std::vector<int64_t> targets;
  for (const auto& [pos, orig] : m.labels) {
    if (pos < offset) continue;
    rows.push_back(pos - offset);
    targets.push_back(orig);
  }
  if (rows.empty()) {
    rows.push_back(h.rows() - 1);
    targets.push_back(tokens.back());
  }
  Tensor<T> picked = gather_rows(h, rows);
  Tensor<T> logits = ApplyLinear(picked, enc.mlm_head);
  return nll_mean(log_softmax(logits, 1), targets);
}

// MLM pretraining loop: uniformly sampled batches, mean masked cross-entropy,
// gradient clipping, Adam.  Returns the per-step loss curve.  A non-finite
// loss aborts with diagnostics.
struct MlmPretrainConfig {
  int32_t steps = 2000;
  int32_t batch_size = 8;
  double lr = 1e-3;
  double clip_norm = 5.0;
  MlmMaskConfig mask;
};

template <typename T>
std::vector<T> MlmPretrain(TextEncoder<T>& enc,
                           const std::vector<std::vector<int32_t>>& seqs,
                           const MlmPretrainConfig& cfg, Rng& rng) {
  std::vector<const std::vector<int32_t>*> usable;
  for (const auto& s : seqs)
    if (!s.empty()) usable.push_back(&s);
  if (usable.empty()) throw ContractError("MlmPretrain: empty corpus");
  if (cfg.steps < 0 || cfg.batch_size < 1) throw ContractError("MlmPretrain: bad config");
  AdamConfig<T> acfg;
  acfg.lr = static_cast<T>(cfg.lr);
  Adam<T> opt(enc.params.all(), acfg);
  std::vector<T> curve;
  curve.reserve(static_cast<size_t>(cfg.steps));
  for (int32_t step = 0; step < cfg.steps; ++step) {
    Tensor<T> total;
    for (int32_t b = 0; b < cfg.batch_size; ++b) {
      const auto& seq =
          *usable[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(usable.size()) - 1))];
      Tensor<T> l = MlmLoss(enc, seq, rng, cfg.mask);
      total = total.defined() ? add(total, l) : l;
    }
    Tensor<T> loss = scale(total, static_cast<T>(1.0 / cfg.batch_size));
    const T value = loss.data()[0];
    if (!std::isfinite(static_cast<double>(value))) {
      throw ContractError("MlmPretrain: non-finite loss " +
                          std::to_string(static_cast<double>(value)) + " at step " +
                          std::to_string(step));
    }
    backward(loss);
    if (cfg.clip_norm > 0) opt.clip_grad_norm(static_cast<T>(cfg.clip_norm));
    opt.step();
    curve.push_back(value);
  }
  return curve;
}

// Fraction of masked positions whose argmax prediction recovers the original
// token; evaluated without gradients.
template <typename T>
double MlmAccuracy(const TextEncoder<T>& enc,
                   const std::vector<std::vector<int32_t>>& seqs, Rng& rng,
                   const MlmMaskConfig& cfg) {
  NoGradGuard guard;
  int64_t total = 0, hit = 0;
  for (const auto& tokens : seqs) {
    if (tokens.empty()) continue;
    MlmMasked m = MlmMask(tokens, rng, cfg, enc.cfg.vocab_size);
    if (m.labels.empty()) continue;
    Tensor<T> h = EncodeText(enc, m.corrupted);
    const int64_t offset =
        static_cast<int64_t>(tokens.size()) > enc.cfg.max_positions
            ? static_cast<int64_t>(tokens.size()) - enc.cfg.max_positions
            : 0;
    for (const auto& [pos, orig] : m.labels) {
      if (pos < offset) continue;
      Tensor<T> logits = ApplyLinear(
          gather_rows(h, {pos - offset}), enc.mlm_head);
      int64_t best = 0;
      for (int64_t v = 1; v < logits.cols(); ++v) {
        if (logits.at(0, v) > logits.at(0, best)) best = v;
      }
      ++total;
      if (best == orig) ++hit;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace ctxasr
