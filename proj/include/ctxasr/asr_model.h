// include/ctxasr/asr_model.h
//
// Copyright (c)  2026  ctxasr authors
//
// The transducer: a speech encoder whose layers cross-attend prompt
// embeddings, a stateless two-token predictor, a joiner over the full
// (time x label) grid, and the transducer full-sum loss with an exact
// enumeration oracle for small grids.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "ctxasr/adam.h"
#include "ctxasr/bpe.h"
#include "ctxasr/corpus.h"
#include "ctxasr/nn.h"
#include "ctxasr/rng.h"
#include "ctxasr/tensor.h"
#include "ctxasr/text_encoder.h"

namespace ctxasr {

struct AsrModelConfig {
  int32_t feature_dim = 16;
  int32_t dim = 64;  // d
  int32_t layers = 2;
  int32_t heads = 4;
  int32_t ffn_hidden = 128;
  int32_t prompt_dim = 64;  // width of prompt embedding rows (c)
  int32_t vocab_size = 388;
  int32_t pred_dim = 64;    // predictor output width
  int32_t joiner_dim = 64;  // j
  // When false the cross-attention sublayer is never applied; the parameters
  // still exist so that variants share initialization and checkpoint layout.
  bool use_prompts = true;
  bool operator==(const AsrModelConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Speech encoder
// ---------------------------------------------------------------------------

template <typename T>
struct SpeechEncoder {
  AsrModelConfig cfg;
  Linear<T> in_proj;  // feature_dim -> d
  struct Layer {
    LayerNormParams<T> ln_self;
    Mha<T> self_attn;
    LayerNormParams<T> ln_cross;
    Mha<T> cross_attn;  // queries d, keys/values prompt_dim
    LayerNormParams<T> ln_ffn;
    Ffn<T> ffn;
  };
  std::vector<Layer> layers;
  LayerNormParams<T> final_ln;
};

template <typename T>
SpeechEncoder<T> MakeSpeechEncoder(const AsrModelConfig& cfg, ParamStore<T>& store, Rng& rng) {
  SpeechEncoder<T> enc;
  enc.cfg = cfg;
  const int64_t d = cfg.dim;
  enc.in_proj = MakeLinear(store, "spk_enc.in_proj", cfg.feature_dim, d, rng);
  for (int32_t l = 0; l < cfg.layers; ++l) {
    const std::string base = "spk_enc.layer" + std::to_string(l);
    typename SpeechEncoder<T>::Layer layer;
    layer.ln_self = MakeLayerNorm(store, base + ".ln_self", d);
    layer.self_attn = MakeMha(store, base + ".self", d, d, d, d, cfg.heads, rng);
    layer.ln_cross = MakeLayerNorm(store, base + ".ln_cross", d);
    layer.cross_attn = MakeMha(store, base + ".cross", d, cfg.prompt_dim, d, d, cfg.heads, rng);
    layer.ln_ffn = MakeLayerNorm(store, base + ".ln_ffn", d);
    layer.ffn = MakeFfn(store, base + ".ffn", d, cfg.ffn_hidden, rng);
    enc.layers.push_back(layer);
  }
  enc.final_ln = MakeLayerNorm(store, "spk_enc.final_ln", d);
  return enc;
}

template <typename T>
bool HasValidRows(const PromptEmbeddings<T>* prompts) {
  if (!prompts || prompts->joint.rows() == 0) return false;
  for (uint8_t v : prompts->valid)
    if (v) return true;
  return false;
}

// feats: T x feature_dim.  Projection, 2x subsampling, positions, then
// pre-norm blocks: self-attention, prompt cross-attention, feed-forward.
// With no usable prompt rows the cross-attention sublayer is skipped
// entirely, so the output equals a prompt-free encoder exactly.
template <typename T>
Tensor<T> ApplySpeechEncoder(const SpeechEncoder<T>& enc, const Tensor<T>& feats,
                             const PromptEmbeddings<std::type_identity_t<T>>* prompts) {
  if (feats.rank() != 2 || feats.cols() != enc.cfg.feature_dim) {
    throw ShapeError("ApplySpeechEncoder: features must be T x " +
                     std::to_string(enc.cfg.feature_dim));
  }
  if (feats.rows() < 1) throw ContractError("ApplySpeechEncoder: empty features");
  const bool attend = enc.cfg.use_prompts && HasValidRows(prompts);
  if (attend && prompts->joint.cols() != enc.cfg.prompt_dim) {
    throw ShapeError("ApplySpeechEncoder: prompt rows must be width " +
                     std::to_string(enc.cfg.prompt_dim));
  }
  Tensor<T> h = pair_average_rows(ApplyLinear(feats, enc.in_proj));
  h = add(h, SinusoidalPositions<T>(h.rows(), enc.cfg.dim));
  for (const auto& layer : enc.layers) {
    Tensor<T> q = ApplyLayerNorm(h, layer.ln_self);
    h = add(h, ApplyMha(q, q, layer.self_attn));
    if (attend) {
      h = add(h, ApplyMha(ApplyLayerNorm(h, layer.ln_cross), prompts->joint,
                          layer.cross_attn, &prompts->valid));
    }
    h = add(h, ApplyFfn(ApplyLayerNorm(h, layer.ln_ffn), layer.ffn));
  }
  return ApplyLayerNorm(h, enc.final_ln);
}

// ---------------------------------------------------------------------------
// Predictor and joiner
// ---------------------------------------------------------------------------

// Stateless label predictor: row u depends only on the previous two emitted
// tokens (y_{u-1}, y_{u-2}), padded with BOS at the sequence start.
template <typename T>
struct Predictor {
  Tensor<T> embed;  // vocab x pred_dim
  Linear<T> combine;  // 2*pred_dim -> pred_dim
};

template <typename T>
Predictor<T> MakePredictor(const AsrModelConfig& cfg, ParamStore<T>& store, Rng& rng) {
  Predictor<T> p;
  const int64_t e = cfg.pred_dim;
  p.embed = store.add("predictor.embed",
                      Tensor<T>::randn({cfg.vocab_size, e}, rng,
                                       static_cast<T>(1.0 / std::sqrt(static_cast<double>(e)))));
  p.combine = MakeLinear(store, "predictor.combine", 2 * e, e, rng);
  return p;
}

inline std::vector<int64_t> PredictorContext(const std::vector<int32_t>& y, int back) {
  std::vector<int64_t> ids(y.size() + 1, BpeModel::kBosId);
  for (size_t u = 0; u <= y.size(); ++u) {
    const int64_t idx = static_cast<int64_t>(u) - back;
    if (idx >= 0) ids[u] = y[static_cast<size_t>(idx)];
  }
  return ids;
}

// Returns U+1 rows; row u conditions the u-th emission.
template <typename T>
Tensor<T> ApplyPredictor(const Predictor<T>& p, const std::vector<int32_t>& y) {
  const int64_t vocab = p.embed.rows();
  for (int32_t t : y) {
    if (t <= 0 || t >= vocab) throw ContractError("ApplyPredictor: bad target token " + std::to_string(t));
  }
  Tensor<T> prev1 = gather_rows(p.embed, PredictorContext(y, 1));
  Tensor<T> prev2 = gather_rows(p.embed, PredictorContext(y, 2));
  return relu(ApplyLinear(concat(prev1, prev2, 1), p.combine));
}

template <typename T>
struct Joiner {
  Linear<T> enc_proj;   // d -> j
  Linear<T> pred_proj;  // pred_dim -> j
  Linear<T> out;        // j -> vocab, zero-init: untrained grids are uniform
};

template <typename T>
Joiner<T> MakeJoiner(const AsrModelConfig& cfg, ParamStore<T>& store, Rng& rng) {
  Joiner<T> j;
  j.enc_proj = MakeLinear(store, "joiner.enc_proj", cfg.dim, cfg.joiner_dim, rng);
  j.pred_proj = MakeLinear(store, "joiner.pred_proj", cfg.pred_dim, cfg.joiner_dim, rng);
  j.out = MakeLinear(store, "joiner.out", cfg.joiner_dim, cfg.vocab_size, rng, /*zero_init=*/true);
  return j;
}

// Log probabilities over the full grid: row t*(U+1)+u scores lattice cell
// (t, u).  Rows are normalized distributions over the vocabulary.
template <typename T>
Tensor<T> JoinerLogProbs(const Joiner<T>& j, const Tensor<T>& enc_out, const Tensor<T>& pred_out) {
  Tensor<T> grid = outer_add(ApplyLinear(enc_out, j.enc_proj), ApplyLinear(pred_out, j.pred_proj));
  return log_softmax(ApplyLinear(tanh_op(grid), j.out), 1);
}

// ---------------------------------------------------------------------------
// Transducer full-sum loss
// ---------------------------------------------------------------------------

namespace detail {

inline double Lse2d(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename T>
void CheckRnntArgs(const Tensor<T>& log_probs, const std::vector<int32_t>& y, int64_t t_len) {
  if (log_probs.rank() != 2) throw ShapeError("rnnt_loss: rank-2 log_probs required");
  const int64_t u_len = static_cast<int64_t>(y.size());
  if (t_len < 1) throw ContractError("rnnt_loss: need at least one frame");
  if (log_probs.rows() != t_len * (u_len + 1)) {
    throw ShapeError("rnnt_loss: grid rows " + std::to_string(log_probs.rows()) +
                     " do not match T*(U+1) = " + std::to_string(t_len * (u_len + 1)));
  }
  const int64_t vocab = log_probs.cols();
  if (vocab < 2) throw ContractError("rnnt_loss: vocabulary too small");
  for (int32_t t : y) {
    if (t <= 0 || t >= vocab) throw ContractError("rnnt_loss: target token " + std::to_string(t) + " out of range");
  }
}

}  // namespace detail

// Negative log of the total probability of all blank/emit interleavings that
// produce y.  The forward recursion runs in double regardless of T; the
// backward rule is the exact adjoint of the recursion, expressed through the
// usual forward/backward occupancies:
//   alpha(0,0) = 0
//   alpha(t,u) = lse(alpha(t-1,u) + z(t-1,u,blank), alpha(t,u-1) + z(t,u-1,y_u))
//   loss = -(alpha(T-1,U) + z(T-1,U,blank))
template <typename T>
Tensor<T> rnnt_loss(const Tensor<T>& log_probs, const std::vector<int32_t>& y, int64_t t_len) {
  detail::CheckRnntArgs(log_probs, y, t_len);
  const int64_t u_len = static_cast<int64_t>(y.size());
  const int64_t w = u_len + 1;  // grid width
  const int64_t vocab = log_probs.cols();
  const auto& zd = log_probs.data();
  const auto z = [&](int64_t t, int64_t u, int64_t k) -> double {
    return static_cast<double>(zd[static_cast<size_t>((t * w + u) * vocab + k)]);
  };
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> alpha(static_cast<size_t>(t_len * w), kNegInf);
  alpha[0] = 0.0;
  for (int64_t t = 0; t < t_len; ++t) {
    for (int64_t u = 0; u <= u_len; ++u) {
      if (t == 0 && u == 0) continue;
      double a = kNegInf;
      if (t > 0) a = alpha[static_cast<size_t>((t - 1) * w + u)] + z(t - 1, u, BpeModel::kBlankId);
      if (u > 0) {
        a = detail::Lse2d(a, alpha[static_cast<size_t>(t * w + u - 1)] + z(t, u - 1, y[static_cast<size_t>(u - 1)]));
      }
      alpha[static_cast<size_t>(t * w + u)] = a;
    }
  }
  const double total = alpha[static_cast<size_t>((t_len - 1) * w + u_len)] + z(t_len - 1, u_len, BpeModel::kBlankId);
  const T loss_val = static_cast<T>(-total);

  auto xn = log_probs.node();
  std::vector<int32_t> yc = y;
  return MakeResult<T>(
      {1}, {loss_val}, {log_probs},
      [xn, yc, t_len, u_len, w, vocab, alpha, total](Node<T>& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        constexpr double kInf = std::numeric_limits<double>::infinity();
        const auto zv = [&](int64_t t, int64_t u, int64_t k) -> double {
          return static_cast<double>(xn->data[static_cast<size_t>((t * w + u) * vocab + k)]);
        };
        // Backward occupancies: beta(t,u) = log-probability mass of all
        // completions from (t,u), including the final blank.
        std::vector<double> beta(static_cast<size_t>(t_len * w), -kInf);
        beta[static_cast<size_t>((t_len - 1) * w + u_len)] = zv(t_len - 1, u_len, BpeModel::kBlankId);
        for (int64_t t = t_len - 1; t >= 0; --t) {
          for (int64_t u = u_len; u >= 0; --u) {
            if (t == t_len - 1 && u == u_len) continue;
            double b = -kInf;
            if (t + 1 < t_len) b = zv(t, u, BpeModel::kBlankId) + beta[static_cast<size_t>((t + 1) * w + u)];
            if (u + 1 <= u_len) {
              b = detail::Lse2d(b, zv(t, u, yc[static_cast<size_t>(u)]) + beta[static_cast<size_t>(t * w + u + 1)]);
            }
            beta[static_cast<size_t>(t * w + u)] = b;
          }
        }
        // d loss / d z(t,u,k) = -(posterior of the corresponding transition).
        const T g = o.grad[0];
        for (int64_t t = 0; t < t_len; ++t) {
          for (int64_t u = 0; u <= u_len; ++u) {
            const double a = alpha[static_cast<size_t>(t * w + u)];
            if (a == -kInf) continue;
            const size_t row = static_cast<size_t>((t * w + u) * vocab);
            if (t + 1 < t_len) {
              const double p = std::exp(a + zv(t, u, BpeModel::kBlankId) +
                                        beta[static_cast<size_t>((t + 1) * w + u)] - total);
              xn->grad[row + BpeModel::kBlankId] -= g * static_cast<T>(p);
            }
            if (t == t_len - 1 && u == u_len) {
              // The terminating blank: alpha + z here is the total itself.
              const double p = std::exp(a + zv(t, u, BpeModel::kBlankId) - total);
              xn->grad[row + BpeModel::kBlankId] -= g * static_cast<T>(p);
            }
            if (u + 1 <= u_len) {
              const int64_t tok = yc[static_cast<size_t>(u)];
              const double p = std::exp(a + zv(t, u, tok) +
                                        beta[static_cast<size_t>(t * w + u + 1)] - total);
              xn->grad[static_cast<size_t>(row) + static_cast<size_t>(tok)] -= g * static_cast<T>(p);
            }
          }
        }
      });
}

// Exact oracle: enumerates every blank/emit interleaving and log-sum-exps the
// path scores.  Exponential in T+U, so restricted to tiny grids.
template <typename T>
double rnnt_loss_bruteforce(const Tensor<T>& log_probs, const std::vector<int32_t>& y, int64_t t_len) {
  detail::CheckRnntArgs(log_probs, y, t_len);
  const int64_t u_len = static_cast<int64_t>(y.size());
  if (t_len + u_len > 12) throw ContractError("rnnt_loss_bruteforce: grid too large for enumeration");
  const int64_t w = u_len + 1;
  const int64_t vocab = log_probs.cols();
  const auto& zd = log_probs.data();
  const auto z = [&](int64_t t, int64_t u, int64_t k) -> double {
    return static_cast<double>(zd[static_cast<size_t>((t * w + u) * vocab + k)]);
  };
  std::vector<double> path_scores;
  const std::function<void(int64_t, int64_t, double)> walk = [&](int64_t t, int64_t u, double acc) {
    if (t == t_len - 1 && u == u_len) {
      path_scores.push_back(acc + z(t, u, BpeModel::kBlankId));
      return;
    }
    if (t + 1 < t_len) walk(t + 1, u, acc + z(t, u, BpeModel::kBlankId));
    if (u + 1 <= u_len) walk(t, u + 1, acc + z(t, u, y[static_cast<size_t>(u)]));
  };
  walk(0, 0, 0.0);
  return -LogSumExp(std::span<const double>(path_scores));
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

template <typename T>
struct AsrModel {
  AsrModelConfig cfg;
  ParamStore<T> params;  // spk_enc.*, predictor.*, joiner.*
  SpeechEncoder<T> encoder;
  Predictor<T> predictor;
  Joiner<T> joiner;
};

template <typename T>
AsrModel<T> MakeAsrModel(const AsrModelConfig& cfg, Rng& rng) {
  // The vocabulary must cover blank + BOS + MASK + PAD plus at least one
  // emittable token.
  if (cfg.feature_dim <= 0 || cfg.dim <= 0 || cfg.layers <= 0 || cfg.heads <= 0 ||
      cfg.prompt_dim <= 0 || cfg.vocab_size <= BpeModel::kByteBase ||
      cfg.pred_dim <= 0 || cfg.joiner_dim <= 0) {
    throw ContractError("MakeAsrModel: bad config");
  }
  AsrModel<T> model;
  model.cfg = cfg;
  model.encoder = MakeSpeechEncoder(cfg, model.params, rng);
  model.predictor = MakePredictor(cfg, model.params, rng);
  model.joiner = MakeJoiner(cfg, model.params, rng);
  return model;
}

template <typename T>
Tensor<T> FeaturesToTensor(const FeatureMatrix& fm) {
  std::vector<T> data(fm.data.size());
  for (size_t i = 0; i < fm.data.size(); ++i) data[i] = static_cast<T>(fm.data[i]);
  return Tensor<T>::from_data({fm.rows, fm.cols}, std::move(data));
}

// One training example, fully tokenized and rendered.
template <typename T>
struct AsrExample {
  Tensor<T> feats;  // T x feature_dim
  std::vector<int32_t> targets;
  std::vector<int32_t> content_tokens;
  std::vector<int32_t> style_tokens;
};

// Loss for one utterance.  The text encoder body runs frozen: only the style
// vector v receives gradients from the ASR objective.
template <typename T>
Tensor<T> ExampleLoss(const AsrModel<T>& model, const TextEncoder<T>& text_enc,
                      const AsrExample<T>& ex) {
  if (ex.targets.empty()) throw ContractError("ExampleLoss: empty target sequence");
  PromptEmbeddings<T> prompts =
      EncodePrompts(text_enc, ex.content_tokens, ex.style_tokens, /*freeze_body=*/true);
  Tensor<T> enc_out = ApplySpeechEncoder(model.encoder, ex.feats, &prompts);
  Tensor<T> pred_out = ApplyPredictor(model.predictor, ex.targets);
  Tensor<T> grid = JoinerLogProbs(model.joiner, enc_out, pred_out);
  return rnnt_loss(grid, ex.targets, enc_out.rows());
}

// One optimizer step over a batch: mean of per-utterance losses, gradient
// clipping, Adam update.  A non-finite loss aborts with diagnostics rather
// than training on garbage.
template <typename T>
T TrainStep(const AsrModel<T>& model, const TextEncoder<T>& text_enc,
            const std::vector<AsrExample<T>>& batch, Adam<T>& opt,
            T clip_norm = T(5)) {
  if (batch.empty()) throw ContractError("TrainStep: empty batch");
  Tensor<T> total;
  for (const auto& ex : batch) {
    Tensor<T> l = ExampleLoss(model, text_enc, ex);
    total = total.defined() ? add(total, l) : l;
  }
  Tensor<T> loss = scale(total, static_cast<T>(1.0 / static_cast<double>(batch.size())));
  const T value = loss.data()[0];
  if (!std::isfinite(static_cast<double>(value))) {
    std::string diag = "TrainStep: non-finite loss " + std::to_string(static_cast<double>(value)) +
                       " on batch of " + std::to_string(batch.size()) + " (T,U) =";
    for (const auto& ex : batch) {
      diag += " (" + std::to_string(ex.feats.rows()) + "," + std::to_string(ex.targets.size()) + ")";
    }
    throw ContractError(diag);
  }
  backward(loss);
  if (clip_norm > T(0)) opt.clip_grad_norm(clip_norm);
  opt.step();
  return value;
}

// The parameter set trained by the ASR objective: the whole transducer plus
// the text encoder's style vector.
template <typename T>
std::vector<Tensor<T>> AsrTrainableParams(const AsrModel<T>& model, const TextEncoder<T>& text_enc) {
  std::vector<Tensor<T>> params = model.params.all();
  params.push_back(text_enc.params.get("text_enc.style_v"));
  return params;
}

}  // namespace ctxasr
