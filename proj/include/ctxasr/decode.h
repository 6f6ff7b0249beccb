// include/ctxasr/decode.h
//
// Copyright (c)  2026  ctxasr authors
//
// Transducer decoding: frame-synchronous greedy search, beam search with
// log-sum-exp hypothesis merging, and the long-form session loop that feeds
// earlier outputs back as the content prompt of later utterances.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxasr/asr_model.h"
#include "ctxasr/bpe.h"
#include "ctxasr/corpus.h"
#include "ctxasr/tensor.h"
#include "ctxasr/text_encoder.h"
#include "ctxasr/textnorm.h"

namespace ctxasr {

struct DecodeConfig {
  int32_t beam = 4;
  int32_t max_sym_per_frame = 5;
};

struct DecodeResult {
  std::vector<int32_t> tokens;
  double score = 0.0;
};

namespace detail {

// Joint log-probability rows for one utterance, cached by (frame, two-token
// predictor context).  Decoding queries the same contexts repeatedly.
template <typename T>
class JoinerRowCache {
 public:
  JoinerRowCache(const AsrModel<T>& model, Tensor<T> enc_out)
      : model_(model), enc_out_(std::move(enc_out)) {}

  int64_t frames() const { return enc_out_.rows(); }

  const std::vector<T>& Row(int64_t t, int32_t prev1, int32_t prev2) {
    const int64_t key = (t << 40) | (static_cast<int64_t>(prev1) << 20) | prev2;
    auto it = rows_.find(key);
    if (it != rows_.end()) return it->second;
    const int64_t pkey = (static_cast<int64_t>(prev1) << 20) | prev2;
    auto pit = pred_.find(pkey);
    if (pit == pred_.end()) {
      Tensor<T> p1 = gather_rows(model_.predictor.embed, {prev1});
      Tensor<T> p2 = gather_rows(model_.predictor.embed, {prev2});
      Tensor<T> row = relu(ApplyLinear(concat(p1, p2, 1), model_.predictor.combine));
      pit = pred_.emplace(pkey, std::move(row)).first;
    }
    Tensor<T> z = JoinerLogProbs(model_.joiner, gather_rows(enc_out_, {t}), pit->second);
    return rows_.emplace(key, z.data()).first->second;
  }

 private:
  const AsrModel<T>& model_;
  Tensor<T> enc_out_;
  std::unordered_map<int64_t, Tensor<T>> pred_;
  std::unordered_map<int64_t, std::vector<T>> rows_;
};

inline void ContextOf(const std::vector<int32_t>& y, int32_t* prev1, int32_t* prev2) {
  const size_t n = y.size();
  *prev1 = n >= 1 ? y[n - 1] : BpeModel::kBosId;
  *prev2 = n >= 2 ? y[n - 2] : BpeModel::kBosId;
}

}  // namespace detail

// Frame-synchronous greedy search: at each frame emit the argmax token while
// it beats blank, up to max_sym_per_frame emissions, then advance.  The
// special ids (BOS, MASK, PAD) are never emitted; ties prefer blank, then the
// lowest token id.
template <typename T>
DecodeResult GreedyDecodeEncoded(const AsrModel<T>& model, const Tensor<T>& enc_out,
                                 const DecodeConfig& cfg = {}) {
  NoGradGuard guard;
  detail::JoinerRowCache<T> cache(model, enc_out);
  const int64_t vocab = model.cfg.vocab_size;
  DecodeResult res;
  for (int64_t t = 0; t < cache.frames(); ++t) {
    for (int32_t emitted = 0;; ++emitted) {
      int32_t prev1, prev2;
      detail::ContextOf(res.tokens, &prev1, &prev2);
      const std::vector<T>& z = cache.Row(t, prev1, prev2);
      if (emitted >= cfg.max_sym_per_frame) {
        res.score += static_cast<double>(z[BpeModel::kBlankId]);
        break;
      }
      int64_t best = BpeModel::kBlankId;
      for (int64_t k = BpeModel::kByteBase; k < vocab; ++k) {
        if (z[static_cast<size_t>(k)] > z[static_cast<size_t>(best)]) best = k;
      }
      res.score += static_cast<double>(z[static_cast<size_t>(best)]);
      if (best == BpeModel::kBlankId) break;
      res.tokens.push_back(static_cast<int32_t>(best));
    }
  }
  return res;
}

// Beam search.  Within a frame, every surviving hypothesis proposes a blank
// advance plus all token emissions; the beam keeps the best `beam` proposals
// of each round jointly, banks the blank advances for the next frame, and
// keeps expanding the emissions.  Hypotheses reaching the same token sequence
// at the same lattice position merge with log-sum-exp, so a returned score is
// the log of a sum of path probabilities.  With beam = 1 the joint top-1 is
// exactly the greedy choice, so beam-1 reproduces greedy_decode.
template <typename T>
std::vector<DecodeResult> BeamSearchEncoded(const AsrModel<T>& model, const Tensor<T>& enc_out,
                                            const DecodeConfig& cfg = {}) {
  if (cfg.beam < 1) throw ContractError("BeamSearchEncoded: beam must be >= 1");
  NoGradGuard guard;
  detail::JoinerRowCache<T> cache(model, enc_out);
  const int64_t vocab = model.cfg.vocab_size;
  using Hyp = std::pair<std::vector<int32_t>, double>;  // tokens, log score

  std::map<std::vector<int32_t>, double> frontier;  // hyps at frame boundary
  frontier[{}] = 0.0;
  for (int64_t t = 0; t < cache.frames(); ++t) {
    std::map<std::vector<int32_t>, double> active(std::move(frontier));
    std::map<std::vector<int32_t>, double> banked;
    frontier.clear();
    for (int32_t round = 0; round <= cfg.max_sym_per_frame && !active.empty(); ++round) {
      // Candidates reference their source hypothesis; tok = blank marks the
      // frame advance.  Generation order (per hypothesis: blank first, then
      // tokens by increasing id) plus stable sorting fixes tie-breaking to
      // match greedy's argmax convention.
      std::vector<const std::pair<const std::vector<int32_t>, double>*> sources;
      struct Cand {
        double score;
        int32_t source;
        int32_t tok;
      };
      std::vector<Cand> cands;
      for (const auto& entry : active) {
        const int32_t src = static_cast<int32_t>(sources.size());
        sources.push_back(&entry);
        int32_t prev1, prev2;
        detail::ContextOf(entry.first, &prev1, &prev2);
        const std::vector<T>& z = cache.Row(t, prev1, prev2);
        cands.push_back({entry.second + static_cast<double>(z[BpeModel::kBlankId]), src,
                         BpeModel::kBlankId});
        if (round == cfg.max_sym_per_frame) continue;  // emission budget spent
        for (int64_t k = BpeModel::kByteBase; k < vocab; ++k) {
          cands.push_back({entry.second + static_cast<double>(z[static_cast<size_t>(k)]), src,
                           static_cast<int32_t>(k)});
        }
      }
      std::stable_sort(cands.begin(), cands.end(),
                       [](const Cand& a, const Cand& b) { return a.score > b.score; });
      if (static_cast<int64_t>(cands.size()) > cfg.beam) cands.resize(static_cast<size_t>(cfg.beam));
      std::map<std::vector<int32_t>, double> next_active;
      for (const Cand& c : cands) {
        std::vector<int32_t> tokens = sources[static_cast<size_t>(c.source)]->first;
        auto& dst = c.tok == BpeModel::kBlankId ? banked : next_active;
        if (c.tok != BpeModel::kBlankId) tokens.push_back(c.tok);
        auto it = dst.find(tokens);
        if (it == dst.end()) {
          dst.emplace(std::move(tokens), c.score);
        } else {
          it->second = LogSumExp2(it->second, c.score);
        }
      }
      active = std::move(next_active);
    }
    // Keep the beam best banked hypotheses as the next frame's frontier.
    std::vector<Hyp> ordered(banked.begin(), banked.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Hyp& a, const Hyp& b) { return a.second > b.second; });
    if (static_cast<int64_t>(ordered.size()) > cfg.beam) ordered.resize(static_cast<size_t>(cfg.beam));
    for (auto& [tokens, score] : ordered) frontier.emplace(std::move(tokens), score);
  }

  std::vector<DecodeResult> out;
  for (auto& [tokens, score] : frontier) out.push_back({tokens, score});
  std::stable_sort(out.begin(), out.end(),
                   [](const DecodeResult& a, const DecodeResult& b) { return a.score > b.score; });
  return out;
}

template <typename T>
DecodeResult GreedyDecode(const AsrModel<T>& model, const Tensor<T>& feats,
                          const PromptEmbeddings<std::type_identity_t<T>>* prompts,
                          const DecodeConfig& cfg = {}) {
  NoGradGuard guard;
  return GreedyDecodeEncoded(model, ApplySpeechEncoder(model.encoder, feats, prompts), cfg);
}

template <typename T>
std::vector<DecodeResult> BeamSearch(const AsrModel<T>& model, const Tensor<T>& feats,
                                     const PromptEmbeddings<std::type_identity_t<T>>* prompts,
                                     const DecodeConfig& cfg = {}) {
  NoGradGuard guard;
  return BeamSearchEncoded(model, ApplySpeechEncoder(model.encoder, feats, prompts), cfg);
}

// ---------------------------------------------------------------------------
// Single-utterance convenience and the long-form session loop
// ---------------------------------------------------------------------------

enum class DecodeMode { kGreedy, kBeam };

template <typename T>
DecodeResult DecodeUtterance(const AsrModel<T>& model, const TextEncoder<T>& text_enc,
                             const BpeModel& bpe, const Tensor<T>& feats,
                             const std::string& content_prompt, const std::string& style_prompt,
                             DecodeMode mode, const DecodeConfig& cfg = {}) {
  NoGradGuard guard;
  PromptEmbeddings<T> prompts = EncodePrompts(text_enc, bpe.Encode(content_prompt),
                                              bpe.Encode(style_prompt));
  if (mode == DecodeMode::kGreedy) return GreedyDecode(model, feats, &prompts, cfg);
  std::vector<DecodeResult> nbest = BeamSearch(model, feats, &prompts, cfg);
  if (nbest.empty()) return {};
  return nbest.front();
}

enum class HistoryMode { kDecoded, kOracle };

inline const char* HistoryModeName(HistoryMode m) {
  return m == HistoryMode::kDecoded ? "decoded" : "oracle";
}

struct LongformUttResult {
  std::string utt_id;
  std::string hypothesis;
  double score = 0.0;
  std::string prompt_used;  // the content prompt
  std::string style;
};

// Decodes one recording in order.  The content prompt of utterance i is the
// history of the last `history_utts` texts — prior hypotheses in decoded
// mode, styled references in oracle mode — joined with single spaces and
// truncated to `history_bytes` from the right.  The style prompt is fixed for
// the whole session and unrelated to the recording.
template <typename T>
std::vector<LongformUttResult> LongformDecode(
    const AsrModel<T>& model, const TextEncoder<T>& text_enc, const BpeModel& bpe,
    const Lexicon& lexicon, const std::vector<SynthUtterance>& utts,
    const LongformSession& session, const JitterConfig& jitter, int32_t history_utts,
    size_t history_bytes, HistoryMode history_mode, Style style,
    const std::string& fixed_style_text, DecodeMode mode, const DecodeConfig& cfg = {}) {
  if (history_utts < 0) throw ContractError("LongformDecode: negative history length");
  NoGradGuard guard;
  std::vector<LongformUttResult> out;
  std::vector<std::string> history;  // one entry per already-decoded utterance
  std::string style_prompt = StyleTag(style);
  if (!fixed_style_text.empty()) style_prompt += " " + fixed_style_text;
  for (int64_t idx : session.utt_indices) {
    const SynthUtterance& utt = utts.at(static_cast<size_t>(idx));
    std::string joined;
    const size_t from = history.size() > static_cast<size_t>(history_utts)
                            ? history.size() - static_cast<size_t>(history_utts)
                            : 0;
    for (size_t k = from; k < history.size(); ++k) {
      if (!joined.empty()) joined += " ";
      joined += history[k];
    }
    const std::string content_prompt = TruncateHistory(joined, history_bytes);
    Tensor<T> feats = FeaturesToTensor<T>(
        RenderFeatures(lexicon, NormalizeUc(utt.text_mcp), utt.feature_seed, jitter));
    DecodeResult res = DecodeUtterance(model, text_enc, bpe, feats, content_prompt,
                                       style_prompt, mode, cfg);
    LongformUttResult r;
    r.utt_id = utt.utt_id;
    r.hypothesis = bpe.Decode(res.tokens);
    r.score = res.score;
    r.prompt_used = content_prompt;
    r.style = StyleName(style);
    out.push_back(r);
    history.push_back(history_mode == HistoryMode::kDecoded
                          ? r.hypothesis
                          : ApplyStyle(utt.text_mcp, style));
  }
  return out;
}

}  // namespace ctxasr
