// src/prompts.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/prompts.h"

#include <algorithm>
#include <map>

#include "ctxasr/tensor.h"

namespace ctxasr {

RareWordSet BuildRareWordSet(const std::vector<SynthUtterance>& utts,
                             int32_t common_k) {
  if (utts.empty()) {
    throw ContractError("BuildRareWordSet: empty corpus");
  }
  if (common_k < 1) {
    throw ContractError("BuildRareWordSet: common_k must be >= 1");
  }
  std::map<std::string, int64_t> counts;
  for (const SynthUtterance& u : utts) {
    for (const std::string& w : SplitWords(NormalizeUc(u.text_mcp))) {
      counts[ToLowerAscii(w)] += 1;
    }
  }
  // Rank by count descending, ties lexicographic (map order is already
  // lexicographic, stable_sort keeps it for equal counts).
  std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(),
                                                      counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  RareWordSet rs;
  rs.common_k = common_k;
  for (size_t i = static_cast<size_t>(common_k); i < ranked.size(); ++i) {
    rs.words.insert(ranked[i].first);
  }
  return rs;
}

std::vector<std::string> UtteranceWords(const std::string& text_mcp) {
  std::vector<std::string> out;
  for (const std::string& w : SplitWords(NormalizeUc(text_mcp))) {
    out.push_back(ToLowerAscii(w));
  }
  return out;
}

std::vector<std::string> PoolFromRareSet(const RareWordSet& rare_set) {
  return std::vector<std::string>(rare_set.words.begin(),
                                  rare_set.words.end());
}

std::vector<std::string> MakeBiasingPrompt(
    const std::vector<std::string>& utterance_words,
    const RareWordSet& rare_set, const std::vector<std::string>& pool,
    Rng& rng, int32_t n_distractors) {
  if (n_distractors < 0) {
    throw ContractError("MakeBiasingPrompt: negative distractor count");
  }
  std::vector<std::string> list;
  std::set<std::string> present;
  for (const std::string& w : utterance_words) {
    if (rare_set.Contains(w) && present.insert(w).second) list.push_back(w);
  }
  std::vector<std::string> eligible;
  eligible.reserve(pool.size());
  for (const std::string& w : pool) {
    if (!present.count(w)) eligible.push_back(w);
  }
  if (static_cast<int32_t>(eligible.size()) < n_distractors) {
    throw ContractError(
        "MakeBiasingPrompt: distractor pool smaller than n_distractors");
  }
  // Partial Fisher-Yates draw without replacement.
  for (int32_t i = 0; i < n_distractors; ++i) {
    const int64_t j =
        rng.uniform_int(i, static_cast<int64_t>(eligible.size()) - 1);
    std::swap(eligible[static_cast<size_t>(i)], eligible[static_cast<size_t>(j)]);
    list.push_back(eligible[static_cast<size_t>(i)]);
  }
  rng.shuffle(list);
  return list;
}

std::string SerializeWordList(const std::vector<std::string>& words) {
  return JoinWords(words);
}

namespace {

// Styled substring of the donor text: starts at a word boundary, at most
// max_bytes long.
std::string StyleSubstring(const std::string& donor_text, Style style,
                           int32_t max_bytes, Rng& rng) {
  const std::string styled = ApplyStyle(donor_text, style);
  const std::vector<std::string> words = SplitWords(styled);
  if (words.empty() || max_bytes <= 0) return "";
  const size_t start =
      static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(words.size()) - 1));
  std::string out;
  for (size_t i = start; i < words.size(); ++i) {
    const size_t add = words[i].size() + (out.empty() ? 0 : 1);
    if (out.size() + add > static_cast<size_t>(max_bytes)) break;
    if (!out.empty()) out.push_back(' ');
    out += words[i];
  }
  if (out.empty()) {
    // First word alone exceeds the cap; keep a prefix so the prompt is
    // never silently empty.
    out = words[start].substr(0, static_cast<size_t>(max_bytes));
  }
  return out;
}

}  // namespace

std::vector<TrainingPrompt> MakeTrainingPrompts(
    const std::vector<const SynthUtterance*>& batch,
    const RareWordSet& rare_set, const std::vector<std::string>& pool,
    Rng& rng, const PromptRecipeConfig& cfg) {
  if (batch.empty()) {
    throw ContractError("MakeTrainingPrompts: empty batch");
  }
  const size_t n = batch.size();
  std::vector<TrainingPrompt> out(n);

  // (1) Content prompt type and text.
  for (size_t i = 0; i < n; ++i) {
    const SynthUtterance& u = *batch[i];
    TrainingPrompt& p = out[i];
    p.used_wordlist = rng.bernoulli(cfg.wordlist_prob);
    if (p.used_wordlist) {
      p.n_distractors = static_cast<int32_t>(
          rng.uniform_int(cfg.min_distractors, cfg.max_distractors));
      // Small corpora can have fewer eligible distractors than the sampled
      // count; clamp rather than fail so the recipe works at any scale.
      const std::vector<std::string> words = UtteranceWords(u.text_mcp);
      int32_t own = 0;
      std::set<std::string> seen;
      for (const std::string& w : words) {
        if (rare_set.Contains(w) && seen.insert(w).second) ++own;
      }
      const int32_t feasible = std::max<int32_t>(
          0, static_cast<int32_t>(pool.size()) - own);
      p.n_distractors = std::min(p.n_distractors, feasible);
      p.content_text = SerializeWordList(
          MakeBiasingPrompt(words, rare_set, pool, rng, p.n_distractors));
    } else {
      p.content_text = TruncateHistory(
          u.preceding_text, static_cast<size_t>(cfg.history_max_bytes));
    }
  }

  // (2) Independent dropout of content and style prompts.
  for (TrainingPrompt& p : out) {
    p.content_dropped = rng.bernoulli(cfg.p_drop);
    if (p.content_dropped) p.content_text.clear();
    p.style_dropped = rng.bernoulli(cfg.p_drop);
  }

  // (3) In-batch exchange: cyclic rotation of the selected content prompts.
  std::vector<size_t> selected;
  for (size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(cfg.p_swap)) {
      out[i].swap_selected = true;
      selected.push_back(i);
    }
  }
  if (selected.size() >= 2) {
    std::string carry = out[selected.back()].content_text;
    for (size_t k = 0; k < selected.size(); ++k) {
      std::swap(out[selected[k]].content_text, carry);
    }
  }

  // (4) Style draw, style prompt, styled reference.
  for (size_t i = 0; i < n; ++i) {
    TrainingPrompt& p = out[i];
    p.style = SampleStyle(rng, cfg.mcp_prob);
    if (!p.style_dropped) {
      const SynthUtterance& donor = *batch[(i + 1) % n];
      const std::string sub =
          StyleSubstring(donor.preceding_text, p.style,
                         cfg.style_substring_max_bytes, rng);
      p.style_text = StyleTag(p.style);
      if (!sub.empty()) {
        p.style_text += " ";
        p.style_text += sub;
      }
    }
    p.reference = ApplyStyle(batch[i]->text_mcp, p.style);
  }
  return out;
}

}  // namespace ctxasr
