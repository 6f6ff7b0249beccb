// include/ctxasr/prompts.h
//
// Copyright (c)  2026  ctxasr authors
//
// Prompt construction recipe: rare-word sets, biasing word lists with
// distractors, and the per-batch training prompt sampler (content type
// selection, dropout, in-batch exchange, style sampling).

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ctxasr/corpus.h"
#include "ctxasr/rng.h"
#include "ctxasr/textnorm.h"

namespace ctxasr {

struct PromptRecipeConfig {
  double wordlist_prob = 0.5;  // content prompt = word list vs preceding text
  double mcp_prob = 0.7;       // per-sample style draw
  double p_drop = 0.05;        // independent content/style prompt dropout
  double p_swap = 0.1;         // in-batch content prompt exchange fraction
  int32_t min_distractors = 5;
  int32_t max_distractors = 15;
  int32_t history_max_bytes = 256;
  int32_t style_substring_max_bytes = 96;
  int32_t common_k = 64;  // frequency-rank cutoff for rare words
};

struct RareWordSet {
  std::set<std::string> words;  // lowercased written forms
  int32_t common_k = 0;
  bool Contains(const std::string& lower) const {
    return words.count(lower) != 0;
  }
};

// Ranks normalized lowercased words of the corpus by frequency (ties broken
// lexicographically); words ranked beyond common_k are rare.
RareWordSet BuildRareWordSet(const std::vector<SynthUtterance>& utts,
                             int32_t common_k);

// Lowercased normalized words of an utterance, in order.
std::vector<std::string> UtteranceWords(const std::string& text_mcp);

// Sorted distractor pool (every rare word).
std::vector<std::string> PoolFromRareSet(const RareWordSet& rare_set);

// Biasing list: the utterance's rare words plus n_distractors drawn without
// replacement from the pool (minus the utterance's own rares), shuffled.
// Throws if the eligible pool is smaller than n_distractors.
std::vector<std::string> MakeBiasingPrompt(
    const std::vector<std::string>& utterance_words,
    const RareWordSet& rare_set, const std::vector<std::string>& pool,
    Rng& rng, int32_t n_distractors);

// Words joined by single spaces (shuffling happens upstream).
std::string SerializeWordList(const std::vector<std::string>& words);

struct TrainingPrompt {
  std::string content_text;  // "" when dropped
  std::string style_text;    // tag phrase + demonstration, "" when dropped
  Style style = Style::kUc;
  std::string reference;  // transcript in the declared style
  // Recipe provenance for statistics.
  bool used_wordlist = false;   // content type chosen before dropout
  bool content_dropped = false;
  bool style_dropped = false;
  bool swap_selected = false;   // part of the in-batch exchange set
  int32_t n_distractors = -1;   // valid when used_wordlist
};

// Applies the full recipe to one mini-batch.  Content prompts are built
// first (word list or truncated preceding text), then dropout, then the
// in-batch exchange (a cyclic rotation of the selected samples' content
// prompts), then per-sample style draws; each style prompt carries the tag
// phrase plus a styled substring of the next sample's preceding text, and
// the reference is always rendered in the declared style.
std::vector<TrainingPrompt> MakeTrainingPrompts(
    const std::vector<const SynthUtterance*>& batch,
    const RareWordSet& rare_set, const std::vector<std::string>& pool,
    Rng& rng, const PromptRecipeConfig& cfg);

}  // namespace ctxasr
