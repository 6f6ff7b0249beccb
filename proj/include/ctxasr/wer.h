// include/ctxasr/wer.h
//
// Copyright (c)  2026  ctxasr authors
//
// Word error rate machinery: Levenshtein alignment with a deterministic
// tie-break (substitution preferred over insert+delete pairs), plus the
// rare-word and casing/punctuation metrics built on the alignment.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxasr/prompts.h"

namespace ctxasr {

struct EditCounts {
  int64_t sub = 0;
  int64_t ins = 0;
  int64_t del = 0;
  int64_t Total() const { return sub + ins + del; }
  bool operator==(const EditCounts&) const = default;
};

// One aligned step; -1 marks a gap (insertion has ref_idx=-1, deletion has
// hyp_idx=-1).
struct AlignedPair {
  int32_t ref_idx = -1;
  int32_t hyp_idx = -1;
};

struct Alignment {
  EditCounts counts;
  std::vector<AlignedPair> pairs;
};

// Minimal-cost alignment of two word sequences (unit costs).  When several
// alignments reach the minimum, the backtrace prefers the diagonal move
// (match/substitution), then deletion, then insertion.
Alignment AlignWords(const std::vector<std::string>& ref,
                     const std::vector<std::string>& hyp);

EditCounts EditDistance(const std::vector<std::string>& ref,
                        const std::vector<std::string>& hyp);

struct WerCounts {
  int64_t sub = 0;
  int64_t ins = 0;
  int64_t del = 0;
  int64_t ref_words = 0;
  int64_t Total() const { return sub + ins + del; }
  double Wer() const {
    return static_cast<double>(sub + ins + del) /
           static_cast<double>(ref_words > 0 ? ref_words : 1);
  }
  void Add(const WerCounts& o) {
    sub += o.sub;
    ins += o.ins;
    del += o.del;
    ref_words += o.ref_words;
  }
  bool operator==(const WerCounts&) const = default;
};

// Scores one utterance after UC normalization of both sides.
WerCounts ScoreNormalized(const std::string& ref_text,
                          const std::string& hyp_text);

// Scores raw text (whitespace words, no normalization).
WerCounts ScoreRaw(const std::string& ref_text, const std::string& hyp_text);

// Fraction of rare reference tokens (after UC normalization, lowercased)
// that the alignment fails to match exactly.  Absent when the references
// contain no rare tokens.
std::optional<double> RareWordErrorRate(
    const std::vector<std::string>& ref_texts,
    const std::vector<std::string>& hyp_texts, const RareWordSet& rare_set);

// Casing/punctuation accuracy: among aligned word pairs whose UC-normalized
// forms match, the fraction whose raw written forms match exactly.  Absent
// when nothing aligns.
std::optional<double> CasingPunctAccuracy(
    const std::vector<std::string>& ref_texts,
    const std::vector<std::string>& hyp_texts);

}  // namespace ctxasr
