// src/wer.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/wer.h"

#include <algorithm>

#include "ctxasr/tensor.h"
#include "ctxasr/textnorm.h"

namespace ctxasr {

Alignment AlignWords(const std::vector<std::string>& ref,
                     const std::vector<std::string>& hyp) {
  const size_t n = ref.size();
  const size_t m = hyp.size();
  // cost[i][j]: edits aligning ref[0..i) with hyp[0..j).
  std::vector<std::vector<int32_t>> cost(n + 1,
                                         std::vector<int32_t>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<int32_t>(i);
  for (size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<int32_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int32_t diag = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int32_t del = cost[i - 1][j] + 1;
      const int32_t ins = cost[i][j - 1] + 1;
      cost[i][j] = std::min(diag, std::min(del, ins));
    }
  }
  // Backtrace with a fixed preference: diagonal, then deletion, then
  // insertion — this pins the S/I/D split when ties exist.
  Alignment out;
  size_t i = n, j = m;
  std::vector<AlignedPair> rev;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const int32_t step = (ref[i - 1] == hyp[j - 1]) ? 0 : 1;
      if (cost[i][j] == cost[i - 1][j - 1] + step) {
        rev.push_back({static_cast<int32_t>(i - 1), static_cast<int32_t>(j - 1)});
        if (step == 1) ++out.counts.sub;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      rev.push_back({static_cast<int32_t>(i - 1), -1});
      ++out.counts.del;
      --i;
      continue;
    }
    rev.push_back({-1, static_cast<int32_t>(j - 1)});
    ++out.counts.ins;
    --j;
  }
  out.pairs.assign(rev.rbegin(), rev.rend());
  return out;
}

EditCounts EditDistance(const std::vector<std::string>& ref,
                        const std::vector<std::string>& hyp) {
  return AlignWords(ref, hyp).counts;
}

WerCounts ScoreNormalized(const std::string& ref_text,
                          const std::string& hyp_text) {
  return ScoreRaw(NormalizeUc(ref_text), NormalizeUc(hyp_text));
}

WerCounts ScoreRaw(const std::string& ref_text, const std::string& hyp_text) {
  const std::vector<std::string> ref = SplitWords(ref_text);
  const std::vector<std::string> hyp = SplitWords(hyp_text);
  const EditCounts c = EditDistance(ref, hyp);
  WerCounts w;
  w.sub = c.sub;
  w.ins = c.ins;
  w.del = c.del;
  w.ref_words = static_cast<int64_t>(ref.size());
  return w;
}

std::optional<double> RareWordErrorRate(
    const std::vector<std::string>& ref_texts,
    const std::vector<std::string>& hyp_texts, const RareWordSet& rare_set) {
  if (ref_texts.size() != hyp_texts.size()) {
    throw ContractError("RareWordErrorRate: ref/hyp size mismatch");
  }
  int64_t total = 0;
  int64_t wrong = 0;
  for (size_t u = 0; u < ref_texts.size(); ++u) {
    const std::vector<std::string> ref = SplitWords(NormalizeUc(ref_texts[u]));
    const std::vector<std::string> hyp = SplitWords(NormalizeUc(hyp_texts[u]));
    const Alignment a = AlignWords(ref, hyp);
    for (const AlignedPair& p : a.pairs) {
      if (p.ref_idx < 0) continue;
      const std::string low = ToLowerAscii(ref[static_cast<size_t>(p.ref_idx)]);
      if (!rare_set.Contains(low)) continue;
      ++total;
      const bool matched =
          p.hyp_idx >= 0 &&
          hyp[static_cast<size_t>(p.hyp_idx)] == ref[static_cast<size_t>(p.ref_idx)];
      if (!matched) ++wrong;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(wrong) / static_cast<double>(total);
}

std::optional<double> CasingPunctAccuracy(
    const std::vector<std::string>& ref_texts,
    const std::vector<std::string>& hyp_texts) {
  if (ref_texts.size() != hyp_texts.size()) {
    throw ContractError("CasingPunctAccuracy: ref/hyp size mismatch");
  }
  int64_t matched = 0;
  int64_t exact = 0;
  for (size_t u = 0; u < ref_texts.size(); ++u) {
    // Raw words paired with their normalized forms; words that normalize to
    // nothing (pure punctuation) are skipped on both sides.
    auto keep = [](const std::string& text) {
      std::vector<std::pair<std::string, std::string>> out;  // (raw, norm)
      for (const std::string& w : SplitWords(text)) {
        std::string norm = NormalizeUc(w);
        if (!norm.empty()) out.emplace_back(w, std::move(norm));
      }
      return out;
    };
    const auto ref = keep(ref_texts[u]);
    const auto hyp = keep(hyp_texts[u]);
    std::vector<std::string> ref_norm, hyp_norm;
    for (const auto& [raw, norm] : ref) ref_norm.push_back(norm);
    for (const auto& [raw, norm] : hyp) hyp_norm.push_back(norm);
    const Alignment a = AlignWords(ref_norm, hyp_norm);
    for (const AlignedPair& p : a.pairs) {
      if (p.ref_idx < 0 || p.hyp_idx < 0) continue;
      if (ref_norm[static_cast<size_t>(p.ref_idx)] !=
          hyp_norm[static_cast<size_t>(p.hyp_idx)]) {
        continue;
      }
      ++matched;
      if (ref[static_cast<size_t>(p.ref_idx)].first ==
          hyp[static_cast<size_t>(p.hyp_idx)].first) {
        ++exact;
      }
    }
  }
  if (matched == 0) return std::nullopt;
  return static_cast<double>(exact) / static_cast<double>(matched);
}

}  // namespace ctxasr
