// include/ctxasr/report.h
//
// Copyright (c)  2026  ctxasr authors
//
// Evaluation report: named conditions with WER counts plus the optional
// rare-word/casing metrics; serialized as JSON, long-form curves also as
// a small CSV for plotting.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxasr/wer.h"

namespace ctxasr {

struct ConditionResult {
  WerCounts counts;
  std::optional<double> raw_wer;  // un-normalized scoring, when meaningful
  std::optional<double> rare_word_error_rate;
  std::optional<double> casing_punct_accuracy;
  bool operator==(const ConditionResult&) const = default;
  double Wer() const { return counts.Wer(); }
};

struct EvalReport {
  std::string protocol;  // "context" | "biasing" | "longform"
  std::string config_hash;
  uint64_t seed = 0;
  std::string model;  // checkpoint path or label
  // Keyed by condition name, e.g. "no-prompt", "oracle-context:mcp",
  // "N=20", "no-list", "K=4:oracle".
  std::map<std::string, ConditionResult> conditions;
  bool operator==(const EvalReport&) const = default;
};

std::string ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(const std::string& text);

void SaveReport(const std::string& path, const EvalReport& report);
EvalReport LoadReport(const std::string& path);

struct LongformCsvRow {
  int32_t k = 0;
  std::string mode;  // "decoded" | "oracle"
  double wer = 0.0;
};

// CSV with a leading "# meta ..." comment and a "K,mode,wer" header.
void WriteLongformCsv(const std::string& path,
                      const std::vector<LongformCsvRow>& rows,
                      const std::string& config_hash, uint64_t seed);
std::vector<LongformCsvRow> ReadLongformCsv(const std::string& path);

}  // namespace ctxasr
