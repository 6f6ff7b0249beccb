// src/report.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/report.h"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctxasr/tensor.h"
#include "json.hpp"

namespace ctxasr {

namespace {

using nlohmann::json;

json ConditionToJson(const ConditionResult& c) {
  json j;
  j["sub"] = c.counts.sub;
  j["ins"] = c.counts.ins;
  j["del"] = c.counts.del;
  j["ref_words"] = c.counts.ref_words;
  j["wer"] = c.Wer();
  if (c.raw_wer) j["raw_wer"] = *c.raw_wer;
  if (c.rare_word_error_rate) {
    j["rare_word_error_rate"] = *c.rare_word_error_rate;
  }
  if (c.casing_punct_accuracy) {
    j["casing_punct_accuracy"] = *c.casing_punct_accuracy;
  }
  return j;
}

ConditionResult ConditionFromJson(const json& j) {
  ConditionResult c;
  c.counts.sub = j.at("sub").get<int64_t>();
  c.counts.ins = j.at("ins").get<int64_t>();
  c.counts.del = j.at("del").get<int64_t>();
  c.counts.ref_words = j.at("ref_words").get<int64_t>();
  if (j.contains("raw_wer")) c.raw_wer = j.at("raw_wer").get<double>();
  if (j.contains("rare_word_error_rate")) {
    c.rare_word_error_rate = j.at("rare_word_error_rate").get<double>();
  }
  if (j.contains("casing_punct_accuracy")) {
    c.casing_punct_accuracy = j.at("casing_punct_accuracy").get<double>();
  }
  return c;
}

}  // namespace

std::string ReportToJson(const EvalReport& report) {
  json j;
  j["kind"] = "ctxasr-report";
  j["version"] = 1;
  j["protocol"] = report.protocol;
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["model"] = report.model;
  json conds;
  for (const auto& [name, c] : report.conditions) {
    conds[name] = ConditionToJson(c);
  }
  j["conditions"] = std::move(conds);
  return j.dump(2);
}

EvalReport ReportFromJson(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || j.value("kind", "") != "ctxasr-report") {
    throw ContractError("ReportFromJson: not a report");
  }
  EvalReport r;
  r.protocol = j.at("protocol").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.model = j.at("model").get<std::string>();
  for (const auto& [name, cj] : j.at("conditions").items()) {
    r.conditions[name] = ConditionFromJson(cj);
  }
  return r;
}

void SaveReport(const std::string& path, const EvalReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ContractError("SaveReport: cannot open " + path);
  os << ReportToJson(report) << "\n";
  if (!os) throw ContractError("SaveReport: write failed for " + path);
}

EvalReport LoadReport(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("LoadReport: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ReportFromJson(ss.str());
}

void WriteLongformCsv(const std::string& path,
                      const std::vector<LongformCsvRow>& rows,
                      const std::string& config_hash, uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ContractError("WriteLongformCsv: cannot open " + path);
  char head[128];
  std::snprintf(head, sizeof(head), "# meta config_hash=%s seed=%" PRIu64,
                config_hash.c_str(), seed);
  os << head << "\n";
  os << "K,mode,wer\n";
  for (const LongformCsvRow& r : rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%s,%.6f", r.k, r.mode.c_str(),
                  r.wer);
    os << line << "\n";
  }
  if (!os) throw ContractError("WriteLongformCsv: write failed for " + path);
}

std::vector<LongformCsvRow> ReadLongformCsv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("ReadLongformCsv: cannot open " + path);
  std::vector<LongformCsvRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "K,mode,wer") {
        throw ContractError("ReadLongformCsv: bad header in " + path);
      }
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    std::string k_str, mode, wer_str;
    if (!std::getline(ls, k_str, ',') || !std::getline(ls, mode, ',') ||
        !std::getline(ls, wer_str)) {
      throw ContractError("ReadLongformCsv: bad row in " + path);
    }
    rows.push_back({std::stoi(k_str), mode, std::stod(wer_str)});
  }
  if (!header_seen) {
    throw ContractError("ReadLongformCsv: missing header in " + path);
  }
  return rows;
}

}  // namespace ctxasr
