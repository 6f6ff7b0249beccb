// src/bpe.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/bpe.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "ctxasr/tensor.h"

namespace ctxasr {

BpeModel::BpeModel() { RebuildTables(); }

void BpeModel::RebuildTables() {
  token_bytes_.assign(static_cast<size_t>(vocab_size()), std::string());
  for (int32_t b = 0; b < 256; ++b) {
    token_bytes_[static_cast<size_t>(kByteBase + b)] =
        std::string(1, static_cast<char>(static_cast<unsigned char>(b)));
  }
  ranks_.clear();
  ranks_.reserve(merges_.size());
  for (size_t r = 0; r < merges_.size(); ++r) {
    const auto& m = merges_[r];
    const int32_t id = kBaseVocab + static_cast<int32_t>(r);
    if (m.first < kByteBase || m.first >= id || m.second < kByteBase ||
        m.second >= id) {
      throw ContractError("BpeModel: merge references an invalid token id");
    }
    token_bytes_[static_cast<size_t>(id)] =
        token_bytes_[static_cast<size_t>(m.first)] +
        token_bytes_[static_cast<size_t>(m.second)];
    ranks_.emplace_back(m, static_cast<int32_t>(r));
  }
  std::sort(ranks_.begin(), ranks_.end());
}

const std::string& BpeModel::TokenBytes(int32_t id) const {
  if (id < 0 || id >= vocab_size()) {
    throw ContractError("BpeModel::TokenBytes: id out of range");
  }
  return token_bytes_[static_cast<size_t>(id)];
}

std::vector<std::string> BpeModel::SplitPieces(const std::string& text) {
  std::vector<std::string> pieces;
  const size_t n = text.size();
  size_t i = 0;
  while (i < n) {
    const size_t start = i;
    if (text[i] == ' ') {
      ++i;
      if (i < n && text[i] != ' ') {
        while (i < n && text[i] != ' ') ++i;
      }
    } else {
      while (i < n && text[i] != ' ') ++i;
    }
    pieces.emplace_back(text.substr(start, i - start));
  }
  return pieces;
}

namespace {

std::vector<int32_t> ByteIds(const std::string& piece) {
  std::vector<int32_t> ids;
  ids.reserve(piece.size());
  for (char c : piece) {
    ids.push_back(BpeModel::kByteBase +
                  static_cast<int32_t>(static_cast<unsigned char>(c)));
  }
  return ids;
}

// Replaces every (l, r) occurrence with merged, scanning left to right.
void ApplyMerge(std::vector<int32_t>& toks, int32_t l, int32_t r,
                int32_t merged) {
  size_t w = 0;
  for (size_t i = 0; i < toks.size();) {
    if (i + 1 < toks.size() && toks[i] == l && toks[i + 1] == r) {
      toks[w++] = merged;
      i += 2;
    } else {
      toks[w++] = toks[i++];
    }
  }
  toks.resize(w);
}

}  // namespace

BpeModel BpeModel::Train(const std::vector<std::string>& corpus,
                         int32_t vocab_size) {
  if (vocab_size < kBaseVocab) {
    throw ContractError("BpeModel::Train: vocab_size below base vocabulary");
  }
  if (corpus.empty()) {
    throw ContractError("BpeModel::Train: empty corpus");
  }
  // Deterministic piece inventory: counts keyed by piece string.
  std::map<std::string, int64_t> piece_counts;
  for (const std::string& text : corpus) {
    for (std::string& p : SplitPieces(text)) piece_counts[std::move(p)] += 1;
  }
  struct Entry {
    std::vector<int32_t> toks;
    int64_t count;
  };
  std::vector<Entry> entries;
  entries.reserve(piece_counts.size());
  for (const auto& [piece, count] : piece_counts) {
    entries.push_back({ByteIds(piece), count});
  }

  BpeModel model;
  int32_t next_id = kBaseVocab;
  while (next_id < vocab_size) {
    std::map<std::pair<int32_t, int32_t>, int64_t> freq;
    for (const Entry& e : entries) {
      for (size_t i = 0; i + 1 < e.toks.size(); ++i) {
        freq[{e.toks[i], e.toks[i + 1]}] += e.count;
      }
    }
    std::pair<int32_t, int32_t> best{-1, -1};
    int64_t best_count = 0;
    for (const auto& [pair, count] : freq) {
      if (count > best_count) {  // ties keep the smaller id pair
        best_count = count;
        best = pair;
      }
    }
    if (best_count < 2) break;
    model.merges_.push_back(best);
    for (Entry& e : entries) {
      ApplyMerge(e.toks, best.first, best.second, next_id);
    }
    ++next_id;
  }
  model.RebuildTables();
  return model;
}

std::vector<int32_t> BpeModel::EncodePiece(const std::string& piece) const {
  std::vector<int32_t> toks = ByteIds(piece);
  if (ranks_.empty()) return toks;
  for (;;) {
    int32_t best_rank = -1;
    std::pair<int32_t, int32_t> best{-1, -1};
    for (size_t i = 0; i + 1 < toks.size(); ++i) {
      const std::pair<int32_t, int32_t> key{toks[i], toks[i + 1]};
      auto it = std::lower_bound(
          ranks_.begin(), ranks_.end(), key,
          [](const auto& a, const auto& k) { return a.first < k; });
      if (it != ranks_.end() && it->first == key &&
          (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best = key;
      }
    }
    if (best_rank < 0) break;
    ApplyMerge(toks, best.first, best.second, kBaseVocab + best_rank);
  }
  return toks;
}

std::vector<int32_t> BpeModel::Encode(const std::string& text) const {
  std::vector<int32_t> ids;
  for (const std::string& piece : SplitPieces(text)) {
    std::vector<int32_t> part = EncodePiece(piece);
    ids.insert(ids.end(), part.begin(), part.end());
  }
  return ids;
}

std::string BpeModel::Decode(const std::vector<int32_t>& ids) const {
  std::string out;
  for (int32_t id : ids) {
    if (id < 0 || id >= vocab_size()) {
      throw ContractError("BpeModel::Decode: id out of range");
    }
    out += token_bytes_[static_cast<size_t>(id)];
  }
  return out;
}

void BpeModel::Save(const std::string& path, const TokenizerMeta& meta) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ContractError("BpeModel::Save: cannot open " + path);
  os << "ctxasr bpe model\n";
  os << "version " << (meta.version.empty() ? "1" : meta.version) << "\n";
  os << "config_hash " << (meta.config_hash.empty() ? "-" : meta.config_hash)
     << "\n";
  os << "seed " << meta.seed << "\n";
  os << "vocab " << vocab_size() << "\n";
  os << "merges " << merges_.size() << "\n";
  for (const auto& [l, r] : merges_) os << l << " " << r << "\n";
  if (!os) throw ContractError("BpeModel::Save: write failed for " + path);
}

BpeModel BpeModel::Load(const std::string& path, TokenizerMeta* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("BpeModel::Load: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "ctxasr bpe model") {
    throw ContractError("BpeModel::Load: bad header in " + path);
  }
  auto expect_kv = [&](const std::string& key) {
    if (!std::getline(is, line)) {
      throw ContractError("BpeModel::Load: truncated file " + path);
    }
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    if (k != key || v.empty()) {
      throw ContractError("BpeModel::Load: expected '" + key + "' line");
    }
    return v;
  };
  TokenizerMeta m;
  m.version = expect_kv("version");
  m.config_hash = expect_kv("config_hash");
  if (m.config_hash == "-") m.config_hash.clear();
  m.seed = std::stoull(expect_kv("seed"));
  const int64_t vocab = std::stoll(expect_kv("vocab"));
  const int64_t n_merges = std::stoll(expect_kv("merges"));
  if (n_merges < 0 || vocab != kBaseVocab + n_merges) {
    throw ContractError("BpeModel::Load: inconsistent vocab/merges counts");
  }
  BpeModel model;
  model.merges_.reserve(static_cast<size_t>(n_merges));
  for (int64_t i = 0; i < n_merges; ++i) {
    int32_t l = 0, r = 0;
    if (!(is >> l >> r)) {
      throw ContractError("BpeModel::Load: truncated merge list");
    }
    model.merges_.emplace_back(l, r);
  }
  model.RebuildTables();
  if (meta != nullptr) *meta = m;
  return model;
}

}  // namespace ctxasr
