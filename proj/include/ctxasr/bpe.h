// include/ctxasr/bpe.h
//
// Copyright (c)  2026  ctxasr authors
//
// Byte-level BPE tokenizer with byte fallback.  The base vocabulary is four
// special ids followed by the 256 raw byte values; training appends merge
// tokens on top.  Any byte string therefore encodes losslessly and
// decode(encode(s)) == s holds for arbitrary input.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ctxasr {

struct TokenizerMeta {
  std::string version = "1";
  std::string config_hash;  // hex digest of the generating config
  uint64_t seed = 0;
};

class BpeModel {
 public:
  static constexpr int32_t kBlankId = 0;
  static constexpr int32_t kBosId = 1;
  static constexpr int32_t kMaskId = 2;
  static constexpr int32_t kPadId = 3;
  static constexpr int32_t kByteBase = 4;
  static constexpr int32_t kBaseVocab = 260;  // 4 specials + 256 bytes
  static constexpr int32_t kNumSpecials = 4;

  BpeModel();  // base vocabulary only, no merges

  // Learns (vocab_size - kBaseVocab) merges from the corpus by greedy
  // highest-frequency pair merging; frequency ties break on the smaller
  // (left, right) id pair.  Stops early if no pair occurs at least twice.
  // Requires vocab_size >= kBaseVocab.
  static BpeModel Train(const std::vector<std::string>& corpus,
                        int32_t vocab_size);

  std::vector<int32_t> Encode(const std::string& text) const;

  // Inverse of Encode.  Special ids decode to the empty string; ids outside
  // [0, vocab_size) raise ContractError.
  std::string Decode(const std::vector<int32_t>& ids) const;

  int32_t vocab_size() const {
    return kBaseVocab + static_cast<int32_t>(merges_.size());
  }
  const std::vector<std::pair<int32_t, int32_t>>& merges() const {
    return merges_;
  }
  // Byte expansion of one token ("" for specials).
  const std::string& TokenBytes(int32_t id) const;

  // Pre-tokenization: text is cut into pieces so that each whitespace byte
  // attaches to the word that follows it; merges never cross piece bounds.
  static std::vector<std::string> SplitPieces(const std::string& text);

  void Save(const std::string& path, const TokenizerMeta& meta) const;
  static BpeModel Load(const std::string& path, TokenizerMeta* meta = nullptr);

 private:
  void RebuildTables();
  std::vector<int32_t> EncodePiece(const std::string& piece) const;

  std::vector<std::pair<int32_t, int32_t>> merges_;
  // merge rank by pair, -1 when absent; see RebuildTables().
  std::vector<std::string> token_bytes_;
  std::vector<std::pair<std::pair<int32_t, int32_t>, int32_t>> ranks_;
};

}  // namespace ctxasr
