// tests/test_bpe.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/bpe.h"

#include <cstdio>
#include <string>
#include <vector>

#include "ctxasr/rng.h"
#include "ctxasr/tensor.h"
#include "doctest.h"

namespace ctxasr {
namespace {

TEST_CASE("bpe base model has 260 tokens and no merges") {
  BpeModel m;
  CHECK(m.vocab_size() == 260);
  CHECK(m.merges().empty());
  CHECK(m.TokenBytes(BpeModel::kBlankId) == "");
  CHECK(m.TokenBytes(BpeModel::kByteBase + 'a') == "a");
}

TEST_CASE("bpe split pieces attaches spaces to the following word") {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& p : v) s += p;
    return s;
  };
  CHECK(BpeModel::SplitPieces("a b") ==
        std::vector<std::string>{"a", " b"});
  CHECK(BpeModel::SplitPieces(" lead") == std::vector<std::string>{" lead"});
  CHECK(BpeModel::SplitPieces("a  b") ==
        std::vector<std::string>{"a", " ", " b"});
  CHECK(BpeModel::SplitPieces("tail ") ==
        std::vector<std::string>{"tail", " "});
  for (const char* s : {"", "x", "  ", "one two three", " a  b "}) {
    CHECK(join(BpeModel::SplitPieces(s)) == s);
  }
}

TEST_CASE("bpe train on aaaa learns the (a,a) merge first") {
  BpeModel m = BpeModel::Train({"aaaa"}, 261);
  REQUIRE(m.merges().size() == 1);
  const int32_t a = BpeModel::kByteBase + 'a';
  CHECK(m.merges()[0] == std::pair<int32_t, int32_t>(a, a));
  CHECK(m.TokenBytes(260) == "aa");
  CHECK(m.Encode("aaaa") == std::vector<int32_t>{260, 260});
  CHECK(m.Decode({260, 260}) == "aaaa");
}

TEST_CASE("bpe train with base vocab size yields a pure byte model") {
  BpeModel m = BpeModel::Train({"hello world"}, 260);
  CHECK(m.merges().empty());
  const std::string s = "hello";
  std::vector<int32_t> ids = m.Encode(s);
  REQUIRE(ids.size() == s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(ids[i] == BpeModel::kByteBase + static_cast<int32_t>(s[i]));
  }
}

TEST_CASE("bpe train rejects bad inputs") {
  CHECK_THROWS_AS(BpeModel::Train({"x"}, 259), ContractError);
  CHECK_THROWS_AS(BpeModel::Train({}, 300), ContractError);
}

TEST_CASE("bpe stops early when no pair repeats") {
  // Every adjacent pair in "abc" occurs once; nothing merges.
  BpeModel m = BpeModel::Train({"abc"}, 300);
  CHECK(m.merges().empty());
}

TEST_CASE("bpe encode/decode identity on empty and unseen bytes") {
  BpeModel m = BpeModel::Train({"seen text only"}, 280);
  CHECK(m.Encode("") == std::vector<int32_t>{});
  CHECK(m.Decode({}) == "");
  const std::string unseen = "\x01\xff\xfe zz\x80q";
  std::vector<int32_t> ids = m.Encode(unseen);
  CHECK(m.Decode(ids) == unseen);
  CHECK_THROWS_AS(m.Decode({m.vocab_size()}), ContractError);
  CHECK_THROWS_AS(m.Decode({-1}), ContractError);
}

TEST_CASE("bpe round-trips 1000 random UTF-8 strings") {
  BpeModel m = BpeModel::Train(
      {"the quick brown fox jumps over the lazy dog",
       "pack my box with five dozen liquor jugs",
       "sphinx of black quartz judge my vow"},
      320);
  Rng rng(20260819);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    const int len = static_cast<int>(rng.uniform_int(0, 40));
    for (int i = 0; i < len; ++i) {
      // Mix ASCII with random multi-byte codepoints.
      const int kind = static_cast<int>(rng.uniform_int(0, 3));
      uint32_t cp = 0;
      if (kind == 0) {
        cp = static_cast<uint32_t>(rng.uniform_int(0x20, 0x7e));
      } else if (kind == 1) {
        cp = static_cast<uint32_t>(rng.uniform_int(0xa0, 0x7ff));
      } else if (kind == 2) {
        cp = static_cast<uint32_t>(rng.uniform_int(0x800, 0xffff));
        if (cp >= 0xd800 && cp <= 0xdfff) cp = 0x4e00;  // skip surrogates
      } else {
        cp = static_cast<uint32_t>(rng.uniform_int(0x10000, 0x10ffff));
      }
      if (cp < 0x80) {
        s.push_back(static_cast<char>(cp));
      } else if (cp < 0x800) {
        s.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
      } else if (cp < 0x10000) {
        s.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
      } else {
        s.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
      }
    }
    CHECK(m.Decode(m.Encode(s)) == s);
  }
}

TEST_CASE("bpe merges never cross piece boundaries") {
  // " a" repeats, but the space belongs to the following piece, so the
  // pair ('a', ' ') across "a b" never forms.
  BpeModel m = BpeModel::Train({"aa aa aa aa"}, 262);
  // A merged token may contain a space only at position 0 (the piece leader).
  for (int32_t id = BpeModel::kBaseVocab; id < m.vocab_size(); ++id) {
    const std::string& b = m.TokenBytes(id);
    CHECK(b.find(' ', 1) == std::string::npos);
  }
}

TEST_CASE("bpe save/load round-trip preserves behavior and meta") {
  BpeModel m = BpeModel::Train(
      {"red green blue red green blue red red green"}, 300);
  TokenizerMeta meta;
  meta.config_hash = "deadbeef01";
  meta.seed = 42;
  const std::string path = "bpe_roundtrip_test.txt";
  m.Save(path, meta);
  TokenizerMeta got;
  BpeModel loaded = BpeModel::Load(path, &got);
  CHECK(got.config_hash == "deadbeef01");
  CHECK(got.seed == 42);
  CHECK(got.version == "1");
  CHECK(loaded.vocab_size() == m.vocab_size());
  CHECK(loaded.merges() == m.merges());
  const std::string probe = "red green blue and something new";
  CHECK(loaded.Encode(probe) == m.Encode(probe));
  CHECK(loaded.Decode(loaded.Encode(probe)) == probe);
  std::remove(path.c_str());
  CHECK_THROWS_AS(BpeModel::Load("no_such_file_here.txt"), ContractError);
}

TEST_CASE("bpe training is deterministic") {
  const std::vector<std::string> corpus = {
      "alpha beta gamma alpha beta", "gamma gamma alpha beta beta"};
  BpeModel a = BpeModel::Train(corpus, 310);
  BpeModel b = BpeModel::Train(corpus, 310);
  CHECK(a.merges() == b.merges());
}

}  // namespace
}  // namespace ctxasr
