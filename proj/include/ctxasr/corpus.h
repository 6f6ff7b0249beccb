// include/ctxasr/corpus.h
//
// Copyright (c)  2026  ctxasr authors
//
// Deterministic synthetic corpus: topic-bound documents over a small
// invented lexicon with homophone pairs (identical acoustics, different
// written forms, disambiguable only via context), rare words (acoustically
// ε-close to a common twin) and casing/punctuation structure.  Text renders
// to pseudo-speech feature matrices on demand; nothing acoustic is stored.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxasr/rng.h"

namespace ctxasr {

struct CorpusConfig {
  int32_t num_train_docs = 200;
  int32_t num_dev_docs = 10;
  int32_t num_test_docs = 20;
  int32_t sentences_per_doc = 20;
  int32_t num_topics = 4;
  int32_t num_common_words = 22;     // plain lowercase content words
  int32_t num_apostrophe_words = 2;  // common words with an inner apostrophe
  int32_t num_proper_nouns = 8;      // always capitalized in written form
  int32_t num_homophone_pairs = 12;
  int32_t num_rare_words = 30;
  int32_t min_sentence_words = 4;
  int32_t max_sentence_words = 7;
  double rare_doc_prob = 0.55;       // train docs that carry rare words
  int32_t rares_per_doc = 2;         // rare vocabulary per rare train doc
  int32_t rares_per_eval_doc = 3;    // rare vocabulary per dev/test doc
  double rare_sentence_prob = 0.45;  // sentences of a rare doc using one
  double topic_word_prob = 0.55;     // sentences containing a homophone word
  double function_word_prob = 0.35;  // filler slots drawn from function words
  double comma_prob = 0.3;
  double question_prob = 0.15;
  int32_t feature_dim = 16;
  int32_t min_char_duration = 2;
  int32_t max_char_duration = 3;
  double noise_sigma = 0.08;
  double rare_distance = 0.25;  // per-frame offset norm for rare words
  int32_t dev_memo_utts = 50;   // training utterances echoed as dev_memo
};

struct LexWord {
  std::string written;   // canonical written form ("Kuvan", "o'ban", ...)
  std::string acoustic;  // uppercase rendering form (shared by homophones)
  int32_t topic = -1;    // -1 = usable in any topic
  bool is_proper = false;
  bool is_rare = false;
  int32_t twin = -1;     // lexicon index of the acoustically close common word
  int32_t rare_id = -1;  // dense id among rare words, -1 otherwise
};

struct Lexicon {
  std::vector<LexWord> words;
  std::vector<int32_t> function_ids;
  std::vector<int32_t> common_ids;  // plain + apostrophe + proper words
  std::vector<std::vector<int32_t>> topic_member_ids;  // homophones per topic
  std::vector<int32_t> rare_ids;
  std::map<std::string, int32_t> by_written;  // lowercased written -> index
  int32_t feature_dim = 0;
  // Base acoustic vector per rendering character (A-Z, apostrophe, space).
  std::map<char, std::vector<double>> char_vectors;
  // Unit offset direction per rare word; scaled by rare_distance at render.
  std::vector<std::vector<double>> rare_offsets;

  // Lookup by written form, case-insensitive.  -1 when absent.
  int32_t Find(const std::string& written_lower) const;
};

struct SynthUtterance {
  std::string utt_id;
  std::string doc_id;
  std::string split;
  int32_t topic = 0;
  std::string text_mcp;        // cased + punctuated reference
  std::string preceding_text;  // earlier MCP sentences of the same document
  std::vector<std::string> rare_words;  // lowercased written forms present
  uint64_t feature_seed = 0;
};

struct Corpus {
  Lexicon lexicon;
  std::vector<SynthUtterance> train;
  std::vector<SynthUtterance> dev;
  std::vector<SynthUtterance> test;
  std::vector<SynthUtterance> dev_memo;  // copies of early train utterances
};

struct FeatureMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> data;  // row-major
  double At(int64_t r, int64_t c) const { return data[r * cols + c]; }
};

struct JitterConfig {
  int32_t min_char_duration = 1;
  int32_t max_char_duration = 3;
  double noise_sigma = 0.08;
  double rare_distance = 0.25;
};

JitterConfig JitterFromConfig(const CorpusConfig& cfg);

// Builds the full corpus (lexicon + splits) from (cfg, seed) alone.
Corpus GenerateCorpus(const CorpusConfig& cfg, uint64_t seed);

// Renders UC-normalized text into a feature matrix.  Every word must be in
// the lexicon; rendering is a pure function of (lexicon, text, seed, jitter).
FeatureMatrix RenderFeatures(const Lexicon& lexicon, const std::string& uc_text,
                             uint64_t seed, const JitterConfig& jitter);

struct LongformSession {
  std::string doc_id;
  std::vector<int32_t> utt_indices;  // into corpus.test, document order
};

std::vector<LongformSession> BuildLongformTestset(const Corpus& corpus);

// JSONL persistence.  First line is a {"_meta": ...} record carrying
// (version, config_hash, seed); each further line is one utterance.
void SaveUtterances(const std::string& path,
                    const std::vector<SynthUtterance>& utts,
                    const std::string& config_hash, uint64_t seed);
std::vector<SynthUtterance> LoadUtterances(const std::string& path,
                                           std::string* config_hash = nullptr,
                                           uint64_t* seed = nullptr);

void SaveLexicon(const std::string& path, const Lexicon& lexicon,
                 const std::string& config_hash, uint64_t seed);
Lexicon LoadLexicon(const std::string& path);

}  // namespace ctxasr
