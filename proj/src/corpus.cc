// src/corpus.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ctxasr/tensor.h"
#include "ctxasr/textnorm.h"
#include "json.hpp"

namespace ctxasr {

namespace {

using nlohmann::json;

// Fixed derivation tags for independent random streams.
constexpr uint64_t kTagChars = 101;
constexpr uint64_t kTagWords = 102;
constexpr uint64_t kTagOffsets = 103;
constexpr uint64_t kTagDocBase = 1000;

const char* const kFunctionWords[] = {"the", "a",  "of", "and",
                                      "to",  "in", "is", "was"};
constexpr int32_t kNumFunctionWords = 8;

const char kConsonants[] = "bdfgklmnprstvz";
const char kVowels[] = "aeiou";
const char kRenderAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ' ";

std::string MakeSyllable(Rng& rng) {
  std::string s;
  s.push_back(kConsonants[rng.uniform_int(0, 13)]);
  s.push_back(kVowels[rng.uniform_int(0, 4)]);
  if (rng.bernoulli(0.25)) s.push_back(kConsonants[rng.uniform_int(0, 13)]);
  return s;
}

std::string MakeWordShape(Rng& rng, int32_t min_syll, int32_t max_syll) {
  const int32_t n = static_cast<int32_t>(rng.uniform_int(min_syll, max_syll));
  std::string w;
  for (int32_t i = 0; i < n; ++i) w += MakeSyllable(rng);
  return w;
}

std::string ToUpperAscii(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string Capitalize(const std::string& s) {
  std::string out = s;
  if (!out.empty()) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

// Distinct written form with the same letter count (acoustics are attached
// to the word, not its spelling, so any distinct spelling works).
std::string MutateSpelling(const std::string& w, Rng& rng) {
  std::string out = w;
  for (int attempt = 0; attempt < 32; ++attempt) {
    const size_t pos =
        static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(w.size()) - 1));
    const char repl = "ybwjxq"[rng.uniform_int(0, 5)];
    if (out[pos] != repl) {
      out[pos] = repl;
      if (out != w) return out;
    }
    out = w;
  }
  return w + "x";
}

void ValidateConfig(const CorpusConfig& cfg) {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw ContractError(std::string("CorpusConfig: ") + what);
  };
  check(cfg.num_train_docs > 0, "num_train_docs must be positive");
  check(cfg.num_dev_docs >= 0, "num_dev_docs must be non-negative");
  check(cfg.num_test_docs > 0, "num_test_docs must be positive");
  check(cfg.sentences_per_doc > 0, "sentences_per_doc must be positive");
  check(cfg.num_topics >= 2, "need at least two topics");
  check(cfg.num_common_words > 0, "num_common_words must be positive");
  check(cfg.num_apostrophe_words >= 0 && cfg.num_proper_nouns >= 0,
        "word counts must be non-negative");
  check(cfg.num_homophone_pairs >= 0, "num_homophone_pairs non-negative");
  check(cfg.num_rare_words >= 0, "num_rare_words non-negative");
  check(cfg.min_sentence_words >= 2, "min_sentence_words too small");
  check(cfg.max_sentence_words >= cfg.min_sentence_words,
        "max_sentence_words below min");
  for (double p : {cfg.rare_doc_prob, cfg.rare_sentence_prob,
                   cfg.topic_word_prob, cfg.function_word_prob, cfg.comma_prob,
                   cfg.question_prob}) {
    check(p >= 0.0 && p <= 1.0, "probabilities must lie in [0, 1]");
  }
  check(cfg.rares_per_doc >= 0 && cfg.rares_per_doc <= cfg.num_rare_words,
        "rares_per_doc exceeds rare vocabulary");
  check(cfg.rares_per_eval_doc >= 0 &&
            cfg.rares_per_eval_doc <= cfg.num_rare_words,
        "rares_per_eval_doc exceeds rare vocabulary");
  check(cfg.feature_dim > 0, "feature_dim must be positive");
  check(cfg.min_char_duration >= 1, "min_char_duration must be >= 1");
  check(cfg.max_char_duration >= cfg.min_char_duration,
        "max_char_duration below min");
  check(cfg.noise_sigma >= 0.0, "noise_sigma must be non-negative");
  check(cfg.rare_distance >= 0.0, "rare_distance must be non-negative");
  check(cfg.dev_memo_utts >= 0, "dev_memo_utts must be non-negative");
}

Lexicon BuildLexicon(const CorpusConfig& cfg, const Rng& master) {
  Lexicon lex;
  lex.feature_dim = cfg.feature_dim;
  std::set<std::string> used;
  auto add_word = [&](LexWord w) {
    const std::string key = ToLowerAscii(w.written);
    if (used.count(key)) {
      throw ContractError("BuildLexicon: duplicate word " + key);
    }
    used.insert(key);
    lex.by_written[key] = static_cast<int32_t>(lex.words.size());
    lex.words.push_back(std::move(w));
    return static_cast<int32_t>(lex.words.size() - 1);
  };
  auto fresh_shape = [&](Rng& rng, int32_t min_syll, int32_t max_syll) {
    for (;;) {
      std::string w = MakeWordShape(rng, min_syll, max_syll);
      if (!used.count(w)) return w;
    }
  };

  Rng wrng = master.derive(kTagWords);

  for (int32_t i = 0; i < kNumFunctionWords; ++i) {
    LexWord w;
    w.written = kFunctionWords[i];
    w.acoustic = ToUpperAscii(w.written);
    lex.function_ids.push_back(add_word(std::move(w)));
  }
  std::vector<int32_t> plain_ids;
  for (int32_t i = 0; i < cfg.num_common_words; ++i) {
    LexWord w;
    w.written = fresh_shape(wrng, 2, 3);
    w.acoustic = ToUpperAscii(w.written);
    const int32_t id = add_word(std::move(w));
    plain_ids.push_back(id);
    lex.common_ids.push_back(id);
  }
  for (int32_t i = 0; i < cfg.num_apostrophe_words; ++i) {
    for (;;) {
      const std::string a = MakeSyllable(wrng);
      const std::string b = MakeSyllable(wrng);
      const std::string w = a + "'" + b;
      if (used.count(w)) continue;
      LexWord lw;
      lw.written = w;
      lw.acoustic = ToUpperAscii(w);
      lex.common_ids.push_back(add_word(std::move(lw)));
      break;
    }
  }
  for (int32_t i = 0; i < cfg.num_proper_nouns; ++i) {
    LexWord w;
    const std::string shape = fresh_shape(wrng, 2, 3);
    w.written = Capitalize(shape);
    w.acoustic = ToUpperAscii(shape);
    w.is_proper = true;
    lex.common_ids.push_back(add_word(std::move(w)));
  }

  lex.topic_member_ids.assign(static_cast<size_t>(cfg.num_topics), {});
  for (int32_t p = 0; p < cfg.num_homophone_pairs; ++p) {
    const std::string shape = fresh_shape(wrng, 2, 3);
    const std::string acoustic = ToUpperAscii(shape);
    std::string alt = MutateSpelling(shape, wrng);
    while (used.count(alt)) alt = MutateSpelling(shape, wrng);
    const int32_t topic_a = p % cfg.num_topics;
    const int32_t topic_b = (p + 1) % cfg.num_topics;
    LexWord a;
    a.written = shape;
    a.acoustic = acoustic;
    a.topic = topic_a;
    lex.topic_member_ids[static_cast<size_t>(topic_a)].push_back(
        add_word(std::move(a)));
    LexWord b;
    b.written = alt;
    b.acoustic = acoustic;  // identical rendering: true homophones
    b.topic = topic_b;
    lex.topic_member_ids[static_cast<size_t>(topic_b)].push_back(
        add_word(std::move(b)));
  }

  Rng orng = master.derive(kTagOffsets);
  for (int32_t i = 0; i < cfg.num_rare_words; ++i) {
    LexWord w;
    w.written = fresh_shape(wrng, 3, 3);
    w.is_rare = true;
    w.rare_id = i;
    w.twin = plain_ids[static_cast<size_t>(i) % plain_ids.size()];
    // Rare words borrow their twin's acoustics; a per-word offset applied at
    // render time keeps them ε-separable.
    w.acoustic = lex.words[static_cast<size_t>(w.twin)].acoustic;
    lex.rare_ids.push_back(add_word(std::move(w)));
    std::vector<double> dir(static_cast<size_t>(cfg.feature_dim));
    double norm = 0.0;
    for (double& x : dir) {
      x = orng.gaussian();
      norm += x * x;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (double& x : dir) x /= norm;
    lex.rare_offsets.push_back(std::move(dir));
  }

  Rng crng = master.derive(kTagChars);
  for (const char* c = kRenderAlphabet; *c != '\0'; ++c) {
    std::vector<double> v(static_cast<size_t>(cfg.feature_dim));
    double norm = 0.0;
    for (double& x : v) {
      x = crng.gaussian();
      norm += x * x;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (double& x : v) x /= norm;
    lex.char_vectors[*c] = std::move(v);
  }
  return lex;
}

struct DocPlan {
  std::string split;
  int32_t index = 0;
  int32_t topic = 0;
  std::vector<int32_t> rare_word_ids;  // lexicon indices
};

std::vector<SynthUtterance> GenerateDoc(const CorpusConfig& cfg,
                                        const Lexicon& lex, const DocPlan& plan,
                                        Rng doc_rng) {
  std::vector<SynthUtterance> utts;
  std::string preceding;
  char doc_id[64];
  std::snprintf(doc_id, sizeof(doc_id), "%s-doc-%04d", plan.split.c_str(),
                plan.index);
  const auto& topic_members =
      lex.topic_member_ids[static_cast<size_t>(plan.topic)];
  for (int32_t s = 0; s < cfg.sentences_per_doc; ++s) {
    const int32_t n_words = static_cast<int32_t>(
        doc_rng.uniform_int(cfg.min_sentence_words, cfg.max_sentence_words));
    std::vector<int32_t> ids(static_cast<size_t>(n_words), -1);
    for (int32_t i = 0; i < n_words; ++i) {
      if (doc_rng.bernoulli(cfg.function_word_prob)) {
        ids[static_cast<size_t>(i)] = lex.function_ids[static_cast<size_t>(
            doc_rng.uniform_int(0, static_cast<int64_t>(lex.function_ids.size()) - 1))];
      } else {
        ids[static_cast<size_t>(i)] = lex.common_ids[static_cast<size_t>(
            doc_rng.uniform_int(0, static_cast<int64_t>(lex.common_ids.size()) - 1))];
      }
    }
    // Topic-revealing homophone member.
    int32_t homophone_slot = -1;
    if (!topic_members.empty() && doc_rng.bernoulli(cfg.topic_word_prob)) {
      homophone_slot =
          static_cast<int32_t>(doc_rng.uniform_int(0, n_words - 1));
      ids[static_cast<size_t>(homophone_slot)] =
          topic_members[static_cast<size_t>(doc_rng.uniform_int(
              0, static_cast<int64_t>(topic_members.size()) - 1))];
    }
    // Document-sticky rare word.
    if (!plan.rare_word_ids.empty() &&
        doc_rng.bernoulli(cfg.rare_sentence_prob)) {
      int32_t slot = static_cast<int32_t>(doc_rng.uniform_int(0, n_words - 1));
      if (slot == homophone_slot) slot = (slot + 1) % n_words;
      ids[static_cast<size_t>(slot)] =
          plan.rare_word_ids[static_cast<size_t>(doc_rng.uniform_int(
              0, static_cast<int64_t>(plan.rare_word_ids.size()) - 1))];
    }

    // Assemble the MCP sentence.
    std::vector<std::string> forms;
    forms.reserve(static_cast<size_t>(n_words));
    std::vector<std::string> rare_present;
    for (int32_t i = 0; i < n_words; ++i) {
      const LexWord& w = lex.words[static_cast<size_t>(ids[static_cast<size_t>(i)])];
      std::string form = w.written;
      if (i == 0) form = Capitalize(form);
      forms.push_back(std::move(form));
      if (w.is_rare) rare_present.push_back(ToLowerAscii(w.written));
    }
    if (n_words >= 4 && doc_rng.bernoulli(cfg.comma_prob)) {
      const int32_t after =
          static_cast<int32_t>(doc_rng.uniform_int(1, n_words - 2));
      forms[static_cast<size_t>(after)] += ",";
    }
    std::string text = JoinWords(forms);
    text += doc_rng.bernoulli(cfg.question_prob) ? "?" : ".";
    std::sort(rare_present.begin(), rare_present.end());
    rare_present.erase(std::unique(rare_present.begin(), rare_present.end()),
                       rare_present.end());

    SynthUtterance u;
    char utt_id[80];
    std::snprintf(utt_id, sizeof(utt_id), "%s-%04d-%02d", plan.split.c_str(),
                  plan.index, s);
    u.utt_id = utt_id;
    u.doc_id = doc_id;
    u.split = plan.split;
    u.topic = plan.topic;
    u.text_mcp = text;
    u.preceding_text = preceding;
    u.rare_words = std::move(rare_present);
    u.feature_seed = doc_rng.next();
    if (!preceding.empty()) preceding += " ";
    preceding += text;
    utts.push_back(std::move(u));
  }
  return utts;
}

}  // namespace

int32_t Lexicon::Find(const std::string& written_lower) const {
  auto it = by_written.find(written_lower);
  return it == by_written.end() ? -1 : it->second;
}

JitterConfig JitterFromConfig(const CorpusConfig& cfg) {
  JitterConfig j;
  j.min_char_duration = cfg.min_char_duration;
  j.max_char_duration = cfg.max_char_duration;
  j.noise_sigma = cfg.noise_sigma;
  j.rare_distance = cfg.rare_distance;
  return j;
}

Corpus GenerateCorpus(const CorpusConfig& cfg, uint64_t seed) {
  ValidateConfig(cfg);
  Rng master(seed);
  Corpus corpus;
  corpus.lexicon = BuildLexicon(cfg, master);

  int32_t rare_cursor = 0;
  auto next_rares = [&](int32_t count) {
    std::vector<int32_t> out;
    if (corpus.lexicon.rare_ids.empty()) return out;
    for (int32_t i = 0; i < count; ++i) {
      out.push_back(corpus.lexicon.rare_ids[static_cast<size_t>(
          rare_cursor % static_cast<int32_t>(corpus.lexicon.rare_ids.size()))]);
      ++rare_cursor;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };

  struct SplitSpec {
    const char* name;
    int32_t docs;
    std::vector<SynthUtterance>* sink;
    uint64_t tag;
    bool always_rare;
    int32_t rares;
  };
  SplitSpec specs[] = {
      {"train", cfg.num_train_docs, &corpus.train, kTagDocBase, false,
       cfg.rares_per_doc},
      {"dev", cfg.num_dev_docs, &corpus.dev, kTagDocBase * 2, true,
       cfg.rares_per_eval_doc},
      {"test", cfg.num_test_docs, &corpus.test, kTagDocBase * 3, true,
       cfg.rares_per_eval_doc},
  };
  for (const SplitSpec& spec : specs) {
    for (int32_t d = 0; d < spec.docs; ++d) {
      Rng doc_rng = master.derive(spec.tag + static_cast<uint64_t>(d));
      DocPlan plan;
      plan.split = spec.name;
      plan.index = d;
      plan.topic = d % cfg.num_topics;
      const bool use_rares =
          spec.always_rare || doc_rng.bernoulli(cfg.rare_doc_prob);
      if (use_rares) plan.rare_word_ids = next_rares(spec.rares);
      std::vector<SynthUtterance> utts =
          GenerateDoc(cfg, corpus.lexicon, plan, std::move(doc_rng));
      for (SynthUtterance& u : utts) spec.sink->push_back(std::move(u));
    }
  }
  const size_t memo =
      std::min(static_cast<size_t>(cfg.dev_memo_utts), corpus.train.size());
  for (size_t i = 0; i < memo; ++i) {
    SynthUtterance u = corpus.train[i];
    u.split = "dev_memo";
    corpus.dev_memo.push_back(std::move(u));
  }
  return corpus;
}

FeatureMatrix RenderFeatures(const Lexicon& lexicon, const std::string& uc_text,
                             uint64_t seed, const JitterConfig& jitter) {
  const std::vector<std::string> words = SplitWords(uc_text);
  if (words.empty()) {
    throw ContractError("RenderFeatures: empty text cannot be rendered");
  }
  if (jitter.min_char_duration < 1 ||
      jitter.max_char_duration < jitter.min_char_duration) {
    throw ContractError("RenderFeatures: bad duration range");
  }
  const int64_t f = lexicon.feature_dim;
  Rng rng(seed);
  FeatureMatrix fm;
  fm.cols = f;
  auto render_char = [&](char c, const std::vector<double>* offset) {
    auto it = lexicon.char_vectors.find(c);
    if (it == lexicon.char_vectors.end()) {
      throw ContractError(std::string("RenderFeatures: character '") + c +
                          "' outside the lexicon alphabet");
    }
    const std::vector<double>& base = it->second;
    const int32_t dur = static_cast<int32_t>(rng.uniform_int(
        jitter.min_char_duration, jitter.max_char_duration));
    for (int32_t d = 0; d < dur; ++d) {
      for (int64_t k = 0; k < f; ++k) {
        double x = base[static_cast<size_t>(k)];
        if (offset != nullptr) {
          x += jitter.rare_distance * (*offset)[static_cast<size_t>(k)];
        }
        if (jitter.noise_sigma > 0.0) x += jitter.noise_sigma * rng.gaussian();
        fm.data.push_back(x);
      }
      ++fm.rows;
    }
  };
  for (size_t w = 0; w < words.size(); ++w) {
    if (w > 0) render_char(' ', nullptr);
    const int32_t idx = lexicon.Find(ToLowerAscii(words[w]));
    if (idx < 0) {
      throw ContractError("RenderFeatures: word not in lexicon: " + words[w]);
    }
    const LexWord& lw = lexicon.words[static_cast<size_t>(idx)];
    const std::vector<double>* offset =
        lw.is_rare ? &lexicon.rare_offsets[static_cast<size_t>(lw.rare_id)]
                   : nullptr;
    for (char c : lw.acoustic) render_char(c, offset);
  }
  return fm;
}

std::vector<LongformSession> BuildLongformTestset(const Corpus& corpus) {
  std::vector<LongformSession> sessions;
  std::map<std::string, size_t> by_doc;
  for (size_t i = 0; i < corpus.test.size(); ++i) {
    const SynthUtterance& u = corpus.test[i];
    auto it = by_doc.find(u.doc_id);
    if (it == by_doc.end()) {
      by_doc[u.doc_id] = sessions.size();
      sessions.push_back({u.doc_id, {static_cast<int32_t>(i)}});
    } else {
      sessions[it->second].utt_indices.push_back(static_cast<int32_t>(i));
    }
  }
  return sessions;
}

void SaveUtterances(const std::string& path,
                    const std::vector<SynthUtterance>& utts,
                    const std::string& config_hash, uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ContractError("SaveUtterances: cannot open " + path);
  json meta;
  meta["_meta"] = {{"kind", "ctxasr-corpus"},
                   {"version", 1},
                   {"config_hash", config_hash},
                   {"seed", seed}};
  os << meta.dump() << "\n";
  for (const SynthUtterance& u : utts) {
    json j;
    j["utt_id"] = u.utt_id;
    j["doc_id"] = u.doc_id;
    j["split"] = u.split;
    j["topic"] = u.topic;
    j["text_mcp"] = u.text_mcp;
    j["preceding_text"] = u.preceding_text;
    j["rare_words"] = u.rare_words;
    j["feature_seed"] = u.feature_seed;
    os << j.dump() << "\n";
  }
  if (!os) throw ContractError("SaveUtterances: write failed for " + path);
}

std::vector<SynthUtterance> LoadUtterances(const std::string& path,
                                           std::string* config_hash,
                                           uint64_t* seed) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("LoadUtterances: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) {
    throw ContractError("LoadUtterances: empty file " + path);
  }
  json meta = json::parse(line, nullptr, false);
  if (meta.is_discarded() || !meta.contains("_meta") ||
      meta["_meta"].value("kind", "") != "ctxasr-corpus") {
    throw ContractError("LoadUtterances: missing _meta line in " + path);
  }
  if (config_hash != nullptr) {
    *config_hash = meta["_meta"].value("config_hash", "");
  }
  if (seed != nullptr) *seed = meta["_meta"].value("seed", uint64_t{0});
  std::vector<SynthUtterance> utts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ContractError("LoadUtterances: bad JSON line in " + path);
    }
    SynthUtterance u;
    u.utt_id = j.at("utt_id").get<std::string>();
    u.doc_id = j.at("doc_id").get<std::string>();
    u.split = j.at("split").get<std::string>();
    u.topic = j.at("topic").get<int32_t>();
    u.text_mcp = j.at("text_mcp").get<std::string>();
    u.preceding_text = j.at("preceding_text").get<std::string>();
    u.rare_words = j.at("rare_words").get<std::vector<std::string>>();
    u.feature_seed = j.at("feature_seed").get<uint64_t>();
    utts.push_back(std::move(u));
  }
  return utts;
}

void SaveLexicon(const std::string& path, const Lexicon& lexicon,
                 const std::string& config_hash, uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ContractError("SaveLexicon: cannot open " + path);
  json j;
  j["kind"] = "ctxasr-lexicon";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["feature_dim"] = lexicon.feature_dim;
  json words = json::array();
  for (const LexWord& w : lexicon.words) {
    words.push_back({{"written", w.written},
                     {"acoustic", w.acoustic},
                     {"topic", w.topic},
                     {"is_proper", w.is_proper},
                     {"is_rare", w.is_rare},
                     {"twin", w.twin},
                     {"rare_id", w.rare_id}});
  }
  j["words"] = std::move(words);
  j["function_ids"] = lexicon.function_ids;
  j["common_ids"] = lexicon.common_ids;
  j["topic_member_ids"] = lexicon.topic_member_ids;
  j["rare_ids"] = lexicon.rare_ids;
  json chars;
  for (const auto& [c, v] : lexicon.char_vectors) {
    chars[std::string(1, c)] = v;
  }
  j["char_vectors"] = std::move(chars);
  j["rare_offsets"] = lexicon.rare_offsets;
  os << j.dump(2) << "\n";
  if (!os) throw ContractError("SaveLexicon: write failed for " + path);
}

Lexicon LoadLexicon(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("LoadLexicon: cannot open " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded() || j.value("kind", "") != "ctxasr-lexicon") {
    throw ContractError("LoadLexicon: not a lexicon file: " + path);
  }
  Lexicon lex;
  lex.feature_dim = j.at("feature_dim").get<int32_t>();
  for (const json& wj : j.at("words")) {
    LexWord w;
    w.written = wj.at("written").get<std::string>();
    w.acoustic = wj.at("acoustic").get<std::string>();
    w.topic = wj.at("topic").get<int32_t>();
    w.is_proper = wj.at("is_proper").get<bool>();
    w.is_rare = wj.at("is_rare").get<bool>();
    w.twin = wj.at("twin").get<int32_t>();
    w.rare_id = wj.at("rare_id").get<int32_t>();
    lex.by_written[ToLowerAscii(w.written)] =
        static_cast<int32_t>(lex.words.size());
    lex.words.push_back(std::move(w));
  }
  lex.function_ids = j.at("function_ids").get<std::vector<int32_t>>();
  lex.common_ids = j.at("common_ids").get<std::vector<int32_t>>();
  lex.topic_member_ids =
      j.at("topic_member_ids").get<std::vector<std::vector<int32_t>>>();
  lex.rare_ids = j.at("rare_ids").get<std::vector<int32_t>>();
  for (const auto& [key, value] : j.at("char_vectors").items()) {
    if (key.size() != 1) {
      throw ContractError("LoadLexicon: bad char_vectors key");
    }
    lex.char_vectors[key[0]] = value.get<std::vector<double>>();
  }
  lex.rare_offsets =
      j.at("rare_offsets").get<std::vector<std::vector<double>>>();
  return lex;
}

}  // namespace ctxasr
