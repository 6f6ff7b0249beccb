// src/config.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "ctxasr/bpe.h"
#include "json.hpp"

namespace ctxasr {

using nlohmann::json;

namespace {

// Consumes the keys of one JSON object; any key left unconsumed at Finish()
// is an error, which is what makes the schema strict.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("config: '" + Label() + "' must be an object");
  }

  void Get(const char* key, double* out) {
    const json* v = Take(key);
    if (!v) return;
    if (!v->is_number()) throw ConfigError("config: '" + Path(key) + "' must be a number");
    *out = v->get<double>();
  }
  void Get(const char* key, int32_t* out) {
    const json* v = Take(key);
    if (!v) return;
    if (!v->is_number_integer()) throw ConfigError("config: '" + Path(key) + "' must be an integer");
    *out = v->get<int32_t>();
  }
  void Get(const char* key, uint64_t* out) {
    const json* v = Take(key);
    if (!v) return;
    if (!v->is_number_unsigned() && !v->is_number_integer()) {
      throw ConfigError("config: '" + Path(key) + "' must be a non-negative integer");
    }
    if (v->is_number_integer() && v->get<int64_t>() < 0) {
      throw ConfigError("config: '" + Path(key) + "' must be a non-negative integer");
    }
    *out = v->get<uint64_t>();
  }
  void Get(const char* key, bool* out) {
    const json* v = Take(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError("config: '" + Path(key) + "' must be a boolean");
    *out = v->get<bool>();
  }
  void Get(const char* key, std::string* out) {
    const json* v = Take(key);
    if (!v) return;
    if (!v->is_string()) throw ConfigError("config: '" + Path(key) + "' must be a string");
    *out = v->get<std::string>();
  }
  void Get(const char* key, std::vector<int32_t>* out) {
    const json* v = Take(key);
    if (!v) return;
    if (!v->is_array()) throw ConfigError("config: '" + Path(key) + "' must be an array");
    std::vector<int32_t> vals;
    for (const auto& item : *v) {
      if (!item.is_number_integer()) {
        throw ConfigError("config: '" + Path(key) + "' must hold integers");
      }
      vals.push_back(item.get<int32_t>());
    }
    *out = std::move(vals);
  }

  // Returns the subsection object, or nullptr when absent.
  const json* Sub(const char* key) { return Take(key); }

  void Finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("config: unknown key '" + Path(item.key().c_str()) + "'");
      }
    }
  }

 private:
  std::string Label() const { return prefix_.empty() ? "<root>" : prefix_; }
  std::string Path(const char* key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + key;
  }
  const json* Take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void ParseCorpus(const json& j, CorpusConfig* c) {
  Section s(j, "corpus");
  s.Get("num_train_docs", &c->num_train_docs);
  s.Get("num_dev_docs", &c->num_dev_docs);
  s.Get("num_test_docs", &c->num_test_docs);
  s.Get("sentences_per_doc", &c->sentences_per_doc);
  s.Get("num_topics", &c->num_topics);
  s.Get("num_common_words", &c->num_common_words);
  s.Get("num_apostrophe_words", &c->num_apostrophe_words);
  s.Get("num_proper_nouns", &c->num_proper_nouns);
  s.Get("num_homophone_pairs", &c->num_homophone_pairs);
  s.Get("num_rare_words", &c->num_rare_words);
  s.Get("min_sentence_words", &c->min_sentence_words);
  s.Get("max_sentence_words", &c->max_sentence_words);
  s.Get("rare_doc_prob", &c->rare_doc_prob);
  s.Get("rares_per_doc", &c->rares_per_doc);
  s.Get("rares_per_eval_doc", &c->rares_per_eval_doc);
  s.Get("rare_sentence_prob", &c->rare_sentence_prob);
  s.Get("topic_word_prob", &c->topic_word_prob);
  s.Get("function_word_prob", &c->function_word_prob);
  s.Get("comma_prob", &c->comma_prob);
  s.Get("question_prob", &c->question_prob);
  s.Get("feature_dim", &c->feature_dim);
  s.Get("min_char_duration", &c->min_char_duration);
  s.Get("max_char_duration", &c->max_char_duration);
  s.Get("noise_sigma", &c->noise_sigma);
  s.Get("rare_distance", &c->rare_distance);
  s.Get("dev_memo_utts", &c->dev_memo_utts);
  s.Finish();
}

void ParseRecipe(const json& j, PromptRecipeConfig* r) {
  Section s(j, "training.recipe");
  s.Get("wordlist_prob", &r->wordlist_prob);
  s.Get("mcp_prob", &r->mcp_prob);
  s.Get("p_drop", &r->p_drop);
  s.Get("p_swap", &r->p_swap);
  s.Get("min_distractors", &r->min_distractors);
  s.Get("max_distractors", &r->max_distractors);
  s.Get("history_max_bytes", &r->history_max_bytes);
  s.Get("style_substring_max_bytes", &r->style_substring_max_bytes);
  s.Get("common_k", &r->common_k);
  s.Finish();
}

json CorpusToJson(const CorpusConfig& c) {
  return json{{"num_train_docs", c.num_train_docs},
              {"num_dev_docs", c.num_dev_docs},
              {"num_test_docs", c.num_test_docs},
              {"sentences_per_doc", c.sentences_per_doc},
              {"num_topics", c.num_topics},
              {"num_common_words", c.num_common_words},
              {"num_apostrophe_words", c.num_apostrophe_words},
              {"num_proper_nouns", c.num_proper_nouns},
              {"num_homophone_pairs", c.num_homophone_pairs},
              {"num_rare_words", c.num_rare_words},
              {"min_sentence_words", c.min_sentence_words},
              {"max_sentence_words", c.max_sentence_words},
              {"rare_doc_prob", c.rare_doc_prob},
              {"rares_per_doc", c.rares_per_doc},
              {"rares_per_eval_doc", c.rares_per_eval_doc},
              {"rare_sentence_prob", c.rare_sentence_prob},
              {"topic_word_prob", c.topic_word_prob},
              {"function_word_prob", c.function_word_prob},
              {"comma_prob", c.comma_prob},
              {"question_prob", c.question_prob},
              {"feature_dim", c.feature_dim},
              {"min_char_duration", c.min_char_duration},
              {"max_char_duration", c.max_char_duration},
              {"noise_sigma", c.noise_sigma},
              {"rare_distance", c.rare_distance},
              {"dev_memo_utts", c.dev_memo_utts}};
}

void RequireProb(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string("config: ") + what + " must be in [0, 1]");
  }
}

void RequirePositive(int64_t v, const char* what) {
  if (v <= 0) throw ConfigError(std::string("config: ") + what + " must be positive");
}

void RequireNonNegative(int64_t v, const char* what) {
  if (v < 0) throw ConfigError(std::string("config: ") + what + " must be non-negative");
}

}  // namespace

std::string RunConfigToJson(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["corpus"] = CorpusToJson(cfg.corpus);
  j["tokenizer"] = json{{"vocab_size", cfg.tokenizer_vocab}};
  j["text_encoder"] = json{{"dim", cfg.text_encoder.dim},
                           {"layers", cfg.text_encoder.layers},
                           {"heads", cfg.text_encoder.heads},
                           {"ffn_hidden", cfg.text_encoder.ffn_hidden},
                           {"max_positions", cfg.text_encoder.max_positions}};
  j["mlm"] = json{{"steps", cfg.mlm.steps},
                  {"batch_size", cfg.mlm.batch_size},
                  {"lr", cfg.mlm.lr},
                  {"clip_norm", cfg.mlm.clip_norm},
                  {"mask_rate", cfg.mlm.mask.mask_rate},
                  {"p_mask", cfg.mlm.mask.p_mask},
                  {"p_random", cfg.mlm.mask.p_random}};
  j["asr"] = json{{"dim", cfg.asr.dim},
                  {"layers", cfg.asr.layers},
                  {"heads", cfg.asr.heads},
                  {"ffn_hidden", cfg.asr.ffn_hidden},
                  {"pred_dim", cfg.asr.pred_dim},
                  {"joiner_dim", cfg.asr.joiner_dim},
                  {"use_prompts", cfg.asr.use_prompts}};
  j["training"] = json{{"lr", cfg.training.lr},
                       {"steps", cfg.training.steps},
                       {"batch_size", cfg.training.batch_size},
                       {"clip_norm", cfg.training.clip_norm},
                       {"warmup_steps", cfg.training.warmup_steps},
                       {"lr_final_frac", cfg.training.lr_final_frac},
                       {"recipe",
                        json{{"wordlist_prob", cfg.training.recipe.wordlist_prob},
                             {"mcp_prob", cfg.training.recipe.mcp_prob},
                             {"p_drop", cfg.training.recipe.p_drop},
                             {"p_swap", cfg.training.recipe.p_swap},
                             {"min_distractors", cfg.training.recipe.min_distractors},
                             {"max_distractors", cfg.training.recipe.max_distractors},
                             {"history_max_bytes", cfg.training.recipe.history_max_bytes},
                             {"style_substring_max_bytes",
                              cfg.training.recipe.style_substring_max_bytes},
                             {"common_k", cfg.training.recipe.common_k}}}};
  j["decoding"] = json{{"beam", cfg.decoding.beam},
                       {"max_sym_per_frame", cfg.decoding.max_sym_per_frame},
                       {"mode", cfg.decode_mode}};
  j["eval"] = json{{"k_list", cfg.eval.k_list},
                   {"n_list", cfg.eval.n_list},
                   {"pure_distractor_n", cfg.eval.pure_distractor_n},
                   {"history_bytes", cfg.eval.history_bytes},
                   {"fixed_style_text", cfg.eval.fixed_style_text}};
  return j.dump(2);
}

RunConfig RunConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  RunConfig cfg;
  Section root(j, "");
  root.Get("seed", &cfg.seed);
  if (const json* sub = root.Sub("corpus")) ParseCorpus(*sub, &cfg.corpus);
  if (const json* sub = root.Sub("tokenizer")) {
    Section s(*sub, "tokenizer");
    s.Get("vocab_size", &cfg.tokenizer_vocab);
    s.Finish();
  }
  if (const json* sub = root.Sub("text_encoder")) {
    Section s(*sub, "text_encoder");
    s.Get("dim", &cfg.text_encoder.dim);
    s.Get("layers", &cfg.text_encoder.layers);
    s.Get("heads", &cfg.text_encoder.heads);
    s.Get("ffn_hidden", &cfg.text_encoder.ffn_hidden);
    s.Get("max_positions", &cfg.text_encoder.max_positions);
    s.Finish();
  }
  if (const json* sub = root.Sub("mlm")) {
    Section s(*sub, "mlm");
    s.Get("steps", &cfg.mlm.steps);
    s.Get("batch_size", &cfg.mlm.batch_size);
    s.Get("lr", &cfg.mlm.lr);
    s.Get("clip_norm", &cfg.mlm.clip_norm);
    s.Get("mask_rate", &cfg.mlm.mask.mask_rate);
    s.Get("p_mask", &cfg.mlm.mask.p_mask);
    s.Get("p_random", &cfg.mlm.mask.p_random);
    s.Finish();
  }
  if (const json* sub = root.Sub("asr")) {
    Section s(*sub, "asr");
    s.Get("dim", &cfg.asr.dim);
    s.Get("layers", &cfg.asr.layers);
    s.Get("heads", &cfg.asr.heads);
    s.Get("ffn_hidden", &cfg.asr.ffn_hidden);
    s.Get("pred_dim", &cfg.asr.pred_dim);
    s.Get("joiner_dim", &cfg.asr.joiner_dim);
    s.Get("use_prompts", &cfg.asr.use_prompts);
    s.Finish();
  }
  if (const json* sub = root.Sub("training")) {
    Section s(*sub, "training");
    s.Get("lr", &cfg.training.lr);
    s.Get("steps", &cfg.training.steps);
    s.Get("batch_size", &cfg.training.batch_size);
    s.Get("clip_norm", &cfg.training.clip_norm);
    s.Get("warmup_steps", &cfg.training.warmup_steps);
    s.Get("lr_final_frac", &cfg.training.lr_final_frac);
    if (const json* rsub = s.Sub("recipe")) ParseRecipe(*rsub, &cfg.training.recipe);
    s.Finish();
  }
  if (const json* sub = root.Sub("decoding")) {
    Section s(*sub, "decoding");
    s.Get("beam", &cfg.decoding.beam);
    s.Get("max_sym_per_frame", &cfg.decoding.max_sym_per_frame);
    s.Get("mode", &cfg.decode_mode);
    s.Finish();
  }
  if (const json* sub = root.Sub("eval")) {
    Section s(*sub, "eval");
    s.Get("k_list", &cfg.eval.k_list);
    s.Get("n_list", &cfg.eval.n_list);
    s.Get("pure_distractor_n", &cfg.eval.pure_distractor_n);
    s.Get("history_bytes", &cfg.eval.history_bytes);
    s.Get("fixed_style_text", &cfg.eval.fixed_style_text);
    s.Finish();
  }
  root.Finish();

  ValidateRunConfig(cfg);
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return RunConfigFromJson(ss.str());
}

void ValidateRunConfig(const RunConfig& cfg) {
  const CorpusConfig& c = cfg.corpus;
  RequirePositive(c.num_train_docs, "corpus.num_train_docs");
  RequirePositive(c.num_dev_docs, "corpus.num_dev_docs");
  RequirePositive(c.num_test_docs, "corpus.num_test_docs");
  RequirePositive(c.sentences_per_doc, "corpus.sentences_per_doc");
  RequirePositive(c.num_topics, "corpus.num_topics");
  RequirePositive(c.num_common_words, "corpus.num_common_words");
  RequireNonNegative(c.num_apostrophe_words, "corpus.num_apostrophe_words");
  RequireNonNegative(c.num_proper_nouns, "corpus.num_proper_nouns");
  RequirePositive(c.num_homophone_pairs, "corpus.num_homophone_pairs");
  RequireNonNegative(c.num_rare_words, "corpus.num_rare_words");
  RequirePositive(c.min_sentence_words, "corpus.min_sentence_words");
  if (c.max_sentence_words < c.min_sentence_words) {
    throw ConfigError("config: corpus sentence word bounds are inverted");
  }
  RequireProb(c.rare_doc_prob, "corpus.rare_doc_prob");
  RequireNonNegative(c.rares_per_doc, "corpus.rares_per_doc");
  RequireNonNegative(c.rares_per_eval_doc, "corpus.rares_per_eval_doc");
  RequireProb(c.rare_sentence_prob, "corpus.rare_sentence_prob");
  RequireProb(c.topic_word_prob, "corpus.topic_word_prob");
  RequireProb(c.function_word_prob, "corpus.function_word_prob");
  RequireProb(c.comma_prob, "corpus.comma_prob");
  RequireProb(c.question_prob, "corpus.question_prob");
  RequirePositive(c.feature_dim, "corpus.feature_dim");
  RequirePositive(c.min_char_duration, "corpus.min_char_duration");
  if (c.max_char_duration < c.min_char_duration) {
    throw ConfigError("config: corpus char duration bounds are inverted");
  }
  if (c.noise_sigma < 0.0) throw ConfigError("config: corpus.noise_sigma must be non-negative");
  if (c.rare_distance < 0.0) throw ConfigError("config: corpus.rare_distance must be non-negative");
  RequireNonNegative(c.dev_memo_utts, "corpus.dev_memo_utts");

  if (cfg.tokenizer_vocab < BpeModel::kBaseVocab) {
    throw ConfigError("config: tokenizer.vocab_size must be at least " +
                      std::to_string(BpeModel::kBaseVocab));
  }

  const TextEncoderConfig& t = cfg.text_encoder;
  RequirePositive(t.dim, "text_encoder.dim");
  RequirePositive(t.layers, "text_encoder.layers");
  RequirePositive(t.heads, "text_encoder.heads");
  RequirePositive(t.ffn_hidden, "text_encoder.ffn_hidden");
  RequirePositive(t.max_positions, "text_encoder.max_positions");
  if (t.dim % t.heads != 0) throw ConfigError("config: text_encoder.dim % heads != 0");

  RequireNonNegative(cfg.mlm.steps, "mlm.steps");
  RequirePositive(cfg.mlm.batch_size, "mlm.batch_size");
  if (cfg.mlm.lr <= 0.0) throw ConfigError("config: mlm.lr must be positive");
  if (cfg.mlm.clip_norm < 0.0) throw ConfigError("config: mlm.clip_norm must be non-negative");
  RequireProb(cfg.mlm.mask.mask_rate, "mlm.mask_rate");
  RequireProb(cfg.mlm.mask.p_mask, "mlm.p_mask");
  RequireProb(cfg.mlm.mask.p_random, "mlm.p_random");
  if (cfg.mlm.mask.p_mask + cfg.mlm.mask.p_random > 1.0 + 1e-12) {
    throw ConfigError("config: mlm.p_mask + mlm.p_random must be at most 1");
  }

  const AsrModelConfig& a = cfg.asr;
  RequirePositive(a.dim, "asr.dim");
  RequirePositive(a.layers, "asr.layers");
  RequirePositive(a.heads, "asr.heads");
  RequirePositive(a.ffn_hidden, "asr.ffn_hidden");
  RequirePositive(a.pred_dim, "asr.pred_dim");
  RequirePositive(a.joiner_dim, "asr.joiner_dim");
  if (a.dim % a.heads != 0) throw ConfigError("config: asr.dim % heads != 0");

  RequirePositive(cfg.training.steps, "training.steps");
  RequirePositive(cfg.training.batch_size, "training.batch_size");
  if (cfg.training.lr <= 0.0) throw ConfigError("config: training.lr must be positive");
  if (cfg.training.clip_norm < 0.0) {
    throw ConfigError("config: training.clip_norm must be non-negative");
  }
  RequireNonNegative(cfg.training.warmup_steps, "training.warmup_steps");
  if (cfg.training.lr_final_frac < 0.0 || cfg.training.lr_final_frac > 1.0) {
    throw ConfigError("config: training.lr_final_frac must be in [0, 1]");
  }
  const PromptRecipeConfig& r = cfg.training.recipe;
  RequireProb(r.wordlist_prob, "training.recipe.wordlist_prob");
  RequireProb(r.mcp_prob, "training.recipe.mcp_prob");
  RequireProb(r.p_drop, "training.recipe.p_drop");
  RequireProb(r.p_swap, "training.recipe.p_swap");
  RequireNonNegative(r.min_distractors, "training.recipe.min_distractors");
  if (r.max_distractors < r.min_distractors) {
    throw ConfigError("config: recipe distractor bounds are inverted");
  }
  RequireNonNegative(r.history_max_bytes, "training.recipe.history_max_bytes");
  RequireNonNegative(r.style_substring_max_bytes, "training.recipe.style_substring_max_bytes");
  RequireNonNegative(r.common_k, "training.recipe.common_k");

  if (cfg.decoding.beam < 1) throw ConfigError("config: decoding.beam must be at least 1");
  RequirePositive(cfg.decoding.max_sym_per_frame, "decoding.max_sym_per_frame");
  if (cfg.decode_mode != "greedy" && cfg.decode_mode != "beam") {
    throw ConfigError("config: decoding.mode must be 'greedy' or 'beam'");
  }

  if (cfg.eval.k_list.empty()) throw ConfigError("config: eval.k_list must be non-empty");
  for (int32_t k : cfg.eval.k_list) RequireNonNegative(k, "eval.k_list entries");
  if (cfg.eval.n_list.empty()) throw ConfigError("config: eval.n_list must be non-empty");
  for (int32_t n : cfg.eval.n_list) RequireNonNegative(n, "eval.n_list entries");
  RequireNonNegative(cfg.eval.pure_distractor_n, "eval.pure_distractor_n");
  RequireNonNegative(cfg.eval.history_bytes, "eval.history_bytes");
}

std::string ConfigHash(const RunConfig& cfg) {
  const std::string canon = RunConfigToJson(cfg);
  uint64_t h = 14695981039346656037ull;  // FNV-1a offset basis
  for (unsigned char b : canon) {
    h ^= b;
    h *= 1099511628211ull;  // FNV prime
  }
  static const char* kHex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace ctxasr
