// include/ctxasr/config.h
//
// Copyright (c)  2026  ctxasr authors
//
// Strict nested run configuration.  A config file is JSON whose sections
// mirror the structs below; absent keys keep their defaults, unknown keys
// are errors, and every run artifact embeds the FNV-1a hash of the full
// canonical config together with the seed.

#ifndef CTXASR_CONFIG_H_
#define CTXASR_CONFIG_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxasr/asr_model.h"
#include "ctxasr/corpus.h"
#include "ctxasr/decode.h"
#include "ctxasr/prompts.h"
#include "ctxasr/text_encoder.h"

namespace ctxasr {

struct ConfigError : public std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainingConfig {
  double lr = 4e-3;  // peak rate; see warmup_steps / lr_final_frac
  int32_t steps = 3000;
  int32_t batch_size = 8;
  double clip_norm = 5.0;
  int32_t warmup_steps = 50;    // linear ramp 0 -> lr
  double lr_final_frac = 0.1;   // cosine decay floor, as a fraction of lr
  PromptRecipeConfig recipe;
};

struct EvalConfig {
  std::vector<int32_t> k_list = {0, 1, 2, 4, 8};  // long-form history depths
  std::vector<int32_t> n_list = {0, 5, 10, 20};   // biasing distractor counts
  int32_t pure_distractor_n = 20;
  int32_t history_bytes = 256;
  std::string fixed_style_text;  // appended to the style tag at decode time
};

// The full run configuration.  Derived quantities are intentionally not
// configurable: the ASR feature width follows the corpus, the prompt width
// follows the text-encoder dim, and both model vocabularies follow the
// tokenizer actually trained on the generated corpus.
struct RunConfig {
  uint64_t seed = 1;
  CorpusConfig corpus;
  int32_t tokenizer_vocab = 388;  // byte vocab + merge budget
  TextEncoderConfig text_encoder;
  MlmPretrainConfig mlm;
  AsrModelConfig asr;
  TrainingConfig training;
  DecodeConfig decoding;
  std::string decode_mode = "beam";  // "greedy" | "beam"
  EvalConfig eval;
};

// Canonical JSON of the complete config (sorted keys, 2-space indent).
std::string RunConfigToJson(const RunConfig& cfg);

// Parses a (possibly partial) JSON config over the defaults.  Unknown keys,
// wrong types, and out-of-range values raise ConfigError.
RunConfig RunConfigFromJson(const std::string& text);
RunConfig LoadRunConfig(const std::string& path);  // ConfigError on bad file

// Range/consistency validation; RunConfigFromJson calls this.
void ValidateRunConfig(const RunConfig& cfg);

// FNV-1a 64-bit hash of the canonical JSON, as 16 hex digits.
std::string ConfigHash(const RunConfig& cfg);

}  // namespace ctxasr

#endif  // CTXASR_CONFIG_H_
