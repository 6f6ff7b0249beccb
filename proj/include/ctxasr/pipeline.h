// include/ctxasr/pipeline.h
//
// Copyright (c)  2026  ctxasr authors
//
// End-to-end orchestration: deterministic corpus + tokenizer derivation,
// text-encoder pretraining, transducer training variants, batch decoding,
// and the three evaluation protocols.  Every artifact embeds (version,
// config hash, seed) and is byte-identical across reruns of the same
// config + seed.

#ifndef CTXASR_PIPELINE_H_
#define CTXASR_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxasr/asr_model.h"
#include "ctxasr/bpe.h"
#include "ctxasr/checkpoint.h"
#include "ctxasr/config.h"
#include "ctxasr/corpus.h"
#include "ctxasr/decode.h"
#include "ctxasr/prompts.h"
#include "ctxasr/report.h"
#include "ctxasr/text_encoder.h"

namespace ctxasr {

inline constexpr const char* kArtifactVersion = "1";

// Corpus, tokenizer, and rendering jitter — a pure function of the config.
// The tokenizer is retrained (deterministically) rather than persisted, so
// every command sees the identical vocabulary.
struct Workbench {
  Corpus corpus;
  BpeModel bpe;
  JitterConfig jitter;
};

Workbench BuildWorkbench(const RunConfig& cfg);

// Text-encoder geometry with the tokenizer-derived vocabulary filled in.
TextEncoderConfig FinalTextEncoderConfig(const RunConfig& cfg, const BpeModel& bpe);

// Transducer geometry with feature/prompt/vocab widths filled in.
AsrModelConfig FinalAsrConfig(const RunConfig& cfg, const BpeModel& bpe, bool use_prompts);

// MLM pretraining over the train split rendered in both styles.
// Returns the trained encoder; the loss curve lands in *curve when given.
TextEncoder<float> PretrainTextEncoder(const RunConfig& cfg, const Workbench& wb,
                                       std::vector<float>* curve = nullptr);

// Fresh encoder with identical geometry and parameter values (deep copy;
// the two encoders share no tensors afterwards).
TextEncoder<float> CloneTextEncoder(const TextEncoder<float>& enc);

enum class TrainVariant {
  kFull,         // word-list and history prompts (M2)
  kNoWordlist,   // history prompts only (M1)
  kNoCrossAttn,  // prompt cross-attention disabled (baseline B)
};
const char* TrainVariantName(TrainVariant v);
TrainVariant TrainVariantFromName(const std::string& name);

struct TrainedAsr {
  AsrModel<float> model;
  TextEncoder<float> text_enc;  // body frozen during training, style_v live
  std::vector<float> losses;    // one mean loss per step
};

// Trains one transducer variant against a pretrained text encoder (taken by
// value: training owns and mutates its copy's style vector).
TrainedAsr TrainAsr(const RunConfig& cfg, const Workbench& wb,
                    TextEncoder<float> text_enc, TrainVariant variant);

// Joint checkpoint: transducer and text-encoder parameters in one archive,
// geometry embedded as JSON and revalidated on load.
void SaveAsrCheckpoint(const std::string& path, const AsrModel<float>& model,
                       const TextEncoder<float>& text_enc,
                       const std::string& config_hash, uint64_t seed);
struct LoadedAsr {
  AsrModel<float> model;
  TextEncoder<float> text_enc;
};
LoadedAsr LoadAsrCheckpoint(const std::string& path);

void SaveTextEncoderCheckpoint(const std::string& path, const TextEncoder<float>& enc,
                               const std::string& config_hash, uint64_t seed);
TextEncoder<float> LoadTextEncoderCheckpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Evaluation protocols.  All scoring is deterministic; rare-word machinery
// reuses the training recipe's frequency cutoff.

EvalReport RunContextEval(const RunConfig& cfg, const Workbench& wb,
                          const AsrModel<float>& model, const TextEncoder<float>& text_enc,
                          const std::string& model_label);

EvalReport RunBiasingEval(const RunConfig& cfg, const Workbench& wb,
                          const AsrModel<float>& model, const TextEncoder<float>& text_enc,
                          const std::string& model_label);

EvalReport RunLongformEval(const RunConfig& cfg, const Workbench& wb,
                           const AsrModel<float>& model, const TextEncoder<float>& text_enc,
                           const std::string& model_label,
                           std::vector<LongformCsvRow>* csv_rows = nullptr);

// ---------------------------------------------------------------------------
// Commands (CLI bodies).  Each writes its artifacts under out_dir and
// throws on failure: ConfigError for configuration problems, anything else
// for runtime problems.

void CmdSynth(const RunConfig& cfg, const std::string& out_dir);
void CmdPretrainText(const RunConfig& cfg, const std::string& out_dir);
void CmdTrain(const RunConfig& cfg, const std::string& out_dir, TrainVariant variant);

struct DecodeCmdOptions {
  std::string ckpt_path;           // defaults to <out>/asr_full.ckpt
  std::string split = "test";      // train | dev | test | dev_memo
  std::string prompt_mode = "none";  // none | history | wordlist
  std::string style = "uc";        // uc | mcp
};
void CmdDecode(const RunConfig& cfg, const std::string& out_dir, const DecodeCmdOptions& opts);

void CmdEval(const RunConfig& cfg, const std::string& out_dir, const std::string& protocol,
             const std::string& ckpt_path);

// Full argv-level entry point; returns the process exit code
// (0 ok, 2 config error, 3 runtime failure).
int RunCli(int argc, char** argv);

}  // namespace ctxasr

#endif  // CTXASR_PIPELINE_H_
