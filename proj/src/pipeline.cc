// src/pipeline.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/pipeline.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

namespace ctxasr {

using nlohmann::json;

namespace {

// Fixed stream tags so every random decision has its own derived generator.
constexpr uint64_t kTagTextEncInit = 0x101;
constexpr uint64_t kTagMlm = 0x102;
constexpr uint64_t kTagAsrInit = 0x103;
constexpr uint64_t kTagTrain = 0x104;
constexpr uint64_t kTagBiasingEval = 0x105;
constexpr uint64_t kTagDecodeWordlist = 0x106;

DecodeMode ModeFromString(const std::string& s) {
  if (s == "greedy") return DecodeMode::kGreedy;
  if (s == "beam") return DecodeMode::kBeam;
  throw ConfigError("config: unknown decode mode '" + s + "'");
}

std::string StylePromptText(Style style, const std::string& fixed) {
  std::string out = StyleTag(style);
  if (!fixed.empty()) out += " " + fixed;
  return out;
}

Tensor<float> UttFeatures(const Workbench& wb, const SynthUtterance& utt) {
  return FeaturesToTensor<float>(RenderFeatures(
      wb.corpus.lexicon, NormalizeUc(utt.text_mcp), utt.feature_seed, wb.jitter));
}

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Linear warmup to the peak rate, then cosine decay to lr * lr_final_frac.
double ScheduledLr(const TrainingConfig& t, int32_t step) {
  const int32_t warmup = std::min(t.warmup_steps, t.steps);
  if (step < warmup) return t.lr * (step + 1) / warmup;
  const int32_t span = t.steps - warmup;
  const double progress = span > 0 ? static_cast<double>(step - warmup) / span : 1.0;
  const double lr_final = t.lr * t.lr_final_frac;
  return lr_final + (t.lr - lr_final) * 0.5 * (1.0 + std::cos(kPi * progress));
}

// Frequency cutoff over every split, so eval-only rare words are known to
// the harness (training itself ranks over the train split alone).
RareWordSet EvalRareSet(const RunConfig& cfg, const Corpus& corpus) {
  std::vector<SynthUtterance> all = corpus.train;
  all.insert(all.end(), corpus.dev.begin(), corpus.dev.end());
  all.insert(all.end(), corpus.test.begin(), corpus.test.end());
  return BuildRareWordSet(all, cfg.training.recipe.common_k);
}

json MetaJson(const RunConfig& cfg) {
  return json{{"version", kArtifactVersion},
              {"config_hash", ConfigHash(cfg)},
              {"seed", cfg.seed}};
}

void WriteLines(const std::string& path, const json& meta, const std::vector<json>& lines) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ContractError("pipeline: cannot open '" + path + "' for writing");
  f << json{{"_meta", meta}}.dump() << "\n";
  for (const json& l : lines) f << l.dump() << "\n";
  if (!f) throw ContractError("pipeline: short write to '" + path + "'");
}

json TextGeometryJson(const TextEncoderConfig& t) {
  return json{{"vocab_size", t.vocab_size}, {"dim", t.dim},
              {"layers", t.layers},         {"heads", t.heads},
              {"ffn_hidden", t.ffn_hidden}, {"max_positions", t.max_positions}};
}

TextEncoderConfig TextGeometryFromJson(const json& j) {
  TextEncoderConfig t;
  t.vocab_size = j.at("vocab_size").get<int32_t>();
  t.dim = j.at("dim").get<int32_t>();
  t.layers = j.at("layers").get<int32_t>();
  t.heads = j.at("heads").get<int32_t>();
  t.ffn_hidden = j.at("ffn_hidden").get<int32_t>();
  t.max_positions = j.at("max_positions").get<int32_t>();
  return t;
}

json AsrGeometryJson(const AsrModelConfig& m) {
  return json{{"feature_dim", m.feature_dim}, {"dim", m.dim},
              {"layers", m.layers},           {"heads", m.heads},
              {"ffn_hidden", m.ffn_hidden},   {"prompt_dim", m.prompt_dim},
              {"vocab_size", m.vocab_size},   {"pred_dim", m.pred_dim},
              {"joiner_dim", m.joiner_dim},   {"use_prompts", m.use_prompts}};
}

AsrModelConfig AsrGeometryFromJson(const json& j) {
  AsrModelConfig m;
  m.feature_dim = j.at("feature_dim").get<int32_t>();
  m.dim = j.at("dim").get<int32_t>();
  m.layers = j.at("layers").get<int32_t>();
  m.heads = j.at("heads").get<int32_t>();
  m.ffn_hidden = j.at("ffn_hidden").get<int32_t>();
  m.prompt_dim = j.at("prompt_dim").get<int32_t>();
  m.vocab_size = j.at("vocab_size").get<int32_t>();
  m.pred_dim = j.at("pred_dim").get<int32_t>();
  m.joiner_dim = j.at("joiner_dim").get<int32_t>();
  m.use_prompts = j.at("use_prompts").get<bool>();
  return m;
}

json ParseCheckpointMeta(const Checkpoint& ckpt, const std::string& expect_kind) {
  json meta;
  try {
    meta = json::parse(ckpt.config_json);
  } catch (const json::exception& e) {
    throw ContractError(std::string("checkpoint: bad embedded config: ") + e.what());
  }
  if (meta.value("kind", "") != expect_kind) {
    throw ContractError("checkpoint: expected kind '" + expect_kind + "', found '" +
                        meta.value("kind", "<none>") + "'");
  }
  return meta;
}

const std::vector<SynthUtterance>& SplitUtts(const Corpus& corpus, const std::string& split) {
  if (split == "train") return corpus.train;
  if (split == "dev") return corpus.dev;
  if (split == "test") return corpus.test;
  if (split == "dev_memo") return corpus.dev_memo;
  throw ConfigError("config: unknown split '" + split + "'");
}

DecodeResult DecodeOne(const RunConfig& cfg, const Workbench& wb, const AsrModel<float>& model,
                       const TextEncoder<float>& text_enc, const SynthUtterance& utt,
                       const std::string& content, Style style) {
  return DecodeUtterance(model, text_enc, wb.bpe, UttFeatures(wb, utt), content,
                         StylePromptText(style, cfg.eval.fixed_style_text),
                         ModeFromString(cfg.decode_mode), cfg.decoding);
}

}  // namespace

Workbench BuildWorkbench(const RunConfig& cfg) {
  Workbench wb;
  wb.corpus = GenerateCorpus(cfg.corpus, cfg.seed);
  std::vector<std::string> texts;
  texts.reserve(2 * wb.corpus.train.size() + 2);
  for (const SynthUtterance& u : wb.corpus.train) {
    texts.push_back(u.text_mcp);
    texts.push_back(NormalizeUc(u.text_mcp));
  }
  texts.push_back(StyleTag(Style::kUc));
  texts.push_back(StyleTag(Style::kMcp));
  wb.bpe = BpeModel::Train(texts, cfg.tokenizer_vocab);
  wb.jitter = JitterFromConfig(cfg.corpus);
  return wb;
}

TextEncoderConfig FinalTextEncoderConfig(const RunConfig& cfg, const BpeModel& bpe) {
  TextEncoderConfig tcfg = cfg.text_encoder;
  tcfg.vocab_size = bpe.vocab_size();
  return tcfg;
}

AsrModelConfig FinalAsrConfig(const RunConfig& cfg, const BpeModel& bpe, bool use_prompts) {
  AsrModelConfig mcfg = cfg.asr;
  mcfg.feature_dim = cfg.corpus.feature_dim;
  mcfg.prompt_dim = cfg.text_encoder.dim;
  mcfg.vocab_size = bpe.vocab_size();
  mcfg.use_prompts = use_prompts;
  return mcfg;
}

TextEncoder<float> PretrainTextEncoder(const RunConfig& cfg, const Workbench& wb,
                                       std::vector<float>* curve) {
  Rng init_rng = Rng(cfg.seed).derive(kTagTextEncInit);
  TextEncoder<float> enc = MakeTextEncoder<float>(FinalTextEncoderConfig(cfg, wb.bpe), init_rng);
  std::vector<std::vector<int32_t>> seqs;
  seqs.reserve(2 * wb.corpus.train.size());
  for (const SynthUtterance& u : wb.corpus.train) {
    seqs.push_back(wb.bpe.Encode(u.text_mcp));
    seqs.push_back(wb.bpe.Encode(NormalizeUc(u.text_mcp)));
  }
  Rng mlm_rng = Rng(cfg.seed).derive(kTagMlm);
  std::vector<float> losses = MlmPretrain(enc, seqs, cfg.mlm, mlm_rng);
  if (curve) *curve = std::move(losses);
  return enc;
}

TextEncoder<float> CloneTextEncoder(const TextEncoder<float>& enc) {
  Rng dummy(0);
  TextEncoder<float> out = MakeTextEncoder<float>(enc.cfg, dummy);
  LoadParamsFromCheckpoint(CheckpointFromParams(enc.params, ""), out.params);
  return out;
}

const char* TrainVariantName(TrainVariant v) {
  switch (v) {
    case TrainVariant::kFull: return "full";
    case TrainVariant::kNoWordlist: return "no_wordlist";
    case TrainVariant::kNoCrossAttn: return "baseline";
  }
  throw ContractError("TrainVariantName: bad variant");
}

TrainVariant TrainVariantFromName(const std::string& name) {
  if (name == "full") return TrainVariant::kFull;
  if (name == "no_wordlist") return TrainVariant::kNoWordlist;
  if (name == "baseline") return TrainVariant::kNoCrossAttn;
  throw ConfigError("config: unknown train variant '" + name + "'");
}

TrainedAsr TrainAsr(const RunConfig& cfg, const Workbench& wb, TextEncoder<float> text_enc,
                    TrainVariant variant) {
  const bool use_prompts = variant != TrainVariant::kNoCrossAttn;
  Rng init_rng = Rng(cfg.seed).derive(kTagAsrInit);
  AsrModel<float> model = MakeAsrModel<float>(FinalAsrConfig(cfg, wb.bpe, use_prompts), init_rng);

  PromptRecipeConfig recipe = cfg.training.recipe;
  if (variant == TrainVariant::kNoWordlist) recipe.wordlist_prob = 0.0;
  const RareWordSet rare_set = BuildRareWordSet(wb.corpus.train, recipe.common_k);
  const std::vector<std::string> pool = PoolFromRareSet(rare_set);
  const std::vector<SynthUtterance>& train = wb.corpus.train;
  if (train.empty()) throw ContractError("TrainAsr: empty training split");

  AdamConfig<float> acfg;
  acfg.lr = static_cast<float>(cfg.training.lr);
  Adam<float> opt(AsrTrainableParams(model, text_enc), acfg);

  // One stream drives batching and the prompt recipe, so variants that share
  // a recipe see identical batches.
  Rng rng = Rng(cfg.seed).derive(kTagTrain);
  std::vector<float> losses;
  losses.reserve(static_cast<size_t>(cfg.training.steps));
  for (int32_t step = 0; step < cfg.training.steps; ++step) {
    opt.set_lr(static_cast<float>(
        ScheduledLr(cfg.training, step)));
    std::vector<const SynthUtterance*> batch;
    batch.reserve(static_cast<size_t>(cfg.training.batch_size));
    for (int32_t b = 0; b < cfg.training.batch_size; ++b) {
      batch.push_back(
          &train[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(train.size()) - 1))]);
    }
    const std::vector<TrainingPrompt> prompts =
        MakeTrainingPrompts(batch, rare_set, pool, rng, recipe);
    std::vector<AsrExample<float>> examples;
    examples.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      AsrExample<float> ex;
      ex.feats = UttFeatures(wb, *batch[i]);
      ex.targets = wb.bpe.Encode(prompts[i].reference);
      if (use_prompts) {
        ex.content_tokens = wb.bpe.Encode(prompts[i].content_text);
        ex.style_tokens = wb.bpe.Encode(prompts[i].style_text);
      }
      examples.push_back(std::move(ex));
    }
    losses.push_back(TrainStep(model, text_enc, examples, opt,
                               static_cast<float>(cfg.training.clip_norm)));
  }
  return TrainedAsr{std::move(model), std::move(text_enc), std::move(losses)};
}

void SaveAsrCheckpoint(const std::string& path, const AsrModel<float>& model,
                       const TextEncoder<float>& text_enc, const std::string& config_hash,
                       uint64_t seed) {
  json meta{{"kind", "asr"},
            {"version", kArtifactVersion},
            {"config_hash", config_hash},
            {"seed", seed},
            {"model", AsrGeometryJson(model.cfg)},
            {"text_encoder", TextGeometryJson(text_enc.cfg)}};
  Checkpoint ckpt = CheckpointFromParams(model.params, meta.dump());
  Checkpoint text_part = CheckpointFromParams(text_enc.params, "");
  for (auto& [name, entry] : text_part.entries) {
    if (!ckpt.entries.emplace(name, std::move(entry)).second) {
      throw ContractError("checkpoint: name collision on '" + name + "'");
    }
  }
  SaveCheckpoint(path, ckpt);
}

LoadedAsr LoadAsrCheckpoint(const std::string& path) {
  Checkpoint ckpt = LoadCheckpoint(path);
  json meta = ParseCheckpointMeta(ckpt, "asr");
  AsrModelConfig mcfg;
  TextEncoderConfig tcfg;
  try {
    mcfg = AsrGeometryFromJson(meta.at("model"));
    tcfg = TextGeometryFromJson(meta.at("text_encoder"));
  } catch (const json::exception& e) {
    throw ContractError(std::string("checkpoint: bad geometry: ") + e.what());
  }
  Rng dummy(0);
  LoadedAsr out{MakeAsrModel<float>(mcfg, dummy), MakeTextEncoder<float>(tcfg, dummy)};
  Checkpoint model_part, text_part;
  for (const auto& [name, entry] : ckpt.entries) {
    (name.rfind("text_enc.", 0) == 0 ? text_part : model_part).entries.emplace(name, entry);
  }
  LoadParamsFromCheckpoint(model_part, out.model.params);
  LoadParamsFromCheckpoint(text_part, out.text_enc.params);
  return out;
}

void SaveTextEncoderCheckpoint(const std::string& path, const TextEncoder<float>& enc,
                               const std::string& config_hash, uint64_t seed) {
  json meta{{"kind", "text_encoder"},
            {"version", kArtifactVersion},
            {"config_hash", config_hash},
            {"seed", seed},
            {"text_encoder", TextGeometryJson(enc.cfg)}};
  SaveCheckpoint(path, CheckpointFromParams(enc.params, meta.dump()));
}

TextEncoder<float> LoadTextEncoderCheckpoint(const std::string& path) {
  Checkpoint ckpt = LoadCheckpoint(path);
  json meta = ParseCheckpointMeta(ckpt, "text_encoder");
  TextEncoderConfig tcfg;
  try {
    tcfg = TextGeometryFromJson(meta.at("text_encoder"));
  } catch (const json::exception& e) {
    throw ContractError(std::string("checkpoint: bad geometry: ") + e.what());
  }
  Rng dummy(0);
  TextEncoder<float> enc = MakeTextEncoder<float>(tcfg, dummy);
  LoadParamsFromCheckpoint(ckpt, enc.params);
  return enc;
}

EvalReport RunContextEval(const RunConfig& cfg, const Workbench& wb,
                          const AsrModel<float>& model, const TextEncoder<float>& text_enc,
                          const std::string& model_label) {
  EvalReport rep;
  rep.protocol = "context";
  rep.config_hash = ConfigHash(cfg);
  rep.seed = cfg.seed;
  rep.model = model_label;
  const RareWordSet rare_set = EvalRareSet(cfg, wb.corpus);

  for (Style style : {Style::kUc, Style::kMcp}) {
    for (bool oracle : {false, true}) {
      WerCounts norm;
      WerCounts raw;
      std::vector<std::string> refs, hyps;
      for (const SynthUtterance& utt : wb.corpus.test) {
        const std::string content =
            oracle ? TruncateHistory(utt.preceding_text,
                                     static_cast<size_t>(cfg.eval.history_bytes))
                   : std::string();
        DecodeResult res = DecodeOne(cfg, wb, model, text_enc, utt, content, style);
        const std::string hyp = wb.bpe.Decode(res.tokens);
        norm.Add(ScoreNormalized(utt.text_mcp, hyp));
        if (style == Style::kMcp) raw.Add(ScoreRaw(utt.text_mcp, hyp));
        refs.push_back(utt.text_mcp);
        hyps.push_back(hyp);
      }
      ConditionResult cond;
      cond.counts = norm;
      cond.rare_word_error_rate = RareWordErrorRate(refs, hyps, rare_set);
      if (style == Style::kMcp) {
        cond.raw_wer = raw.Wer();
        cond.casing_punct_accuracy = CasingPunctAccuracy(refs, hyps);
      }
      rep.conditions[(oracle ? std::string("oracle-context:") : std::string("no-prompt:")) +
                     StyleName(style)] = cond;
    }
  }
  return rep;
}

EvalReport RunBiasingEval(const RunConfig& cfg, const Workbench& wb,
                          const AsrModel<float>& model, const TextEncoder<float>& text_enc,
                          const std::string& model_label) {
  EvalReport rep;
  rep.protocol = "biasing";
  rep.config_hash = ConfigHash(cfg);
  rep.seed = cfg.seed;
  rep.model = model_label;
  const RareWordSet rare_set = EvalRareSet(cfg, wb.corpus);
  const std::vector<std::string> pool = PoolFromRareSet(rare_set);

  // One pass per condition: "no-list", each requested N, and the
  // pure-distractor robustness condition.
  struct Cond {
    std::string name;
    bool use_list = false;
    bool pure_distractors = false;
    int32_t n = 0;
  };
  std::vector<Cond> conds;
  conds.push_back({"no-list", false, false, 0});
  for (int32_t n : cfg.eval.n_list) {
    conds.push_back({"N=" + std::to_string(n), true, false, n});
  }
  conds.push_back({"distractors-only:N=" + std::to_string(cfg.eval.pure_distractor_n), true, true,
                   cfg.eval.pure_distractor_n});

  for (const Cond& c : conds) {
    Rng rng = Rng(cfg.seed).derive(kTagBiasingEval).derive(static_cast<uint64_t>(
        c.n * 4 + (c.pure_distractors ? 2 : 0) + (c.use_list ? 1 : 0)));
    WerCounts counts;
    std::vector<std::string> refs, hyps;
    for (const SynthUtterance& utt : wb.corpus.test) {
      std::string content;
      if (c.use_list) {
        const std::vector<std::string> words =
            c.pure_distractors ? std::vector<std::string>() : UtteranceWords(utt.text_mcp);
        content = SerializeWordList(MakeBiasingPrompt(words, rare_set, pool, rng, c.n));
      }
      DecodeResult res = DecodeOne(cfg, wb, model, text_enc, utt, content, Style::kUc);
      const std::string hyp = wb.bpe.Decode(res.tokens);
      counts.Add(ScoreNormalized(utt.text_mcp, hyp));
      refs.push_back(utt.text_mcp);
      hyps.push_back(hyp);
    }
    ConditionResult cond;
    cond.counts = counts;
    cond.rare_word_error_rate = RareWordErrorRate(refs, hyps, rare_set);
    rep.conditions[c.name] = cond;
  }
  return rep;
}

EvalReport RunLongformEval(const RunConfig& cfg, const Workbench& wb,
                           const AsrModel<float>& model, const TextEncoder<float>& text_enc,
                           const std::string& model_label,
                           std::vector<LongformCsvRow>* csv_rows) {
  EvalReport rep;
  rep.protocol = "longform";
  rep.config_hash = ConfigHash(cfg);
  rep.seed = cfg.seed;
  rep.model = model_label;
  const std::vector<LongformSession> sessions = BuildLongformTestset(wb.corpus);
  const RareWordSet rare_set = EvalRareSet(cfg, wb.corpus);

  for (int32_t k : cfg.eval.k_list) {
    for (HistoryMode mode : {HistoryMode::kDecoded, HistoryMode::kOracle}) {
      WerCounts counts;
      std::vector<std::string> refs, hyps;
      for (const LongformSession& session : sessions) {
        const std::vector<LongformUttResult> results = LongformDecode(
            model, text_enc, wb.bpe, wb.corpus.lexicon, wb.corpus.test, session, wb.jitter, k,
            static_cast<size_t>(cfg.eval.history_bytes), mode, Style::kUc,
            cfg.eval.fixed_style_text, ModeFromString(cfg.decode_mode), cfg.decoding);
        for (size_t i = 0; i < results.size(); ++i) {
          const SynthUtterance& utt =
              wb.corpus.test[static_cast<size_t>(session.utt_indices[i])];
          counts.Add(ScoreNormalized(utt.text_mcp, results[i].hypothesis));
          refs.push_back(utt.text_mcp);
          hyps.push_back(results[i].hypothesis);
        }
      }
      ConditionResult cond;
      cond.counts = counts;
      cond.rare_word_error_rate = RareWordErrorRate(refs, hyps, rare_set);
      rep.conditions["K=" + std::to_string(k) + ":" + HistoryModeName(mode)] = cond;
      if (csv_rows) csv_rows->push_back({k, HistoryModeName(mode), counts.Wer()});
    }
  }
  return rep;
}

void CmdSynth(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Workbench wb = BuildWorkbench(cfg);
  const std::string hash = ConfigHash(cfg);
  SaveUtterances(out_dir + "/train.jsonl", wb.corpus.train, hash, cfg.seed);
  SaveUtterances(out_dir + "/dev.jsonl", wb.corpus.dev, hash, cfg.seed);
  SaveUtterances(out_dir + "/test.jsonl", wb.corpus.test, hash, cfg.seed);
  SaveUtterances(out_dir + "/dev_memo.jsonl", wb.corpus.dev_memo, hash, cfg.seed);
  SaveLexicon(out_dir + "/lexicon.json", wb.corpus.lexicon, hash, cfg.seed);
  std::cout << "synth: " << wb.corpus.train.size() << " train / " << wb.corpus.dev.size()
            << " dev / " << wb.corpus.test.size() << " test utterances, tokenizer vocab "
            << wb.bpe.vocab_size() << "\n";
}

void CmdPretrainText(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Workbench wb = BuildWorkbench(cfg);
  std::vector<float> curve;
  TextEncoder<float> enc = PretrainTextEncoder(cfg, wb, &curve);
  SaveTextEncoderCheckpoint(out_dir + "/text_encoder.ckpt", enc, ConfigHash(cfg), cfg.seed);
  std::vector<json> lines;
  lines.reserve(curve.size());
  for (size_t i = 0; i < curve.size(); ++i) {
    lines.push_back(json{{"step", i}, {"loss", curve[i]}});
  }
  WriteLines(out_dir + "/pretrain_log.jsonl", MetaJson(cfg), lines);
  std::cout << "pretrain-text: " << curve.size() << " steps, final loss "
            << (curve.empty() ? 0.0f : curve.back()) << "\n";
}

void CmdTrain(const RunConfig& cfg, const std::string& out_dir, TrainVariant variant) {
  std::filesystem::create_directories(out_dir);
  const Workbench wb = BuildWorkbench(cfg);
  TextEncoder<float> enc = LoadTextEncoderCheckpoint(out_dir + "/text_encoder.ckpt");
  if (!(enc.cfg == FinalTextEncoderConfig(cfg, wb.bpe))) {
    throw ContractError(
        "train: text encoder checkpoint geometry does not match this config; rerun pretrain-text");
  }
  TrainedAsr trained = TrainAsr(cfg, wb, std::move(enc), variant);
  const std::string name = TrainVariantName(variant);
  SaveAsrCheckpoint(out_dir + "/asr_" + name + ".ckpt", trained.model, trained.text_enc,
                    ConfigHash(cfg), cfg.seed);
  std::vector<json> lines;
  lines.reserve(trained.losses.size());
  for (size_t i = 0; i < trained.losses.size(); ++i) {
    lines.push_back(json{{"step", i}, {"loss", trained.losses[i]}});
  }
  json meta = MetaJson(cfg);
  meta["variant"] = name;
  WriteLines(out_dir + "/train_log_" + name + ".jsonl", meta, lines);
  std::cout << "train[" << name << "]: " << trained.losses.size() << " steps, final loss "
            << (trained.losses.empty() ? 0.0f : trained.losses.back()) << "\n";
}

void CmdDecode(const RunConfig& cfg, const std::string& out_dir, const DecodeCmdOptions& opts) {
  if (opts.style != "uc" && opts.style != "mcp") {
    throw ConfigError("config: decode style must be 'uc' or 'mcp'");
  }
  if (opts.prompt_mode != "none" && opts.prompt_mode != "history" &&
      opts.prompt_mode != "wordlist") {
    throw ConfigError("config: decode prompt mode must be none, history, or wordlist");
  }
  std::filesystem::create_directories(out_dir);
  const Workbench wb = BuildWorkbench(cfg);
  const std::string ckpt_path =
      opts.ckpt_path.empty() ? out_dir + "/asr_full.ckpt" : opts.ckpt_path;
  LoadedAsr la = LoadAsrCheckpoint(ckpt_path);
  const std::vector<SynthUtterance>& utts = SplitUtts(wb.corpus, opts.split);
  const Style style = StyleFromName(opts.style);

  const RareWordSet rare_set = EvalRareSet(cfg, wb.corpus);
  const std::vector<std::string> pool = PoolFromRareSet(rare_set);
  Rng wl_rng = Rng(cfg.seed).derive(kTagDecodeWordlist);

  std::vector<json> lines;
  lines.reserve(utts.size());
  for (const SynthUtterance& utt : utts) {
    std::string content;
    if (opts.prompt_mode == "history") {
      content =
          TruncateHistory(utt.preceding_text, static_cast<size_t>(cfg.eval.history_bytes));
    } else if (opts.prompt_mode == "wordlist") {
      content = SerializeWordList(MakeBiasingPrompt(UtteranceWords(utt.text_mcp), rare_set, pool,
                                                    wl_rng, cfg.eval.pure_distractor_n));
    }
    DecodeResult res = DecodeOne(cfg, wb, la.model, la.text_enc, utt, content, style);
    lines.push_back(json{{"utt_id", utt.utt_id},
                         {"hypothesis", wb.bpe.Decode(res.tokens)},
                         {"score", res.score},
                         {"prompt_used", content},
                         {"style", StyleName(style)}});
  }
  json meta = MetaJson(cfg);
  meta["model"] = ckpt_path;
  meta["split"] = opts.split;
  meta["prompt_mode"] = opts.prompt_mode;
  meta["style"] = opts.style;
  meta["decode_mode"] = cfg.decode_mode;
  const std::string path =
      out_dir + "/decode_" + opts.split + "_" + opts.prompt_mode + "_" + opts.style + ".jsonl";
  WriteLines(path, meta, lines);
  std::cout << "decode: " << lines.size() << " utterances -> " << path << "\n";
}

void CmdEval(const RunConfig& cfg, const std::string& out_dir, const std::string& protocol,
             const std::string& ckpt_path) {
  std::filesystem::create_directories(out_dir);
  const Workbench wb = BuildWorkbench(cfg);
  const std::string path = ckpt_path.empty() ? out_dir + "/asr_full.ckpt" : ckpt_path;
  LoadedAsr la = LoadAsrCheckpoint(path);
  if (protocol == "context") {
    SaveReport(out_dir + "/eval_context.json",
               RunContextEval(cfg, wb, la.model, la.text_enc, path));
  } else if (protocol == "biasing") {
    SaveReport(out_dir + "/eval_biasing.json",
               RunBiasingEval(cfg, wb, la.model, la.text_enc, path));
  } else if (protocol == "longform") {
    std::vector<LongformCsvRow> rows;
    EvalReport rep = RunLongformEval(cfg, wb, la.model, la.text_enc, path, &rows);
    SaveReport(out_dir + "/eval_longform.json", rep);
    WriteLongformCsv(out_dir + "/longform_curve.csv", rows, ConfigHash(cfg), cfg.seed);
  } else {
    throw ConfigError("config: unknown eval protocol '" + protocol + "'");
  }
  std::cout << "eval[" << protocol << "]: done\n";
}

int RunCli(int argc, char** argv) {
  CLI::App app{"prompt-conditioned transducer toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // let global flags appear after the subcommand name
  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed_override = 0;
  bool has_seed_override = false;
  app.add_option("--config", config_path, "JSON run config (defaults when omitted)");
  app.add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { has_seed_override = true; });
  app.add_option("--out", out_dir, "output directory");

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  CLI::App* pretrain = app.add_subcommand("pretrain-text", "pretrain the text encoder (MLM)");

  CLI::App* train = app.add_subcommand("train", "train a transducer variant");
  std::string variant_name = "full";
  train->add_option("--variant", variant_name, "full | no_wordlist | baseline");

  CLI::App* decode = app.add_subcommand("decode", "decode one split to JSONL");
  DecodeCmdOptions dopts;
  decode->add_option("--ckpt", dopts.ckpt_path, "checkpoint path (default <out>/asr_full.ckpt)");
  decode->add_option("--split", dopts.split, "train | dev | test | dev_memo");
  decode->add_option("--prompt-mode", dopts.prompt_mode, "none | history | wordlist");
  decode->add_option("--style", dopts.style, "uc | mcp");

  CLI::App* eval = app.add_subcommand("eval", "run an evaluation protocol");
  std::string protocol = "context";
  std::string eval_ckpt;
  eval->add_option("--protocol", protocol, "context | biasing | longform");
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path (default <out>/asr_full.ckpt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors; --help is success
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = LoadRunConfig(config_path);
    if (has_seed_override) cfg.seed = seed_override;
    ValidateRunConfig(cfg);
    if (synth->parsed()) {
      CmdSynth(cfg, out_dir);
    } else if (pretrain->parsed()) {
      CmdPretrainText(cfg, out_dir);
    } else if (train->parsed()) {
      CmdTrain(cfg, out_dir, TrainVariantFromName(variant_name));
    } else if (decode->parsed()) {
      CmdDecode(cfg, out_dir, dopts);
    } else if (eval->parsed()) {
      CmdEval(cfg, out_dir, protocol, eval_ckpt);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ctxasr
