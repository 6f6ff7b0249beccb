// include/ctxasr/checkpoint.h
//
// Copyright (c)  2026  ctxasr authors
//
// Flat parameter archive: a fixed magic + version header, an embedded
// config JSON string, then (name, shape, little-endian f32 data) entries
// sorted by name.  Loading validates names and shapes strictly, so a
// checkpoint only ever restores into a model of the exact same geometry.

#ifndef CTXASR_CHECKPOINT_H_
#define CTXASR_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxasr/nn.h"
#include "ctxasr/tensor.h"

namespace ctxasr {

inline constexpr char kCheckpointMagic[8] = {'C', 'T', 'X', 'C',
                                             'K', 'P', 'T', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::vector<int64_t> shape;
  std::vector<float> values;  // row-major, shape product elements
  bool operator==(const CheckpointEntry&) const = default;
};

struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  std::string config_json;  // model geometry, validated by the caller
  std::map<std::string, CheckpointEntry> entries;
  bool operator==(const Checkpoint&) const = default;
};

// Serialization to/from the binary archive format.  Both throw
// ContractError on I/O failure; Load also throws on a bad magic, an
// unsupported version, or a malformed/truncated payload.
void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::string& path);

// Snapshot of every parameter in the store (f32, row-major).
template <typename T>
Checkpoint CheckpointFromParams(const ParamStore<T>& store,
                                const std::string& config_json) {
  Checkpoint ckpt;
  ckpt.config_json = config_json;
  for (const auto& name : store.names()) {
    const Tensor<T> t = store.get(name);  // shared handle onto the parameter
    CheckpointEntry e;
    e.shape = t.shape();
    e.values.reserve(t.data().size());
    for (T v : t.data()) e.values.push_back(static_cast<float>(v));
    ckpt.entries.emplace(name, std::move(e));
  }
  return ckpt;
}

// Restores every parameter of the store from the checkpoint.  The sets of
// names must match exactly in both directions and every shape must agree;
// any difference raises ContractError naming the offending entry.
template <typename T>
void LoadParamsFromCheckpoint(const Checkpoint& ckpt, ParamStore<T>& store) {
  for (const auto& name : store.names()) {
    if (ckpt.entries.find(name) == ckpt.entries.end()) {
      throw ContractError("checkpoint: missing entry '" + name + "'");
    }
  }
  for (const auto& [name, entry] : ckpt.entries) {
    if (!store.has(name)) {
      throw ContractError("checkpoint: unexpected entry '" + name + "'");
    }
    Tensor<T> t = store.get(name);  // shared handle onto the parameter
    if (entry.shape != t.shape()) {
      throw ContractError("checkpoint: shape mismatch for '" + name + "'");
    }
    if (entry.values.size() != t.data().size()) {
      throw ContractError("checkpoint: size mismatch for '" + name + "'");
    }
    for (size_t i = 0; i < entry.values.size(); ++i) {
      t.data()[i] = static_cast<T>(entry.values[i]);
    }
  }
}

}  // namespace ctxasr

#endif  // CTXASR_CHECKPOINT_H_
