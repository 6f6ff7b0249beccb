// src/checkpoint.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace ctxasr {

namespace {

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutF32(std::string& out, float v) { PutU32(out, std::bit_cast<uint32_t>(v)); }

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void Need(size_t n) const {
    if (pos + n > buf.size()) throw ContractError("checkpoint: truncated file");
  }
  uint32_t U32() {
    Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t U64() {
    Need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float F32() { return std::bit_cast<float>(U32()); }
  std::string Bytes(size_t n) {
    Need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  PutU32(out, ckpt.version);
  PutU64(out, ckpt.config_json.size());
  out.append(ckpt.config_json);
  PutU64(out, ckpt.entries.size());
  for (const auto& [name, entry] : ckpt.entries) {  // std::map: sorted names
    PutU64(out, name.size());
    out.append(name);
    PutU32(out, static_cast<uint32_t>(entry.shape.size()));
    uint64_t numel = 1;
    for (int64_t d : entry.shape) {
      if (d < 0) throw ContractError("checkpoint: negative dim in '" + name + "'");
      PutU64(out, static_cast<uint64_t>(d));
      numel *= static_cast<uint64_t>(d);
    }
    if (entry.values.size() != numel) {
      throw ContractError("checkpoint: entry '" + name + "' has " +
                          std::to_string(entry.values.size()) + " values for shape product " +
                          std::to_string(numel));
    }
    for (float v : entry.values) PutF32(out, v);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ContractError("checkpoint: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ContractError("checkpoint: short write to '" + path + "'");
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractError("checkpoint: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  const std::string magic = r.Bytes(sizeof(kCheckpointMagic));
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw ContractError("checkpoint: bad magic in '" + path + "'");
  }
  Checkpoint ckpt;
  ckpt.version = r.U32();
  if (ckpt.version != kCheckpointVersion) {
    throw ContractError("checkpoint: unsupported version " + std::to_string(ckpt.version));
  }
  ckpt.config_json = r.Bytes(r.U64());
  const uint64_t n_entries = r.U64();
  for (uint64_t i = 0; i < n_entries; ++i) {
    const std::string name = r.Bytes(r.U64());
    CheckpointEntry entry;
    const uint32_t rank = r.U32();
    if (rank > 8) throw ContractError("checkpoint: implausible rank in '" + name + "'");
    uint64_t numel = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      const uint64_t d = r.U64();
      entry.shape.push_back(static_cast<int64_t>(d));
      numel *= d;
    }
    if (numel > (1ull << 32)) throw ContractError("checkpoint: implausible entry size in '" + name + "'");
    entry.values.reserve(numel);
    for (uint64_t k = 0; k < numel; ++k) entry.values.push_back(r.F32());
    if (!ckpt.entries.emplace(name, std::move(entry)).second) {
      throw ContractError("checkpoint: duplicate entry '" + name + "'");
    }
  }
  if (r.pos != buf.size()) throw ContractError("checkpoint: trailing bytes in '" + path + "'");
  return ckpt;
}

}  // namespace ctxasr
