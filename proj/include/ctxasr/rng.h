// include/ctxasr/rng.h
//
// Copyright (c)  2026  ctxasr authors
//
// Deterministic random source.  Distribution helpers are hand rolled on top
// of std::mt19937_64 (whose output sequence is fixed by the standard) so that
// every stream is reproducible bit for bit regardless of the C++ standard
// library in use.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ctxasr {

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(SplitMix64(seed)) {}

  uint64_t next() { return gen_(); }

  // Independent child stream.  Depends only on the constructor seed and the
  // tag, never on how many draws were made from this stream.
  Rng derive(uint64_t tag) const { return Rng(SplitMix64(seed_ ^ SplitMix64(tag))); }

  uint64_t seed() const { return seed_; }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], both bounds inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (hi < lo) return lo;
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(next());  // full 64-bit range
    // Multiply-shift bounded draw (bias below 2^-64, fully deterministic).
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * span;
    return lo + static_cast<int64_t>(static_cast<uint64_t>(m >> 64));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; spare value cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925287 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ctxasr
