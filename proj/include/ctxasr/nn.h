// include/ctxasr/nn.h
//
// Copyright (c)  2026  ctxasr authors
//
// Parameter registry and the transformer building blocks shared by the text
// encoder and the speech encoder: linear layers, layer norm, multi-head
// attention and the position-wise feed-forward block.  All blocks are
// pre-norm with residual connections added by the caller.

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxasr/tensor.h"

namespace ctxasr {

// Named leaf parameters.  std::map keeps iteration order deterministic, which
// makes checkpoints and optimizer traversals reproducible.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> t) {
    if (params_.count(name)) throw ContractError("ParamStore: duplicate name " + name);
    t.set_requires_grad(true);
    params_.emplace(name, t);
    return t;
  }

  Tensor<T> get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("ParamStore: unknown name " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  std::vector<Tensor<T>> all() const {
    std::vector<Tensor<T>> out;
    out.reserve(params_.size());
    for (const auto& [_, t] : params_) out.push_back(t);
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : params_) out.push_back(n);
    return out;
  }

  const std::map<std::string, Tensor<T>>& map() const { return params_; }

 private:
  std::map<std::string, Tensor<T>> params_;
};

template <typename T>
struct Linear {
  Tensor<T> w;  // in x out
  Tensor<T> b;  // out
};

template <typename T>
Linear<T> MakeLinear(ParamStore<T>& store, const std::string& name, int64_t in, int64_t out,
                     Rng& rng, bool zero_init = false) {
  Linear<T> l;
  const T std = zero_init ? T(0) : static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
  l.w = store.add(name + ".w", Tensor<T>::randn({in, out}, rng, std));
  l.b = store.add(name + ".b", Tensor<T>::zeros({out}));
  return l;
}

template <typename T>
Tensor<T> ApplyLinear(const Tensor<T>& x, const Linear<T>& l) {
  return add_bias(matmul(x, l.w), l.b);
}

template <typename T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;
};

template <typename T>
LayerNormParams<T> MakeLayerNorm(ParamStore<T>& store, const std::string& name, int64_t d) {
  LayerNormParams<T> p;
  p.gain = store.add(name + ".gain", Tensor<T>::full({d}, T(1)));
  p.bias = store.add(name + ".bias", Tensor<T>::zeros({d}));
  return p;
}

template <typename T>
Tensor<T> ApplyLayerNorm(const Tensor<T>& x, const LayerNormParams<T>& p) {
  return layer_norm(x, p.gain, p.bias, T(1e-5));
}

// Multi-head attention.  Projections carry no bias so that zeroing the value
// projection makes the block an exact no-op inside its residual connection.
template <typename T>
struct Mha {
  Tensor<T> wq;  // d_q_in x d
  Tensor<T> wk;  // d_kv x d
  Tensor<T> wv;  // d_kv x d
  Tensor<T> wo;  // d x d_out
  int64_t heads = 1;
};

template <typename T>
Mha<T> MakeMha(ParamStore<T>& store, const std::string& name, int64_t d_q_in, int64_t d_kv,
               int64_t d, int64_t d_out, int64_t heads, Rng& rng) {
  if (d % heads != 0) throw ContractError("MakeMha: dim " + std::to_string(d) + " not divisible by heads");
  Mha<T> m;
  m.heads = heads;
  m.wq = store.add(name + ".wq", Tensor<T>::randn({d_q_in, d}, rng, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_q_in)))));
  m.wk = store.add(name + ".wk", Tensor<T>::randn({d_kv, d}, rng, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_kv)))));
  m.wv = store.add(name + ".wv", Tensor<T>::randn({d_kv, d}, rng, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_kv)))));
  m.wo = store.add(name + ".wo", Tensor<T>::randn({d, d_out}, rng, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)))));
  return m;
}

// q_in: n x d_q_in (queries), kv: m x d_kv (keys/values).  kv_valid, when
// present, marks rows that may be attended to; invalid rows get -inf scores
// and therefore exactly zero attention weight.  Rows of kv carry no position
// information here, so attention output is invariant to their order.
template <typename T>
Tensor<T> ApplyMha(const Tensor<T>& q_in, const Tensor<T>& kv, const Mha<T>& p,
                   const std::vector<uint8_t>* kv_valid = nullptr) {
  const int64_t m = kv.rows();
  if (m == 0) throw ContractError("ApplyMha: empty key/value set");
  if (kv_valid && static_cast<int64_t>(kv_valid->size()) != m) {
    throw ContractError("ApplyMha: validity mask size mismatch");
  }
  Tensor<T> q = matmul(q_in, p.wq);
  Tensor<T> k = matmul(kv, p.wk);
  Tensor<T> v = matmul(kv, p.wv);
  const int64_t d = q.cols();
  const int64_t dh = d / p.heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor<T> mask_row;
  if (kv_valid) {
    bool any_valid = false;
    std::vector<T> mr(static_cast<size_t>(m), T(0));
    for (int64_t j = 0; j < m; ++j) {
      if ((*kv_valid)[static_cast<size_t>(j)]) {
        any_valid = true;
      } else {
        mr[static_cast<size_t>(j)] = -std::numeric_limits<T>::infinity();
      }
    }
    if (!any_valid) throw ContractError("ApplyMha: all key/value rows masked out");
    mask_row = Tensor<T>::from_data({m}, std::move(mr));
  }
  Tensor<T> out;
  for (int64_t h = 0; h < p.heads; ++h) {
    Tensor<T> qh = slice_cols(q, h * dh, dh);
    Tensor<T> kh = slice_cols(k, h * dh, dh);
    Tensor<T> vh = slice_cols(v, h * dh, dh);
    Tensor<T> scores = scale(matmul(qh, transpose(kh)), inv_sqrt);  // n x m
    if (mask_row.defined()) scores = add_bias(scores, mask_row);
    Tensor<T> attn = softmax(scores, 1);
    Tensor<T> oh = matmul(attn, vh);
    out = (h == 0) ? oh : concat(out, oh, 1);
  }
  return matmul(out, p.wo);
}

template <typename T>
struct Ffn {
  Linear<T> up;
  Linear<T> down;
};

template <typename T>
Ffn<T> MakeFfn(ParamStore<T>& store, const std::string& name, int64_t d, int64_t hidden, Rng& rng) {
  Ffn<T> f;
  f.up = MakeLinear(store, name + ".up", d, hidden, rng);
  f.down = MakeLinear(store, name + ".down", hidden, d, rng);
  return f;
}

template <typename T>
Tensor<T> ApplyFfn(const Tensor<T>& x, const Ffn<T>& f) {
  return ApplyLinear(relu(ApplyLinear(x, f.up)), f.down);
}

// Fixed sinusoidal position encodings; computed, not trained.
template <typename T>
Tensor<T> SinusoidalPositions(int64_t len, int64_t dim) {
  std::vector<T> data(static_cast<size_t>(len * dim), T(0));
  for (int64_t p = 0; p < len; ++p) {
    for (int64_t i = 0; i * 2 < dim; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
      const double a = static_cast<double>(p) * freq;
      data[static_cast<size_t>(p * dim + 2 * i)] = static_cast<T>(std::sin(a));
      if (2 * i + 1 < dim) data[static_cast<size_t>(p * dim + 2 * i + 1)] = static_cast<T>(std::cos(a));
    }
  }
  return Tensor<T>::from_data({len, dim}, std::move(data));
}

}  // namespace ctxasr
