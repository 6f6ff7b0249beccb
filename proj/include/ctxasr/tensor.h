// include/ctxasr/tensor.h
//
// Copyright (c)  2026  ctxasr authors
//
// Dense row-major tensors with reverse-mode automatic differentiation.
// The scalar type is a template parameter: models train in float and the
// same code runs in double for finite-difference gradient checks.
//
// Every operation that produces a tensor records its inputs and a backward
// rule; backward() walks the recorded graph in reverse topological order.
// Tensors are immutable once created except through optimizer updates that
// write directly into leaf parameter storage.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ctxasr/rng.h"

namespace ctxasr {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string ShapeStr(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace detail {
inline thread_local bool g_grad_enabled = true;
}  // namespace detail

inline bool GradEnabled() { return detail::g_grad_enabled; }

// Disables graph recording for its lifetime (inference / frozen submodules).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
  ~NoGradGuard() { detail::g_grad_enabled = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
struct Node {
  std::vector<int64_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward;  // accumulates into parents' grads

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }

  static Tensor zeros(std::vector<int64_t> shape) {
    return full(std::move(shape), T(0));
  }

  static Tensor full(std::vector<int64_t> shape, T value) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->data.assign(static_cast<size_t>(n->numel()), value);
    return Tensor(std::move(n));
  }

  static Tensor from_data(std::vector<int64_t> shape, std::vector<T> data) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    if (static_cast<int64_t>(data.size()) != n->numel()) {
      throw ShapeError("from_data: " + std::to_string(data.size()) +
                       " values for shape " + ShapeStr(n->shape));
    }
    n->data = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor randn(std::vector<int64_t> shape, Rng& rng, T stddev) {
    auto t = zeros(std::move(shape));
    for (auto& x : t.data()) x = static_cast<T>(rng.gaussian()) * stddev;
    return t;
  }

  const std::vector<int64_t>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return node_->numel(); }
  int64_t rows() const { return node_->shape.at(0); }
  int64_t cols() const { return node_->shape.at(1); }

  std::vector<T>& data() { return node_->data; }
  const std::vector<T>& data() const { return node_->data; }

  T item() const {
    if (numel() != 1) throw ContractError("item: tensor has " + std::to_string(numel()) + " elements");
    return node_->data[0];
  }

  T at(int64_t i, int64_t j) const { return node_->data[static_cast<size_t>(i * cols() + j)]; }

  void set_requires_grad(bool b) { node_->requires_grad = b; }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  std::shared_ptr<Node<T>> node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Wires a result node into the graph.  backward is recorded only when grad
// mode is on and some parent participates in differentiation.
template <typename T>
Tensor<T> MakeResult(std::vector<int64_t> shape, std::vector<T> data,
                     std::vector<Tensor<T>> parents,
                     std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool track = false;
  if (GradEnabled()) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  if (track) {
    n->requires_grad = true;
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

// ---------------------------------------------------------------------------
// Elementwise and shape utilities
// ---------------------------------------------------------------------------

template <typename T>
void CheckSameShape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + ShapeStr(a.shape()) +
                     " vs " + ShapeStr(b.shape()));
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  CheckSameShape(a, b, "add");
  std::vector<T> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto an = a.node();
  auto bn = b.node();
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  CheckSameShape(a, b, "sub");
  std::vector<T> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto an = a.node();
  auto bn = b.node();
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  CheckSameShape(a, b, "mul");
  std::vector<T> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  auto an = a.node();
  auto bn = b.node();
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i] * an->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.data());
  for (auto& x : out) x *= c;
  auto an = a.node();
  return MakeResult<T>(a.shape(), std::move(out), {a}, [an, c](Node<T>& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * c;
  });
}

// Broadcasts a length-d vector over the rows of an n x d matrix.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.rank() != 2 || v.rank() != 1 || x.cols() != v.dim(0)) {
    throw ShapeError("add_bias: " + ShapeStr(x.shape()) + " vs " + ShapeStr(v.shape()));
  }
  const int64_t n = x.rows(), d = x.cols();
  std::vector<T> out(x.data());
  const auto& vd = v.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(i * d + j)] += vd[static_cast<size_t>(j)];
  auto xn = x.node();
  auto vn = v.node();
  return MakeResult<T>(x.shape(), std::move(out), {x, v}, [xn, vn, n, d](Node<T>& o) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j)
          vn->grad[static_cast<size_t>(j)] += o.grad[static_cast<size_t>(i * d + j)];
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

template <typename T>
void MatMulAccum(const T* a, const T* b, T* c, int64_t p, int64_t q, int64_t r) {
  // c (p x r) += a (p x q) @ b (q x r); i-k-j order keeps inner loops contiguous
  for (int64_t i = 0; i < p; ++i) {
    T* crow = c + i * r;
    const T* arow = a + i * q;
    for (int64_t k = 0; k < q; ++k) {
      const T aik = arow[k];
      if (aik == T(0)) continue;
      const T* brow = b + k * r;
      for (int64_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: " + ShapeStr(a.shape()) + " x " + ShapeStr(b.shape()));
  }
  const int64_t p = a.rows(), q = a.cols(), r = b.cols();
  std::vector<T> out(static_cast<size_t>(p * r), T(0));
  MatMulAccum(a.data().data(), b.data().data(), out.data(), p, q, r);
  auto an = a.node();
  auto bn = b.node();
  return MakeResult<T>({p, r}, std::move(out), {a, b}, [an, bn, p, q, r](Node<T>& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      // dA[i,k] += sum_j dC[i,j] * B[k,j]
      for (int64_t i = 0; i < p; ++i) {
        const T* grow = o.grad.data() + i * r;
        T* arow = an->grad.data() + i * q;
        for (int64_t k = 0; k < q; ++k) {
          const T* brow = bn->data.data() + k * r;
          T acc = T(0);
          for (int64_t j = 0; j < r; ++j) acc += grow[j] * brow[j];
          arow[k] += acc;
        }
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      // dB[k,j] += sum_i A[i,k] * dC[i,j]
      for (int64_t i = 0; i < p; ++i) {
        const T* arow = an->data.data() + i * q;
        const T* grow = o.grad.data() + i * r;
        for (int64_t k = 0; k < q; ++k) {
          const T aik = arow[k];
          if (aik == T(0)) continue;
          T* brow = bn->grad.data() + k * r;
          for (int64_t j = 0; j < r; ++j) brow[j] += aik * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose: rank " + std::to_string(a.rank()));
  const int64_t n = a.rows(), d = a.cols();
  std::vector<T> out(static_cast<size_t>(n * d));
  const auto& ad = a.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j)
      out[static_cast<size_t>(j * n + i)] = ad[static_cast<size_t>(i * d + j)];
  auto an = a.node();
  return MakeResult<T>({d, n}, std::move(out), {a}, [an, n, d](Node<T>& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j)
        an->grad[static_cast<size_t>(i * d + j)] += o.grad[static_cast<size_t>(j * n + i)];
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.data());
  for (auto& x : out) x = x > T(0) ? x : T(0);
  auto an = a.node();
  return MakeResult<T>(a.shape(), std::move(out), {a}, [an](Node<T>& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i)
      if (an->data[i] > T(0)) an->grad[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
  std::vector<T> out(a.data());
  for (auto& x : out) x = std::tanh(x);
  auto an = a.node();
  return MakeResult<T>(a.shape(), std::move(out), {a}, [an](Node<T>& o) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      const T y = o.data[i];
      an->grad[i] += o.grad[i] * (T(1) - y * y);
    }
  });
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

struct AxisSpan {
  int64_t outer, n, inner;
};

template <typename T>
AxisSpan ResolveAxis(const Tensor<T>& x, int axis, const char* op) {
  if (axis < 0 || axis >= x.rank()) {
    throw ContractError(std::string(op) + ": axis " + std::to_string(axis) +
                        " out of range for rank " + std::to_string(x.rank()));
  }
  AxisSpan s{1, x.shape()[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= x.shape()[static_cast<size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) s.inner *= x.shape()[static_cast<size_t>(i)];
  return s;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const AxisSpan s = ResolveAxis(x, axis, "softmax");
  std::vector<T> out(x.data().size());
  const auto& xd = x.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t in = 0; in < s.inner; ++in) {
      const int64_t base = o * s.n * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t k = 0; k < s.n; ++k) mx = std::max(mx, xd[static_cast<size_t>(base + k * s.inner)]);
      T sum = T(0);
      for (int64_t k = 0; k < s.n; ++k) {
        const T e = std::exp(xd[static_cast<size_t>(base + k * s.inner)] - mx);
        out[static_cast<size_t>(base + k * s.inner)] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (int64_t k = 0; k < s.n; ++k) out[static_cast<size_t>(base + k * s.inner)] *= inv;
    }
  }
  auto xn = x.node();
  return MakeResult<T>(x.shape(), std::move(out), {x}, [xn, s](Node<T>& o) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t ot = 0; ot < s.outer; ++ot) {
      for (int64_t in = 0; in < s.inner; ++in) {
        const int64_t base = ot * s.n * s.inner + in;
        T dot = T(0);
        for (int64_t k = 0; k < s.n; ++k) {
          const size_t idx = static_cast<size_t>(base + k * s.inner);
          dot += o.grad[idx] * o.data[idx];
        }
        for (int64_t k = 0; k < s.n; ++k) {
          const size_t idx = static_cast<size_t>(base + k * s.inner);
          xn->grad[idx] += o.data[idx] * (o.grad[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis) {
  const AxisSpan s = ResolveAxis(x, axis, "log_softmax");
  std::vector<T> out(x.data().size());
  const auto& xd = x.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t in = 0; in < s.inner; ++in) {
      const int64_t base = o * s.n * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t k = 0; k < s.n; ++k) mx = std::max(mx, xd[static_cast<size_t>(base + k * s.inner)]);
      T sum = T(0);
      for (int64_t k = 0; k < s.n; ++k) sum += std::exp(xd[static_cast<size_t>(base + k * s.inner)] - mx);
      const T lse = mx + std::log(sum);
      for (int64_t k = 0; k < s.n; ++k) {
        const size_t idx = static_cast<size_t>(base + k * s.inner);
        out[idx] = xd[idx] - lse;
      }
    }
  }
  auto xn = x.node();
  return MakeResult<T>(x.shape(), std::move(out), {x}, [xn, s](Node<T>& o) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t ot = 0; ot < s.outer; ++ot) {
      for (int64_t in = 0; in < s.inner; ++in) {
        const int64_t base = ot * s.n * s.inner + in;
        T gsum = T(0);
        for (int64_t k = 0; k < s.n; ++k) gsum += o.grad[static_cast<size_t>(base + k * s.inner)];
        for (int64_t k = 0; k < s.n; ++k) {
          const size_t idx = static_cast<size_t>(base + k * s.inner);
          xn->grad[idx] += o.grad[idx] - std::exp(o.data[idx]) * gsum;
        }
      }
    }
  });
}

// Numerically stable log(sum(exp(v))) over a plain span; errors on empty input.
template <typename T>
T LogSumExp(std::span<const T> v) {
  if (v.empty()) throw ContractError("LogSumExp: empty input");
  T mx = -std::numeric_limits<T>::infinity();
  for (T x : v) mx = std::max(mx, x);
  if (std::isinf(mx) && mx < T(0)) return mx;  // all -inf
  T sum = T(0);
  for (T x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

template <typename T>
T LogSumExp2(T a, T b) {
  const T v[2] = {a, b};
  return LogSumExp(std::span<const T>(v, 2));
}

// ---------------------------------------------------------------------------
// Layer norm
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  if (x.rank() < 1) throw ShapeError("layer_norm: rank 0 input");
  const int64_t d = x.shape().back();
  if (gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != d || bias.dim(0) != d) {
    throw ShapeError("layer_norm: gain/bias must be length " + std::to_string(d));
  }
  if (eps <= T(0)) throw ContractError("layer_norm: eps must be > 0");
  const int64_t n = x.numel() / d;
  std::vector<T> out(x.data().size());
  const auto& xd = x.data();
  const auto& gd = gain.data();
  const auto& bd = bias.data();
  for (int64_t i = 0; i < n; ++i) {
    const T* row = xd.data() + i * d;
    T mu = T(0);
    for (int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (int64_t j = 0; j < d; ++j) {
      const T c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    T* orow = out.data() + i * d;
    for (int64_t j = 0; j < d; ++j) orow[j] = (row[j] - mu) * inv * gd[static_cast<size_t>(j)] + bd[static_cast<size_t>(j)];
  }
  auto xn = x.node();
  auto gn = gain.node();
  auto bn = bias.node();
  return MakeResult<T>(x.shape(), std::move(out), {x, gain, bias}, [xn, gn, bn, n, d, eps](Node<T>& o) {
    for (int64_t i = 0; i < n; ++i) {
      const T* row = xn->data.data() + i * d;
      const T* grow = o.grad.data() + i * d;
      T mu = T(0);
      for (int64_t j = 0; j < d; ++j) mu += row[j];
      mu /= static_cast<T>(d);
      T var = T(0);
      for (int64_t j = 0; j < d; ++j) {
        const T c = row[j] - mu;
        var += c * c;
      }
      var /= static_cast<T>(d);
      const T inv = T(1) / std::sqrt(var + eps);
      if (gn->requires_grad || bn->requires_grad) {
        if (gn->requires_grad) gn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (int64_t j = 0; j < d; ++j) {
          const T xhat = (row[j] - mu) * inv;
          if (gn->requires_grad) gn->grad[static_cast<size_t>(j)] += grow[j] * xhat;
          if (bn->requires_grad) bn->grad[static_cast<size_t>(j)] += grow[j];
        }
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        // dxhat = dy * gain; dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
        T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
        for (int64_t j = 0; j < d; ++j) {
          const T xhat = (row[j] - mu) * inv;
          const T dxhat = grow[j] * gn->data[static_cast<size_t>(j)];
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * xhat;
        }
        mean_dxhat /= static_cast<T>(d);
        mean_dxhat_xhat /= static_cast<T>(d);
        T* xgrow = xn->grad.data() + i * d;
        for (int64_t j = 0; j < d; ++j) {
          const T xhat = (row[j] - mu) * inv;
          const T dxhat = grow[j] * gn->data[static_cast<size_t>(j)];
          xgrow[j] += inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Gather / concat / slicing
// ---------------------------------------------------------------------------

// out[i, :] = x[ids[i], :]; backward scatter-adds (also serves as embedding lookup).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::vector<int64_t> ids) {
  if (x.rank() != 2) throw ShapeError("gather_rows: need rank-2 input");
  const int64_t n = x.rows(), d = x.cols();
  for (int64_t id : ids) {
    if (id < 0 || id >= n) {
      throw ContractError("gather_rows: index " + std::to_string(id) + " out of [0," +
                          std::to_string(n) + ")");
    }
  }
  const int64_t m = static_cast<int64_t>(ids.size());
  std::vector<T> out(static_cast<size_t>(m * d));
  const auto& xd = x.data();
  for (int64_t i = 0; i < m; ++i) {
    std::copy_n(xd.data() + ids[static_cast<size_t>(i)] * d, d, out.data() + i * d);
  }
  auto xn = x.node();
  return MakeResult<T>({m, d}, std::move(out), {x},
                       [xn, ids = std::move(ids), d](Node<T>& o) {
                         if (!xn->requires_grad) return;
                         xn->ensure_grad();
                         for (size_t i = 0; i < ids.size(); ++i) {
                           T* dst = xn->grad.data() + ids[i] * d;
                           const T* src = o.grad.data() + static_cast<int64_t>(i) * d;
                           for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
                         }
                       });
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, int axis) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("concat: rank-2 tensors only");
  if (axis == 0) {
    if (a.cols() != b.cols()) throw ShapeError("concat axis 0: " + ShapeStr(a.shape()) + " vs " + ShapeStr(b.shape()));
    const int64_t n1 = a.rows(), n2 = b.rows(), d = a.cols();
    std::vector<T> out;
    out.reserve(static_cast<size_t>((n1 + n2) * d));
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    auto an = a.node();
    auto bn = b.node();
    return MakeResult<T>({n1 + n2, d}, std::move(out), {a, b}, [an, bn, n1, d](Node<T>& o) {
      const size_t split = static_cast<size_t>(n1 * d);
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < split; ++i) an->grad[i] += o.grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = split; i < o.grad.size(); ++i) bn->grad[i - split] += o.grad[i];
      }
    });
  }
  if (axis == 1) {
    if (a.rows() != b.rows()) throw ShapeError("concat axis 1: " + ShapeStr(a.shape()) + " vs " + ShapeStr(b.shape()));
    const int64_t n = a.rows(), d1 = a.cols(), d2 = b.cols();
    std::vector<T> out(static_cast<size_t>(n * (d1 + d2)));
    for (int64_t i = 0; i < n; ++i) {
      std::copy_n(a.data().data() + i * d1, d1, out.data() + i * (d1 + d2));
      std::copy_n(b.data().data() + i * d2, d2, out.data() + i * (d1 + d2) + d1);
    }
    auto an = a.node();
    auto bn = b.node();
    return MakeResult<T>({n, d1 + d2}, std::move(out), {a, b}, [an, bn, n, d1, d2](Node<T>& o) {
      for (int64_t i = 0; i < n; ++i) {
        const T* grow = o.grad.data() + i * (d1 + d2);
        if (an->requires_grad) {
          an->ensure_grad();
          T* dst = an->grad.data() + i * d1;
          for (int64_t j = 0; j < d1; ++j) dst[j] += grow[j];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          T* dst = bn->grad.data() + i * d2;
          for (int64_t j = 0; j < d2; ++j) dst[j] += grow[d1 + j];
        }
      }
    });
  }
  throw ContractError("concat: axis must be 0 or 1");
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int64_t start, int64_t len) {
  if (x.rank() != 2) throw ShapeError("slice_cols: rank-2 input only");
  const int64_t n = x.rows(), d = x.cols();
  if (start < 0 || len < 0 || start + len > d) {
    throw ContractError("slice_cols: [" + std::to_string(start) + "," +
                        std::to_string(start + len) + ") out of " + std::to_string(d));
  }
  std::vector<T> out(static_cast<size_t>(n * len));
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(x.data().data() + i * d + start, len, out.data() + i * len);
  }
  auto xn = x.node();
  return MakeResult<T>({n, len}, std::move(out), {x}, [xn, n, d, start, len](Node<T>& o) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      T* dst = xn->grad.data() + i * d + start;
      const T* src = o.grad.data() + i * len;
      for (int64_t j = 0; j < len; ++j) dst[j] += src[j];
    }
  });
}

// 2x time subsampling: averages row pairs; a trailing odd row passes through.
template <typename T>
Tensor<T> pair_average_rows(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("pair_average_rows: rank-2 input only");
  const int64_t n = x.rows(), d = x.cols();
  if (n < 1) throw ContractError("pair_average_rows: empty input");
  const int64_t m = (n + 1) / 2;
  std::vector<T> out(static_cast<size_t>(m * d));
  const auto& xd = x.data();
  for (int64_t i = 0; i < m; ++i) {
    const int64_t r0 = 2 * i, r1 = 2 * i + 1;
    T* orow = out.data() + i * d;
    if (r1 < n) {
      for (int64_t j = 0; j < d; ++j)
        orow[j] = (xd[static_cast<size_t>(r0 * d + j)] + xd[static_cast<size_t>(r1 * d + j)]) * T(0.5);
    } else {
      std::copy_n(xd.data() + r0 * d, d, orow);
    }
  }
  auto xn = x.node();
  return MakeResult<T>({m, d}, std::move(out), {x}, [xn, n, d, m](Node<T>& o) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t i = 0; i < m; ++i) {
      const int64_t r0 = 2 * i, r1 = 2 * i + 1;
      const T* grow = o.grad.data() + i * d;
      if (r1 < n) {
        for (int64_t j = 0; j < d; ++j) {
          xn->grad[static_cast<size_t>(r0 * d + j)] += grow[j] * T(0.5);
          xn->grad[static_cast<size_t>(r1 * d + j)] += grow[j] * T(0.5);
        }
      } else {
        for (int64_t j = 0; j < d; ++j) xn->grad[static_cast<size_t>(r0 * d + j)] += grow[j];
      }
    }
  });
}

// out[i*m + j, :] = a[i, :] + b[j, :].  Used to combine encoder and predictor
// states into the full (T x U) joint grid with two matrix products.
template <typename T>
Tensor<T> outer_add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ShapeError("outer_add: " + ShapeStr(a.shape()) + " vs " + ShapeStr(b.shape()));
  }
  const int64_t n = a.rows(), m = b.rows(), d = a.cols();
  std::vector<T> out(static_cast<size_t>(n * m * d));
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < m; ++j) {
      T* orow = out.data() + (i * m + j) * d;
      const T* arow = ad.data() + i * d;
      const T* brow = bd.data() + j * d;
      for (int64_t k = 0; k < d; ++k) orow[k] = arow[k] + brow[k];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return MakeResult<T>({n * m, d}, std::move(out), {a, b}, [an, bn, n, m, d](Node<T>& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        T* arow = an->grad.data() + i * d;
        for (int64_t j = 0; j < m; ++j) {
          const T* grow = o.grad.data() + (i * m + j) * d;
          for (int64_t k = 0; k < d; ++k) arow[k] += grow[k];
        }
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < m; ++j) {
          T* brow = bn->grad.data() + j * d;
          const T* grow = o.grad.data() + (i * m + j) * d;
          for (int64_t k = 0; k < d; ++k) brow[k] += grow[k];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  auto xn = x.node();
  return MakeResult<T>({1}, {s}, {x}, [xn](Node<T>& o) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (auto& g : xn->grad) g += o.grad[0];
  });
}

// Mean negative log likelihood of targets[i] under log_probs row i.
template <typename T>
Tensor<T> nll_mean(const Tensor<T>& log_probs, const std::vector<int64_t>& targets) {
  if (log_probs.rank() != 2) throw ShapeError("nll_mean: rank-2 log_probs required");
  const int64_t n = log_probs.rows(), v = log_probs.cols();
  if (n == 0 || static_cast<int64_t>(targets.size()) != n) {
    throw ContractError("nll_mean: need one target per row, rows=" + std::to_string(n));
  }
  for (int64_t t : targets) {
    if (t < 0 || t >= v) throw ContractError("nll_mean: target " + std::to_string(t) + " out of range");
  }
  T s = T(0);
  for (int64_t i = 0; i < n; ++i) s -= log_probs.data()[static_cast<size_t>(i * v + targets[static_cast<size_t>(i)])];
  s /= static_cast<T>(n);
  auto xn = log_probs.node();
  return MakeResult<T>({1}, {s}, {log_probs}, [xn, targets, n, v](Node<T>& o) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const T g = o.grad[0] / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i)
      xn->grad[static_cast<size_t>(i * v + targets[static_cast<size_t>(i)])] -= g;
  });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss.  Builds the topological order of the
// recorded graph, seeds d(loss)/d(loss) = 1, applies each backward rule in
// reverse, then releases the graph so intermediate buffers can be freed.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined tensor");
  if (loss.numel() != 1) throw ContractError("backward: loss must be scalar");
  auto root = loss.node();
  if (!root->parents.empty() && !root->backward && root->requires_grad) {
    throw ContractError("backward: graph already released");
  }
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  visited.insert(root.get());
  stack.emplace_back(root.get(), 0);
  while (!stack.empty()) {
    auto& top = stack.back();
    Node<T>* n = top.first;
    if (top.second < n->parents.size()) {
      Node<T>* p = n->parents[top.second++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->requires_grad && n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (Node<T>* n : order) {
    if (!n->parents.empty() || n->backward) {
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

}  // namespace ctxasr
