// include/ctxasr/adam.h
//
// Copyright (c)  2026  ctxasr authors
//
// Adam with bias correction, operating directly on leaf parameter tensors.

#pragma once

#include <cmath>
#include <vector>

#include "ctxasr/tensor.h"

namespace ctxasr {

template <typename T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig<T> cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].data().size(), T(0));
      v_[i].assign(params_[i].data().size(), T(0));
    }
  }

  int64_t step_count() const { return t_; }
  const std::vector<Tensor<T>>& params() const { return params_; }

  T lr() const { return cfg_.lr; }
  void set_lr(T lr) { cfg_.lr = lr; }  // for external schedules

  // Scales all gradients so their global L2 norm is at most max_norm.
  // Returns the pre-clip norm.
  T clip_grad_norm(T max_norm) {
    T sq = T(0);
    for (auto& p : params_) {
      if (!p.has_grad()) continue;
      for (T g : p.grad()) sq += g * g;
    }
    const T norm = std::sqrt(sq);
    if (norm > max_norm && norm > T(0)) {
      const T s = max_norm / norm;
      for (auto& p : params_) {
        if (!p.has_grad()) continue;
        for (T& g : p.grad()) g *= s;
      }
    }
    return norm;
  }

  // One update; missing gradients are treated as zero.  Gradients are cleared
  // afterwards so the next backward pass starts fresh.
  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      auto& data = p.data();
      const bool has = p.has_grad();
      const std::vector<T>* grad = has ? &p.grad() : nullptr;
      for (size_t k = 0; k < data.size(); ++k) {
        const T g = has ? (*grad)[k] : T(0);
        m_[i][k] = cfg_.beta1 * m_[i][k] + (T(1) - cfg_.beta1) * g;
        v_[i][k] = cfg_.beta2 * v_[i][k] + (T(1) - cfg_.beta2) * g * g;
        const T mhat = m_[i][k] / bc1;
        const T vhat = v_[i][k] / bc2;
        data[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    zero_grad();
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::vector<Tensor<T>> params_;
  AdamConfig<T> cfg_;
  std::vector<std::vector<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace ctxasr
