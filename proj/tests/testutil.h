// tests/testutil.h
//
// Copyright (c)  2026  ctxasr authors
//
// Shared test oracles.  These are written independently of the library code
// paths they validate: a triple-loop matrix product, a central-difference
// gradient checker, and small helpers for random test data.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ctxasr/tensor.h"

namespace ctxasr::test {

// Naive triple-loop reference product, deliberately distinct from the
// library's loop ordering.
inline std::vector<double> NaiveMatMul(const std::vector<double>& a, const std::vector<double>& b,
                                       int64_t p, int64_t q, int64_t r) {
  std::vector<double> c(static_cast<size_t>(p * r), 0.0);
  for (int64_t i = 0; i < p; ++i) {
    for (int64_t j = 0; j < r; ++j) {
      double acc = 0.0;
      for (int64_t k = 0; k < q; ++k) {
        acc += a[static_cast<size_t>(i * q + k)] * b[static_cast<size_t>(k * r + j)];
      }
      c[static_cast<size_t>(i * r + j)] = acc;
    }
  }
  return c;
}

struct GradCheckResult {
  bool ok = true;
  double worst_rel = 0.0;
  std::string detail;
};

// Central finite differences against analytic gradients, in double precision.
// loss_fn must rebuild the forward graph from the current parameter values on
// every call.  rel error per element: |a - f| / max(|a|, |f|, floor).
inline GradCheckResult CheckGradients(std::vector<Tensor<double>> params,
                                      const std::function<Tensor<double>()>& loss_fn,
                                      double h = 1e-4, double tol = 1e-4, double floor = 1e-4) {
  GradCheckResult res;
  for (auto& p : params) p.zero_grad();
  Tensor<double> loss = loss_fn();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.data().size(), 0.0));
  }
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi].data();
    for (size_t k = 0; k < data.size(); ++k) {
      const double orig = data[k];
      double lp, lm;
      {
        NoGradGuard ng;
        data[k] = orig + h;
        lp = loss_fn().item();
        data[k] = orig - h;
        lm = loss_fn().item();
        data[k] = orig;
      }
      const double fd = (lp - lm) / (2.0 * h);
      const double an = analytic[pi][k];
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor});
      res.worst_rel = std::max(res.worst_rel, rel);
      if (rel > tol && res.ok) {
        res.ok = false;
        res.detail = "param " + std::to_string(pi) + " elem " + std::to_string(k) +
                     ": analytic " + std::to_string(an) + " fd " + std::to_string(fd);
      }
    }
  }
  for (auto& p : params) p.zero_grad();
  return res;
}

}  // namespace ctxasr::test
