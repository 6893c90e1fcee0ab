// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "semc/core/error.hpp"
#include "semc/core/tensor.hpp"
#include "semc/nn/layers.hpp"

namespace semc::engine {

/// Stochastic gradient descent with classical momentum, decoupled per-tensor
/// weight-decay opt-out, and optional global-norm gradient clipping. Velocity
/// buffers are part of the training state and serialize into checkpoints.
template <typename S>
class SgdMomentum {
 public:
  SgdMomentum() = default;

  SgdMomentum(std::vector<ParamRef<S>> params, S momentum, S weight_decay, S clip_norm)
      : params_(std::move(params)),
        momentum_(momentum),
        weight_decay_(weight_decay),
        clip_norm_(clip_norm) {
    if (momentum_ < S(0) || momentum_ >= S(1)) {
      throw ConfigError("optimizer: momentum must lie in [0,1)");
    }
    if (weight_decay_ < S(0)) throw ConfigError("optimizer: weight decay must be >= 0");
    if (clip_norm_ < S(0)) throw ConfigError("optimizer: clip norm must be >= 0");
    velocity_.reserve(params_.size());
    for (const auto& p : params_) {
      velocity_.emplace_back(p.var.shape());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  /// One update with the given learning rate. Returns the pre-clip global
  /// gradient norm. Parameters whose gradient was never touched this step are
  /// treated as having zero gradient.
  S step(S lr) {
    double sq_sum = 0.0;
    for (const auto& p : params_) {
      const auto& g = p.var.grad();
      if (g.empty()) continue;
      sq_sum += double(g.array().square().sum());
    }
    if (!std::isfinite(sq_sum)) {
      throw NumericalError("optimizer: non-finite gradient norm");
    }
    const S norm = S(std::sqrt(sq_sum));
    S scale = S(1);
    if (clip_norm_ > S(0) && norm > clip_norm_) {
      scale = clip_norm_ / norm;
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      auto& v = velocity_[i];
      auto& value = p.var.value();
      const auto& g = p.var.grad();
      if (g.empty()) {
        v.array() *= momentum_;
      } else {
        const S wd = p.decay ? weight_decay_ : S(0);
        v.array() = momentum_ * v.array() + scale * g.array() + wd * value.array();
      }
      value.array() -= lr * v.array();
    }
    return norm;
  }

  std::vector<ParamRef<S>>& params() { return params_; }
  const std::vector<ParamRef<S>>& params() const { return params_; }
  std::vector<Tensor<S>>& velocities() { return velocity_; }
  const std::vector<Tensor<S>>& velocities() const { return velocity_; }

 private:
  std::vector<ParamRef<S>> params_;
  std::vector<Tensor<S>> velocity_;
  S momentum_ = S(0.9);
  S weight_decay_ = S(0);
  S clip_norm_ = S(0);
};

}  // namespace semc::engine
