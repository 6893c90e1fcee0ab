// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semc/autograd/conv.hpp"
#include "semc/autograd/ops.hpp"
#include "semc/core/rng.hpp"

namespace semc {

/// Named handle to a trainable tensor. `decay` marks participation in weight
/// decay; biases and normalization parameters opt out.
template <typename S>
struct ParamRef {
  std::string name;
  Var<S> var;
  bool decay = true;
};

/// Named handle to a non-trainable state tensor (running statistics).
template <typename S>
struct BufferRef {
  std::string name;
  Tensor<S>* tensor = nullptr;
};

template <typename S>
struct Conv2d {
  Var<S> weight;  // [cout, cin/groups, k, k]
  Var<S> bias;    // undefined when constructed without one
  Index stride = 1;
  Index pad = 0;
  Index groups = 1;

  Conv2d() = default;

  Conv2d(Index cin, Index cout, Index kernel, Index stride_, Index pad_, Index groups_,
         bool with_bias, Rng& rng)
      : stride(stride_), pad(pad_), groups(groups_) {
    Tensor<S> w({cout, cin / groups_, kernel, kernel});
    const double fan_out = double(cout) * double(kernel) * double(kernel) / double(groups_);
    w.set_normal(rng, S(0), S(std::sqrt(2.0 / fan_out)));
    weight = Var<S>::leaf(std::move(w), true);
    if (with_bias) bias = Var<S>::leaf(Tensor<S>({cout}), true);
  }

  Var<S> operator()(const Var<S>& x) const {
    return conv2d(x, weight, bias, stride, pad, groups);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".weight", weight, true});
    if (bias.defined()) out.push_back({prefix + ".bias", bias, false});
  }
};

template <typename S>
struct BatchNorm2d {
  Var<S> gamma;
  Var<S> beta;
  Tensor<S> running_mean;
  Tensor<S> running_var;
  S momentum = S(0.1);
  S eps = S(1e-5);

  BatchNorm2d() = default;

  explicit BatchNorm2d(Index channels)
      : gamma(Var<S>::leaf(Tensor<S>::ones({channels}), true)),
        beta(Var<S>::leaf(Tensor<S>({channels}), true)),
        running_mean({channels}),
        running_var(Tensor<S>::ones({channels})) {}

  Var<S> operator()(const Var<S>& x, bool training) {
    return batchnorm2d(x, gamma, beta, running_mean, running_var, training, momentum,
                       eps);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".gamma", gamma, false});
    out.push_back({prefix + ".beta", beta, false});
  }

  void collect_buffers(const std::string& prefix, std::vector<BufferRef<S>>& out) {
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
  }
};

template <typename S>
struct LinearLayer {
  Var<S> weight;  // [out, in]
  Var<S> bias;

  LinearLayer() = default;

  LinearLayer(Index in, Index out, bool with_bias, Rng& rng) {
    Tensor<S> w({out, in});
    w.set_normal(rng, S(0), S(std::sqrt(1.0 / double(in))));
    weight = Var<S>::leaf(std::move(w), true);
    if (with_bias) bias = Var<S>::leaf(Tensor<S>({out}), true);
  }

  Var<S> operator()(const Var<S>& x) const { return linear(x, weight, bias); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".weight", weight, true});
    if (bias.defined()) out.push_back({prefix + ".bias", bias, false});
  }
};

/// Total element count across a parameter list.
template <typename S>
Index param_count(const std::vector<ParamRef<S>>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.var.numel();
  return n;
}

}  // namespace semc
