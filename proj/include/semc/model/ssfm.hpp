// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "semc/nn/layers.hpp"

namespace semc {

struct SsfmConfig {
  Index reduction_ratio = 16;
  Index spatial_kernel = 7;
  std::vector<Index> scale_kernels = {1, 3, 5, 7};
  Index shuffle_groups = 0;  // 0 selects the number of scale kernels
  bool ace_double_norm = true;

  Index effective_groups() const {
    return shuffle_groups > 0 ? shuffle_groups : Index(scale_kernels.size());
  }

  void validate() const {
    if (reduction_ratio < 1) throw ConfigError("ssfm: reduction_ratio must be >= 1");
    if (spatial_kernel < 1 || spatial_kernel % 2 == 0) {
      throw ConfigError("ssfm: spatial_kernel must be odd and positive");
    }
    if (scale_kernels.empty()) throw ConfigError("ssfm: scale_kernels must be non-empty");
    for (Index k : scale_kernels) {
      if (k < 1 || k % 2 == 0) throw ConfigError("ssfm: scale kernels must be odd");
    }
  }
};

/// Alignment chain: L stride-2 stages of depthwise conv + norm + rectifier +
/// channel-doubling pointwise conv (+ optional second norm), then a pointwise
/// mapping to the deep channel count. L = 0 applies only the final mapping.
template <typename S>
struct AceBranch {
  struct Stage {
    Conv2d<S> dw;
    BatchNorm2d<S> bn1;
    Conv2d<S> pw;
    BatchNorm2d<S> bn2;
  };

  std::vector<Stage> stages;
  Conv2d<S> out_pw;
  BatchNorm2d<S> out_bn;
  bool double_norm = true;
  Index levels = 0;

  AceBranch() = default;

  AceBranch(Index c_in, Index num_levels, Index c_out, bool double_norm_, Rng& rng)
      : double_norm(double_norm_), levels(num_levels) {
    Index c = c_in;
    for (Index i = 0; i < num_levels; ++i) {
      Stage st;
      st.dw = Conv2d<S>(c, c, 3, 2, 1, c, false, rng);
      st.bn1 = BatchNorm2d<S>(c);
      st.pw = Conv2d<S>(c, 2 * c, 1, 1, 0, 1, false, rng);
      if (double_norm_) st.bn2 = BatchNorm2d<S>(2 * c);
      stages.push_back(std::move(st));
      c *= 2;
    }
    out_pw = Conv2d<S>(c, c_out, 1, 1, 0, 1, false, rng);
    out_bn = BatchNorm2d<S>(c_out);
  }

  Var<S> forward(const Var<S>& x, bool training) {
    if (x.dim(2) % (Index(1) << levels) != 0 || x.dim(3) % (Index(1) << levels) != 0) {
      throw ShapeError("ace: spatial size " + shape_str(x.shape()) + " not divisible by 2^" +
                       std::to_string(levels));
    }
    Var<S> h = x;
    for (auto& st : stages) {
      h = relu(st.bn1(st.dw(h), training));
      h = st.pw(h);
      if (double_norm) h = st.bn2(h, training);
    }
    return relu(out_bn(out_pw(h), training));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const std::string sp = prefix + ".stage" + std::to_string(i);
      stages[i].dw.collect(sp + ".dw", out);
      stages[i].bn1.collect(sp + ".bn1", out);
      stages[i].pw.collect(sp + ".pw", out);
      if (double_norm) stages[i].bn2.collect(sp + ".bn2", out);
    }
    out_pw.collect(prefix + ".out_pw", out);
    out_bn.collect(prefix + ".out_bn", out);
  }

  void collect_buffers(const std::string& prefix, std::vector<BufferRef<S>>& out) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const std::string sp = prefix + ".stage" + std::to_string(i);
      stages[i].bn1.collect_buffers(sp + ".bn1", out);
      if (double_norm) stages[i].bn2.collect_buffers(sp + ".bn2", out);
    }
    out_bn.collect_buffers(prefix + ".out_bn", out);
  }
};

/// Attention-guided multi-scale refinement: channel attention gates the fused
/// map, spatial attention gates the result, K parallel convolutions rebuild it
/// at several receptive fields, and a shuffled pointwise conv compresses back
/// to the input channel count.
template <typename S>
struct SamcBlock {
  LinearLayer<S> fc1, fc2;  // shared between the avg- and max-pool branches
  Conv2d<S> spatial_conv;
  std::vector<Conv2d<S>> scale_convs;
  Conv2d<S> compress;
  Index shuffle_groups = 1;
  bool force_attention_ones = false;  // test hook: bypass both attention gates

  SamcBlock() = default;

  SamcBlock(Index channels, const SsfmConfig& cfg, Rng& rng) {
    cfg.validate();
    if (channels % cfg.reduction_ratio != 0) {
      throw ConfigError("samc: " + std::to_string(channels) +
                        " channels not divisible by reduction ratio " +
                        std::to_string(cfg.reduction_ratio));
    }
    const Index hidden = channels / cfg.reduction_ratio;
    fc1 = LinearLayer<S>(channels, hidden, true, rng);
    fc2 = LinearLayer<S>(hidden, channels, true, rng);
    spatial_conv =
        Conv2d<S>(2, 1, cfg.spatial_kernel, 1, (cfg.spatial_kernel - 1) / 2, 1, true, rng);
    for (Index k : cfg.scale_kernels) {
      scale_convs.push_back(Conv2d<S>(channels, channels, k, 1, (k - 1) / 2, 1, true, rng));
    }
    const Index kc = Index(cfg.scale_kernels.size()) * channels;
    shuffle_groups = cfg.effective_groups();
    if (kc % shuffle_groups != 0) {
      throw ConfigError("samc: concatenated channels not divisible by shuffle groups");
    }
    compress = Conv2d<S>(kc, channels, 1, 1, 0, 1, true, rng);
  }

  /// sigmoid(FC2(relu(FC1(avgpool))) + FC2(relu(FC1(maxpool)))) per channel.
  Var<S> channel_attention(const Var<S>& m) const {
    auto avg_branch = fc2(relu(fc1(global_avg_pool(m))));
    auto max_branch = fc2(relu(fc1(global_max_pool(m))));
    return sigmoid(add(avg_branch, max_branch));
  }

  /// sigmoid(conv([channel-mean, channel-max])) over the channel-gated map.
  Var<S> spatial_attention(const Var<S>& gated) const {
    auto stacked = concat_channels<S>({channel_mean(gated), channel_max(gated)});
    return sigmoid(spatial_conv(stacked));
  }

  Var<S> forward(const Var<S>& m, bool /*training*/ = true) {
    Var<S> enhanced;
    if (force_attention_ones) {
      enhanced = m;
    } else {
      auto gated = scale_channels(m, channel_attention(m));
      enhanced = scale_spatial(gated, spatial_attention(gated));
    }
    std::vector<Var<S>> scales;
    scales.reserve(scale_convs.size());
    for (const auto& conv : scale_convs) scales.push_back(conv(enhanced));
    auto mixed = channel_shuffle(concat_channels<S>(scales), shuffle_groups);
    return compress(mixed);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
    spatial_conv.collect(prefix + ".spatial_conv", out);
    for (std::size_t i = 0; i < scale_convs.size(); ++i) {
      scale_convs[i].collect(prefix + ".scale" + std::to_string(i), out);
    }
    compress.collect(prefix + ".compress", out);
  }
};

/// One expert's fusion pipeline: align the paired shallow map, add it to the
/// deep map, refine with SAMC.
template <typename S>
struct SsfmBranch {
  AceBranch<S> ace;
  SamcBlock<S> samc;

  SsfmBranch() = default;

  SsfmBranch(Index shallow_channels, Index ace_levels, Index deep_channels,
             const SsfmConfig& cfg, Rng& rng)
      : ace(shallow_channels, ace_levels, deep_channels, cfg.ace_double_norm, rng),
        samc(deep_channels, cfg, rng) {}

  Var<S> fuse(const Var<S>& shallow, const Var<S>& deep, bool training) {
    auto aligned = ace.forward(shallow, training);
    if (aligned.shape() != deep.shape()) {
      throw ShapeError("ssfm: aligned map " + shape_str(aligned.shape()) +
                       " does not match deep map " + shape_str(deep.shape()));
    }
    return add(aligned, deep);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    ace.collect(prefix + ".ace", out);
    samc.collect(prefix + ".samc", out);
  }

  void collect_buffers(const std::string& prefix, std::vector<BufferRef<S>>& out) {
    ace.collect_buffers(prefix + ".ace", out);
  }
};

}  // namespace semc
