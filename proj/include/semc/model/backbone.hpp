// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "semc/nn/layers.hpp"

namespace semc {

struct BackboneConfig {
  Index input_size = 512;
  Index in_channels = 1;
  std::array<Index, 4> stage_channels = {64, 128, 256, 512};
  Index blocks_per_stage = 2;
  Index num_experts = 3;
  bool clone_expert_init = false;

  void validate() const {
    if (input_size < 32 || input_size % 32 != 0) {
      throw ConfigError("backbone: input_size must be a positive multiple of 32, got " +
                        std::to_string(input_size));
    }
    if (in_channels < 1) throw ConfigError("backbone: in_channels must be >= 1");
    if (blocks_per_stage < 1) throw ConfigError("backbone: blocks_per_stage must be >= 1");
    if (num_experts < 2) {
      throw ConfigError("backbone: num_experts must be >= 2, got " +
                        std::to_string(num_experts));
    }
    for (int i = 0; i < 4; ++i) {
      if (stage_channels[std::size_t(i)] < 1) {
        throw ConfigError("backbone: stage_channels must be positive");
      }
      if (i > 0 && stage_channels[std::size_t(i)] != 2 * stage_channels[std::size_t(i - 1)]) {
        throw ConfigError("backbone: stage_channels must double at each stage");
      }
    }
  }
};

/// Multi-resolution output of one backbone pass: three shared-stage maps at
/// strides 4/8/16 and one stride-32 map per expert.
template <typename S>
struct FeaturePyramid {
  Var<S> f1, f2, f3;
  std::vector<Var<S>> experts;
};

/// Two 3x3 convolutions with identity (or 1x1-projected) shortcut.
template <typename S>
struct BasicBlock {
  Conv2d<S> conv1, conv2;
  BatchNorm2d<S> bn1, bn2;
  Conv2d<S> down_conv;
  BatchNorm2d<S> down_bn;
  bool has_down = false;

  BasicBlock() = default;

  BasicBlock(Index cin, Index cout, Index stride, Rng& rng)
      : conv1(cin, cout, 3, stride, 1, 1, false, rng),
        conv2(cout, cout, 3, 1, 1, 1, false, rng),
        bn1(cout),
        bn2(cout),
        has_down(stride != 1 || cin != cout) {
    if (has_down) {
      down_conv = Conv2d<S>(cin, cout, 1, stride, 0, 1, false, rng);
      down_bn = BatchNorm2d<S>(cout);
    }
  }

  Var<S> forward(const Var<S>& x, bool training) {
    auto h = relu(bn1(conv1(x), training));
    h = bn2(conv2(h), training);
    auto shortcut = has_down ? down_bn(down_conv(x), training) : x;
    return relu(add(h, shortcut));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    conv1.collect(prefix + ".conv1", out);
    bn1.collect(prefix + ".bn1", out);
    conv2.collect(prefix + ".conv2", out);
    bn2.collect(prefix + ".bn2", out);
    if (has_down) {
      down_conv.collect(prefix + ".down_conv", out);
      down_bn.collect(prefix + ".down_bn", out);
    }
  }

  void collect_buffers(const std::string& prefix, std::vector<BufferRef<S>>& out) {
    bn1.collect_buffers(prefix + ".bn1", out);
    bn2.collect_buffers(prefix + ".bn2", out);
    if (has_down) down_bn.collect_buffers(prefix + ".down_bn", out);
  }
};

/// Residual encoder with three shared stages and N parameter-independent
/// stage-4 expert branches fed from the same stride-16 feature map.
template <typename S>
class Backbone {
 public:
  Backbone() = default;

  Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const auto& ch = cfg.stage_channels;
    stem_conv_ = Conv2d<S>(cfg.in_channels, ch[0], 7, 2, 3, 1, false, rng);
    stem_bn_ = BatchNorm2d<S>(ch[0]);
    build_stage(stage1_, ch[0], ch[0], 1, cfg.blocks_per_stage, rng);
    build_stage(stage2_, ch[0], ch[1], 2, cfg.blocks_per_stage, rng);
    build_stage(stage3_, ch[1], ch[2], 2, cfg.blocks_per_stage, rng);
    experts_.resize(std::size_t(cfg.num_experts));
    for (Index n = 0; n < cfg.num_experts; ++n) {
      // Cloned initialization replays the same stream for every expert.
      Rng ern = rng.fork(cfg.clone_expert_init ? 7000 : 7000 + std::uint64_t(n));
      build_stage(experts_[std::size_t(n)], ch[2], ch[3], 2, cfg.blocks_per_stage, ern);
    }
  }

  const BackboneConfig& config() const { return cfg_; }

  FeaturePyramid<S> forward(const Var<S>& x, bool training) {
    if (x.shape().size() != 4 || x.dim(1) != cfg_.in_channels) {
      throw ShapeError("backbone: expected [B," + std::to_string(cfg_.in_channels) +
                       ",H,W] input, got " + shape_str(x.shape()));
    }
    if (x.dim(2) < 32 || x.dim(2) % 32 != 0 || x.dim(3) < 32 || x.dim(3) % 32 != 0) {
      throw ShapeError("backbone: spatial size must be a positive multiple of 32, got " +
                       shape_str(x.shape()));
    }
    if (!x.value().all_finite()) {
      throw NumericalError("backbone: input contains non-finite values");
    }
    auto h = relu(stem_bn_(stem_conv_(x), training));
    h = maxpool2d(h, 3, 2, 1);
    FeaturePyramid<S> pyr;
    pyr.f1 = run_stage(stage1_, h, training);
    pyr.f2 = run_stage(stage2_, pyr.f1, training);
    pyr.f3 = run_stage(stage3_, pyr.f2, training);
    pyr.experts.reserve(experts_.size());
    for (auto& stage : experts_) {
      pyr.experts.push_back(run_stage(stage, pyr.f3, training));
    }
    return pyr;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    stem_conv_.collect("backbone.stem.conv", out);
    stem_bn_.collect("backbone.stem.bn", out);
    collect_stage(stage1_, "backbone.stage1", out);
    collect_stage(stage2_, "backbone.stage2", out);
    collect_stage(stage3_, "backbone.stage3", out);
    for (std::size_t n = 0; n < experts_.size(); ++n) {
      collect_stage(experts_[n], "backbone.expert" + std::to_string(n), out);
    }
  }

  void collect_buffers(std::vector<BufferRef<S>>& out) {
    stem_bn_.collect_buffers("backbone.stem.bn", out);
    collect_stage_buffers(stage1_, "backbone.stage1", out);
    collect_stage_buffers(stage2_, "backbone.stage2", out);
    collect_stage_buffers(stage3_, "backbone.stage3", out);
    for (std::size_t n = 0; n < experts_.size(); ++n) {
      collect_stage_buffers(experts_[n], "backbone.expert" + std::to_string(n), out);
    }
  }

 private:
  static void build_stage(std::vector<BasicBlock<S>>& stage, Index cin, Index cout,
                          Index stride, Index blocks, Rng& rng) {
    stage.clear();
    stage.emplace_back(cin, cout, stride, rng);
    for (Index b = 1; b < blocks; ++b) stage.emplace_back(cout, cout, 1, rng);
  }

  static Var<S> run_stage(std::vector<BasicBlock<S>>& stage, const Var<S>& x,
                          bool training) {
    Var<S> h = x;
    for (auto& block : stage) h = block.forward(h, training);
    return h;
  }

  static void collect_stage(std::vector<BasicBlock<S>>& stage, const std::string& prefix,
                            std::vector<ParamRef<S>>& out) {
    for (std::size_t b = 0; b < stage.size(); ++b) {
      stage[b].collect(prefix + "." + std::to_string(b), out);
    }
  }

  static void collect_stage_buffers(std::vector<BasicBlock<S>>& stage,
                                    const std::string& prefix,
                                    std::vector<BufferRef<S>>& out) {
    for (std::size_t b = 0; b < stage.size(); ++b) {
      stage[b].collect_buffers(prefix + "." + std::to_string(b), out);
    }
  }

  BackboneConfig cfg_;
  Conv2d<S> stem_conv_;
  BatchNorm2d<S> stem_bn_;
  std::vector<BasicBlock<S>> stage1_, stage2_, stage3_;
  std::vector<std::vector<BasicBlock<S>>> experts_;
};

}  // namespace semc
