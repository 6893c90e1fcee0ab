// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semc/model/backbone.hpp"
#include "semc/model/mcrm.hpp"
#include "semc/model/ssfm.hpp"

namespace semc {

struct SemcConfig {
  BackboneConfig backbone;
  SsfmConfig ssfm;
  McrmConfig mcrm;
  Index num_classes = 7;

  void validate() const {
    backbone.validate();
    ssfm.validate();
    mcrm.validate();
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  }
};

/// Disjoint parameter partition: one group per expert plus the shared rest.
template <typename S>
struct ParamGroups {
  std::vector<std::vector<ParamRef<S>>> expert;
  std::vector<ParamRef<S>> shared;
};

/// Everything one forward pass produces, kept as graph nodes so losses can be
/// assembled on top.
template <typename S>
struct ModelOutput {
  FeaturePyramid<S> pyramid;
  std::vector<Var<S>> fused;        // M_n, one per expert
  std::vector<Var<S>> refined;      // O_n
  std::vector<Var<S>> embeddings;   // E_n, [B,d] unit rows
  std::vector<Tensor<S>> key_embeddings;  // detached rows for the queue
  std::vector<Var<S>> expert_logits;      // z_n, [B,C]
  Var<S> gate_input;                // [B, deep channels]
  GateState<S> gate;
  Var<S> fused_logits;              // [B,C]
  Var<S> alpha;                     // scalar, adaptive balance in (0,1)
};

/// Loss-assembly switches for one step.
struct LossOptions {
  bool lmc_on = true;                  // false: classification loss only
  std::optional<double> fixed_alpha;   // overrides the adaptive balance
};

/// The full network: shared-stage residual encoder, N expert branches, per
/// expert a shallow-feature fusion pipeline, a shared projection head with a
/// FIFO key queue, gated expert classification, and adaptive loss balancing.
template <typename S>
class SemcModel {
 public:
  explicit SemcModel(const SemcConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng root(seed);
    Rng backbone_rng = root.fork(1);
    backbone_ = Backbone<S>(cfg.backbone, backbone_rng);
    const Index deep = cfg.backbone.stage_channels[3];
    const Index n_experts = cfg.backbone.num_experts;
    for (Index n = 0; n < n_experts; ++n) {
      const Index level = shallow_level(n);
      Rng brng = root.fork(100 + std::uint64_t(n));
      branches_.emplace_back(cfg.backbone.stage_channels[std::size_t(level)],
                             Index(3) - level, deep, cfg.ssfm, brng);
    }
    Rng prng = root.fork(200);
    proj_ = ProjectionHead<S>(deep, cfg.mcrm.embed_dim, prng);
    if (cfg.mcrm.ema_projection) {
      // Independent nodes with identical initial values: replay the stream.
      Rng copy_rng = root.fork(200);
      ema_proj_ = ProjectionHead<S>(deep, cfg.mcrm.embed_dim, copy_rng);
    }
    for (Index n = 0; n < n_experts; ++n) {
      Rng hrng = root.fork(300 + std::uint64_t(n));
      heads_.emplace_back(deep, cfg.num_classes, true, hrng);
    }
    Rng grng = root.fork(400);
    gate_ = LinearLayer<S>(deep, n_experts, true, grng);
    Rng arng = root.fork(401);
    alpha_net_ = LinearLayer<S>(deep, 1, true, arng);
    queue_ = ContrastiveQueue<S>(cfg.mcrm.queue_capacity, cfg.mcrm.embed_dim);
  }

  const SemcConfig& config() const { return cfg_; }
  Backbone<S>& backbone() { return backbone_; }
  std::vector<SsfmBranch<S>>& branches() { return branches_; }
  ProjectionHead<S>& projection() { return proj_; }
  ContrastiveQueue<S>& queue() { return queue_; }
  const ContrastiveQueue<S>& queue() const { return queue_; }

  /// Shallow pyramid level paired with expert n: F1 for the first expert, F2
  /// for the second, F3 for the third and any further experts.
  static Index shallow_level(Index n) { return std::min<Index>(n, 2); }

  ModelOutput<S> forward(const Var<S>& x, bool training, Rng* noise_rng = nullptr,
                         bool ace_on = true, bool samc_on = true) {
    ModelOutput<S> out;
    out.pyramid = backbone_.forward(x, training);
    const Index n_experts = cfg_.backbone.num_experts;
    const Var<S> shallow[3] = {out.pyramid.f1, out.pyramid.f2, out.pyramid.f3};
    Var<S> gate_sum;
    for (Index n = 0; n < n_experts; ++n) {
      const auto& deep = out.pyramid.experts[std::size_t(n)];
      auto& branch = branches_[std::size_t(n)];
      Var<S> fused =
          ace_on ? branch.fuse(shallow[shallow_level(n)], deep, training) : deep;
      Var<S> refined = samc_on ? branch.samc.forward(fused, training) : fused;
      out.fused.push_back(fused);
      out.refined.push_back(refined);
      out.embeddings.push_back(proj_.forward(refined));
      auto pooled = global_avg_pool(refined);
      out.expert_logits.push_back(heads_[std::size_t(n)](pooled));
      gate_sum = n == 0 ? pooled : add(gate_sum, pooled);
    }
    out.gate_input = scale(gate_sum, S(1) / S(n_experts));
    out.gate = gate_weights(gate_(out.gate_input), training, S(cfg_.mcrm.tau_g),
                            noise_rng, cfg_.mcrm.gumbel_hard);
    out.fused_logits = fuse_logits(out.expert_logits, out.gate.weights);
    out.alpha = mean_all(sigmoid(alpha_net_(out.gate_input)));

    out.key_embeddings.reserve(std::size_t(n_experts));
    {
      NoGradGuard no_grad;
      const auto& key_head = cfg_.mcrm.ema_projection ? ema_proj_ : proj_;
      for (Index n = 0; n < n_experts; ++n) {
        auto frozen = Var<S>::constant(out.refined[std::size_t(n)].value());
        out.key_embeddings.push_back(key_head.forward(frozen).value());
      }
    }
    return out;
  }

  /// Assemble the step loss from a forward pass. The queue is read, never
  /// written; queue updates are a separate explicit call.
  TotalLoss<S> losses(const ModelOutput<S>& out, const std::vector<std::int64_t>& y,
                      const LossOptions& opts = {},
                      const std::vector<char>* key_usable = nullptr) {
    Var<S> l_moe = cross_entropy(out.fused_logits, y);
    if (cfg_.mcrm.aux_expert_ce > 0) {
      Var<S> aux;
      for (std::size_t n = 0; n < out.expert_logits.size(); ++n) {
        auto term = cross_entropy(out.expert_logits[n], y);
        aux = n == 0 ? term : add(aux, term);
      }
      aux = scale(aux, S(cfg_.mcrm.aux_expert_ce) / S(out.expert_logits.size()));
      l_moe = add(l_moe, aux);
    }

    if (!opts.lmc_on) {
      if (!l_moe.value().all_finite()) {
        throw NumericalError("total loss: L_moe is not finite");
      }
      TotalLoss<S> result;
      result.total = l_moe;
      result.breakdown.l_moe = double(l_moe.value()[0]);
      result.breakdown.alpha = 1.0;
      result.breakdown.lambda = cfg_.mcrm.lambda;
      result.breakdown.l_total = result.breakdown.l_moe;
      return result;
    }

    ContrastiveBatch<S> batch = build_contrastive_batch(out.embeddings, y, queue_);
    auto sup = supcon_loss(batch, S(cfg_.mcrm.tau_c), key_usable);
    auto self = selfcon_loss(batch, S(cfg_.mcrm.tau_c), key_usable);
    Var<S> alpha = out.alpha;
    if (opts.fixed_alpha) {
      const double a = *opts.fixed_alpha;
      if (a <= 0.0 || a >= 1.0) {
        throw ConfigError("model: fixed alpha must lie in (0,1), got " + std::to_string(a));
      }
      alpha = Var<S>::constant(Tensor<S>::scalar(S(a)));
    }
    auto result = total_loss(sup.loss, self.loss, l_moe, alpha, S(cfg_.mcrm.lambda));
    result.breakdown.anchors_without_positives = sup.anchors_without_positives;
    return result;
  }

  /// Enqueue the detached sibling-view embeddings (views 2..N in batch order)
  /// with their labels, evicting FIFO.
  void queue_update(const ModelOutput<S>& out, const std::vector<std::int64_t>& y) {
    for (std::size_t v = 1; v < out.key_embeddings.size(); ++v) {
      queue_.push_batch(out.key_embeddings[v], y);
    }
  }

  /// After an optimizer step: blend the live projection head into its EMA twin.
  void post_step_update() {
    if (cfg_.mcrm.ema_projection) {
      ema_proj_.ema_update_from(proj_, S(cfg_.mcrm.ema_momentum));
    }
  }

  void collect(std::vector<ParamRef<S>>& out) {
    backbone_.collect(out);
    for (std::size_t n = 0; n < branches_.size(); ++n) {
      branches_[n].collect("branch" + std::to_string(n), out);
    }
    proj_.collect("proj", out);
    for (std::size_t n = 0; n < heads_.size(); ++n) {
      heads_[n].collect("head" + std::to_string(n), out);
    }
    gate_.collect("gate", out);
    alpha_net_.collect("alphanet", out);
  }

  void collect_buffers(std::vector<BufferRef<S>>& out) {
    backbone_.collect_buffers(out);
    for (std::size_t n = 0; n < branches_.size(); ++n) {
      branches_[n].collect_buffers("branch" + std::to_string(n), out);
    }
    if (cfg_.mcrm.ema_projection) {
      out.push_back({"ema_proj.fc1.weight", &ema_proj_.fc1.weight.node()->value});
      out.push_back({"ema_proj.fc1.bias", &ema_proj_.fc1.bias.node()->value});
      out.push_back({"ema_proj.fc2.weight", &ema_proj_.fc2.weight.node()->value});
      out.push_back({"ema_proj.fc2.bias", &ema_proj_.fc2.bias.node()->value});
    }
  }

  std::vector<ParamRef<S>> parameters() {
    std::vector<ParamRef<S>> out;
    collect(out);
    return out;
  }

  /// Partition all parameters into per-expert groups (stage-4 branch, fusion
  /// pipeline, and classification head of each expert) plus the shared rest.
  ParamGroups<S> expert_parameter_groups() {
    ParamGroups<S> groups;
    groups.expert.resize(std::size_t(cfg_.backbone.num_experts));
    for (auto& p : parameters()) {
      bool assigned = false;
      for (Index n = 0; n < cfg_.backbone.num_experts; ++n) {
        const std::string ns = std::to_string(n);
        for (const std::string& prefix :
             {"backbone.expert" + ns + ".", "branch" + ns + ".", "head" + ns + "."}) {
          if (p.name.rfind(prefix, 0) == 0) {
            groups.expert[std::size_t(n)].push_back(p);
            assigned = true;
            break;
          }
        }
        if (assigned) break;
      }
      if (!assigned) groups.shared.push_back(p);
    }
    return groups;
  }

 private:
  SemcConfig cfg_;
  Backbone<S> backbone_;
  std::vector<SsfmBranch<S>> branches_;
  ProjectionHead<S> proj_;
  ProjectionHead<S> ema_proj_;
  std::vector<LinearLayer<S>> heads_;
  LinearLayer<S> gate_;
  LinearLayer<S> alpha_net_;
  ContrastiveQueue<S> queue_;
};

}  // namespace semc
