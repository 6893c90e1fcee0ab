// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semc/nn/layers.hpp"

namespace semc {

struct McrmConfig {
  Index embed_dim = 128;
  Index queue_capacity = 4096;
  double tau_c = 0.07;    // contrastive temperature
  double lambda = 0.5;    // weight of the view-consistency term inside L_mc
  double tau_g = 1.0;     // gate temperature
  bool gumbel_hard = false;
  double aux_expert_ce = 0.0;  // weight of per-expert CE added into L_moe
  bool ema_projection = false;
  double ema_momentum = 0.999;

  void validate() const {
    if (embed_dim < 1) throw ConfigError("mcrm: embed_dim must be >= 1");
    if (queue_capacity < 0) throw ConfigError("mcrm: queue_capacity must be >= 0");
    if (tau_c <= 0) throw ConfigError("mcrm: tau_c must be positive");
    if (tau_g <= 0) throw ConfigError("mcrm: tau_g must be positive");
    if (lambda < 0) throw ConfigError("mcrm: lambda must be >= 0");
    if (aux_expert_ce < 0) throw ConfigError("mcrm: aux_expert_ce must be >= 0");
    if (ema_momentum <= 0 || ema_momentum >= 1) {
      throw ConfigError("mcrm: ema_momentum must lie in (0,1)");
    }
  }
};

/// Pooled-feature projection to the unit sphere: GAP -> MLP -> L2 normalize.
template <typename S>
struct ProjectionHead {
  LinearLayer<S> fc1, fc2;

  ProjectionHead() = default;

  ProjectionHead(Index in_channels, Index embed_dim, Rng& rng)
      : fc1(in_channels, embed_dim, true, rng), fc2(embed_dim, embed_dim, true, rng) {}

  Var<S> forward(const Var<S>& feature_map) const {
    return l2_normalize_rows(fc2(relu(fc1(global_avg_pool(feature_map)))));
  }

  /// Project an already-pooled [B,C] matrix (used by the EMA twin).
  Var<S> forward_pooled(const Var<S>& pooled) const {
    return l2_normalize_rows(fc2(relu(fc1(pooled))));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
  }

  /// Exponential moving average of another head's weights into this one.
  void ema_update_from(const ProjectionHead<S>& live, S momentum) {
    auto blend = [momentum](Var<S>& dst, const Var<S>& src) {
      dst.node()->value.array() =
          momentum * dst.node()->value.array() + (S(1) - momentum) * src.value().array();
    };
    blend(fc1.weight, live.fc1.weight);
    blend(fc1.bias, live.fc1.bias);
    blend(fc2.weight, live.fc2.weight);
    blend(fc2.bias, live.fc2.bias);
  }
};

/// Fixed-capacity FIFO of (embedding, label) pairs backing the contrastive
/// losses. Single writer; snapshots are taken in enqueue order.
template <typename S>
class ContrastiveQueue {
 public:
  ContrastiveQueue() = default;

  ContrastiveQueue(Index capacity, Index dim)
      : capacity_(capacity), dim_(dim), buffer_({std::max<Index>(capacity, 1), dim}),
        labels_(std::size_t(std::max<Index>(capacity, 1)), -1) {}

  Index capacity() const { return capacity_; }
  Index dim() const { return dim_; }
  Index size() const { return size_; }

  /// Append `rows` (shape [B,dim]) with their labels, evicting the oldest
  /// entries once capacity is exceeded.
  void push_batch(const Tensor<S>& rows, const std::vector<std::int64_t>& labels) {
    if (rows.rank() != 2 || rows.dim(1) != dim_) {
      throw StateError("queue: expected [B," + std::to_string(dim_) + "] rows, got " +
                       shape_str(rows.shape()));
    }
    if (Index(labels.size()) != rows.dim(0)) {
      throw StateError("queue: " + std::to_string(rows.dim(0)) + " rows with " +
                       std::to_string(labels.size()) + " labels");
    }
    if (capacity_ == 0) return;
    for (Index r = 0; r < rows.dim(0); ++r) {
      const Index slot = (head_ + size_) % capacity_;
      std::copy(rows.data() + r * dim_, rows.data() + (r + 1) * dim_,
                buffer_.data() + slot * dim_);
      labels_[std::size_t(slot)] = labels[std::size_t(r)];
      if (size_ < capacity_) {
        ++size_;
      } else {
        head_ = (head_ + 1) % capacity_;  // overwrite evicted the oldest
      }
    }
  }

  /// Entries oldest-first as a dense [size,dim] tensor.
  Tensor<S> snapshot_embeddings() const {
    Tensor<S> out({size_, dim_});
    for (Index i = 0; i < size_; ++i) {
      const Index slot = (head_ + i) % capacity_;
      std::copy(buffer_.data() + slot * dim_, buffer_.data() + (slot + 1) * dim_,
                out.data() + i * dim_);
    }
    return out;
  }

  std::vector<std::int64_t> snapshot_labels() const {
    std::vector<std::int64_t> out(static_cast<std::size_t>(size_));
    for (Index i = 0; i < size_; ++i) {
      out[std::size_t(i)] = labels_[std::size_t((head_ + i) % capacity_)];
    }
    return out;
  }

  void clear() {
    head_ = 0;
    size_ = 0;
  }

  /// Rebuild from a snapshot (checkpoint restore).
  void restore(const Tensor<S>& rows, const std::vector<std::int64_t>& labels) {
    clear();
    push_batch(rows, labels);
  }

 private:
  Index capacity_ = 0;
  Index dim_ = 0;
  Tensor<S> buffer_;
  std::vector<std::int64_t> labels_;
  Index head_ = 0;
  Index size_ = 0;
};

/// Key matrix for one step's contrastive losses: the N projected views of the
/// batch stacked row-wise, followed by a gradient-free copy of the queue.
template <typename S>
struct ContrastiveBatch {
  Var<S> view_rows;                  // [N*B, d], rows b of view v at v*B+b
  Var<S> keys;                       // [N*B + queue_rows, d]
  std::vector<std::int64_t> labels;  // one per key row
  Index batch = 0;
  Index num_views = 0;
  Index queue_rows = 0;
};

template <typename S>
ContrastiveBatch<S> build_contrastive_batch(const std::vector<Var<S>>& views,
                                            const std::vector<std::int64_t>& y,
                                            const ContrastiveQueue<S>& queue) {
  if (views.size() < 2) throw StateError("contrastive batch: need at least two views");
  const Index batch = views[0].dim(0);
  const Index dim = views[0].dim(1);
  for (const auto& v : views) {
    if (v.shape().size() != 2 || v.dim(0) != batch || v.dim(1) != dim) {
      throw StateError("contrastive batch: view shape mismatch");
    }
  }
  if (Index(y.size()) != batch) {
    throw StateError("contrastive batch: " + std::to_string(batch) + " samples with " +
                     std::to_string(y.size()) + " labels");
  }
  if (queue.size() > 0 && queue.dim() != dim) {
    throw StateError("contrastive batch: queue dimension mismatch");
  }

  ContrastiveBatch<S> out;
  out.batch = batch;
  out.num_views = Index(views.size());
  out.queue_rows = queue.size();
  out.view_rows = concat_rows(views);
  if (queue.size() > 0) {
    auto queue_const = Var<S>::constant(queue.snapshot_embeddings());
    out.keys = concat_rows<S>({out.view_rows, queue_const});
  } else {
    out.keys = out.view_rows;
  }
  out.labels.reserve(std::size_t(out.num_views * batch + out.queue_rows));
  for (Index v = 0; v < out.num_views; ++v) {
    out.labels.insert(out.labels.end(), y.begin(), y.end());
  }
  const auto ql = queue.snapshot_labels();
  out.labels.insert(out.labels.end(), ql.begin(), ql.end());
  return out;
}

template <typename S>
struct ContrastiveLossResult {
  Var<S> loss;
  Index anchors_used = 0;
  Index anchors_without_positives = 0;
};

namespace detail {

/// Shared core of both contrastive losses. For anchor a and positive p the
/// pair term is softplus(logsumexp_{negatives}(sim) - sim_ap); per-anchor
/// terms average over positives, and the loss averages over anchors that have
/// at least one positive. Anchors with no negatives contribute exactly zero
/// per pair, so a positives-only key set yields loss 0.
template <typename S>
ContrastiveLossResult<S> pairwise_contrastive(const Var<S>& anchors, const Var<S>& keys,
                                              const std::vector<char>& pos,
                                              const std::vector<char>& neg, S tau) {
  const Index num_anchors = anchors.dim(0);
  const Index num_keys = keys.dim(0);
  std::vector<Index> pos_count(std::size_t(num_anchors), 0);
  Index valid = 0;
  for (Index a = 0; a < num_anchors; ++a) {
    for (Index k = 0; k < num_keys; ++k) {
      if (pos[std::size_t(a * num_keys + k)]) ++pos_count[std::size_t(a)];
    }
    if (pos_count[std::size_t(a)] > 0) ++valid;
  }
  ContrastiveLossResult<S> result;
  result.anchors_used = valid;
  result.anchors_without_positives = num_anchors - valid;
  if (valid == 0) {
    result.loss = Var<S>::constant(Tensor<S>::scalar(S(0)));
    return result;
  }
  auto sim = scale(matmul_nt(anchors, keys), S(1) / tau);
  auto log_denom = masked_logsumexp_rows(sim, neg);
  auto pair_terms = softplus(sub(colwise_expand(log_denom, num_keys), sim));
  Tensor<S> weights({num_anchors, num_keys});
  for (Index a = 0; a < num_anchors; ++a) {
    if (pos_count[std::size_t(a)] == 0) continue;
    const S w = S(1) / (S(pos_count[std::size_t(a)]) * S(valid));
    for (Index k = 0; k < num_keys; ++k) {
      if (pos[std::size_t(a * num_keys + k)]) weights.at(a, k) = w;
    }
  }
  result.loss = weighted_sum(pair_terms, weights);
  return result;
}

}  // namespace detail

/// Label-driven contrastive loss. Every view row anchors against all other
/// keys: same-label keys are positives, different-label keys negatives, and
/// queue rows act as keys only. `key_usable` (optional test hook) excludes
/// keys entirely when false.
template <typename S>
ContrastiveLossResult<S> supcon_loss(const ContrastiveBatch<S>& batch, S tau,
                                     const std::vector<char>* key_usable = nullptr) {
  if (tau <= S(0)) throw ConfigError("supcon: temperature must be positive");
  const Index num_anchors = batch.num_views * batch.batch;
  const Index num_keys = batch.keys.dim(0);
  std::vector<char> pos(std::size_t(num_anchors * num_keys), 0);
  std::vector<char> neg(std::size_t(num_anchors * num_keys), 0);
  for (Index a = 0; a < num_anchors; ++a) {
    const std::int64_t ya = batch.labels[std::size_t(a)];
    for (Index k = 0; k < num_keys; ++k) {
      if (key_usable && !(*key_usable)[std::size_t(k)]) continue;
      if (k == a) continue;
      if (batch.labels[std::size_t(k)] == ya) {
        pos[std::size_t(a * num_keys + k)] = 1;
      } else {
        neg[std::size_t(a * num_keys + k)] = 1;
      }
    }
  }
  return detail::pairwise_contrastive(batch.view_rows, batch.keys, pos, neg, tau);
}

/// View-consistency contrastive loss. Anchors are the first view's rows; the
/// positives of sample b are its sibling views; every other key (including all
/// queue rows) is a negative. Labels are never consulted.
template <typename S>
ContrastiveLossResult<S> selfcon_loss(const ContrastiveBatch<S>& batch, S tau,
                                      const std::vector<char>* key_usable = nullptr) {
  if (tau <= S(0)) throw ConfigError("selfcon: temperature must be positive");
  const Index batch_size = batch.batch;
  const Index num_keys = batch.keys.dim(0);
  std::vector<char> pos(std::size_t(batch_size * num_keys), 0);
  std::vector<char> neg(std::size_t(batch_size * num_keys), 0);
  for (Index a = 0; a < batch_size; ++a) {
    for (Index k = 0; k < num_keys; ++k) {
      if (key_usable && !(*key_usable)[std::size_t(k)]) continue;
      if (k == a) continue;
      const bool sibling =
          k < batch.num_views * batch_size && k % batch_size == a && k >= batch_size;
      if (sibling) {
        pos[std::size_t(a * num_keys + k)] = 1;
      } else {
        neg[std::size_t(a * num_keys + k)] = 1;
      }
    }
  }
  auto anchors = rows_head(batch.view_rows, batch_size);
  return detail::pairwise_contrastive(anchors, batch.keys, pos, neg, tau);
}

template <typename S>
struct GateState {
  Var<S> logits;   // [B,N]
  Var<S> weights;  // [B,N], rows on the simplex
};

/// Softmax gate over expert logits. Training mode perturbs logits with Gumbel
/// noise before the temperature softmax; evaluation is noise-free. Hard mode
/// snaps to one-hot with a straight-through gradient.
template <typename S>
GateState<S> gate_weights(const Var<S>& logits, bool train_mode, S tau_g,
                          Rng* noise_rng = nullptr, bool hard = false) {
  if (tau_g <= S(0)) throw ConfigError("gate: temperature must be positive");
  if (logits.shape().size() != 2) throw ShapeError("gate: [B,N] logits required");
  GateState<S> state;
  state.logits = logits;
  Var<S> pre;
  if (train_mode && noise_rng) {
    Tensor<S> noise(logits.shape());
    for (Index i = 0; i < noise.numel(); ++i) noise[i] = S(noise_rng->gumbel());
    pre = scale(add_const(logits, noise), S(1) / tau_g);
  } else {
    pre = scale(logits, S(1) / tau_g);
  }
  auto weights = softmax_rows(pre);
  if (hard) {
    Tensor<S> to_onehot(weights.shape());
    const Index rows = weights.dim(0), cols = weights.dim(1);
    for (Index i = 0; i < rows; ++i) {
      Index best = 0;
      for (Index j = 1; j < cols; ++j) {
        if (weights.value().at(i, j) > weights.value().at(i, best)) best = j;
      }
      for (Index j = 0; j < cols; ++j) {
        to_onehot.at(i, j) = (j == best ? S(1) : S(0)) - weights.value().at(i, j);
      }
    }
    weights = add_const(weights, to_onehot);  // straight-through estimator
  }
  state.weights = weights;
  return state;
}

/// z_fused[b] = sum_n w[b,n] * z_n[b].
template <typename S>
Var<S> fuse_logits(const std::vector<Var<S>>& expert_logits, const Var<S>& weights) {
  if (weights.shape().size() != 2 || Index(expert_logits.size()) != weights.dim(1)) {
    throw ShapeError("fuse_logits: " + std::to_string(expert_logits.size()) +
                     " experts with weight shape " + shape_str(weights.shape()));
  }
  Var<S> fused;
  for (Index n = 0; n < Index(expert_logits.size()); ++n) {
    auto term = rowwise_scale(expert_logits[std::size_t(n)], col(weights, n));
    fused = n == 0 ? term : add(fused, term);
  }
  return fused;
}

/// Per-step scalar record of every loss component. The identities
/// l_mc = l_sup + lambda*l_self and l_total = alpha*l_moe + (1-alpha)*l_mc are
/// recomputed here in double precision so downstream checks see them exactly.
struct LossBreakdown {
  double l_sup = 0.0;
  double l_self = 0.0;
  double l_mc = 0.0;
  double l_moe = 0.0;
  double alpha = 1.0;
  double lambda = 0.0;
  double l_total = 0.0;
  Index anchors_without_positives = 0;
};

template <typename S>
struct TotalLoss {
  Var<S> total;  // differentiable scalar
  LossBreakdown breakdown;
};

/// Combine the components: L_mc = L_sup + lambda*L_self, then
/// L_total = alpha*L_moe + (1-alpha)*L_mc.
template <typename S>
TotalLoss<S> total_loss(const Var<S>& l_sup, const Var<S>& l_self, const Var<S>& l_moe,
                        const Var<S>& alpha, S lambda) {
  auto check = [](const Var<S>& v, const char* name) {
    if (!v.value().all_finite()) {
      throw NumericalError(std::string("total loss: ") + name + " is not finite");
    }
  };
  check(l_sup, "L_sup");
  check(l_self, "L_self");
  check(l_moe, "L_moe");
  check(alpha, "alpha");

  auto l_mc = add(l_sup, scale(l_self, lambda));
  auto one_minus_alpha = add_scalar(neg(alpha), S(1));
  TotalLoss<S> out;
  out.total = add(mul(alpha, l_moe), mul(one_minus_alpha, l_mc));
  check(out.total, "L_total");

  auto& bd = out.breakdown;
  bd.l_sup = double(l_sup.value()[0]);
  bd.l_self = double(l_self.value()[0]);
  bd.l_moe = double(l_moe.value()[0]);
  bd.alpha = double(alpha.value()[0]);
  bd.lambda = double(lambda);
  bd.l_mc = bd.l_sup + bd.lambda * bd.l_self;
  bd.l_total = bd.alpha * bd.l_moe + (1.0 - bd.alpha) * bd.l_mc;
  return out;
}

}  // namespace semc
