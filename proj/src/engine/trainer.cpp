// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/engine/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "semc/data/png_io.hpp"
#include "semc/engine/checkpoint.hpp"
#include "semc/engine/schedule.hpp"

namespace semc::engine {

namespace {

// Trainer stream ids under the run seed; the model forks 1, 100+, 200, 300+,
// 400, 401 from the same root.
constexpr std::uint64_t kGateNoiseStream = 11;
constexpr std::uint64_t kShuffleStream = 12;
constexpr std::uint64_t kAugmentStream = 13;

}  // namespace

void TrainSettings::validate() const {
  if (lr <= 0) throw ConfigError("train: learning rate must be positive");
  if (momentum < 0 || momentum >= 1) throw ConfigError("train: momentum must lie in [0,1)");
  if (weight_decay < 0) throw ConfigError("train: weight decay must be >= 0");
  if (clip_norm < 0) throw ConfigError("train: clip norm must be >= 0");
  if (batch_size < 2) throw ConfigError("train: batch size must be >= 2");
  if (max_epochs < 1) throw ConfigError("train: max epochs must be >= 1");
  if (fixed_alpha && (*fixed_alpha <= 0.0 || *fixed_alpha >= 1.0)) {
    throw ConfigError("train: fixed alpha must lie in (0,1)");
  }
}

SemcConfig model_config(const Config& cfg) {
  SemcConfig mc;
  mc.backbone.input_size = Index(cfg.get_int("model.input_size"));
  mc.backbone.in_channels = Index(cfg.get_int("model.in_channels"));
  const auto stages = cfg.get_index_list("model.stage_channels");
  if (stages.size() != 4) {
    throw ConfigError("model.stage_channels must list exactly four values");
  }
  for (std::size_t i = 0; i < 4; ++i) mc.backbone.stage_channels[i] = stages[i];
  mc.backbone.blocks_per_stage = Index(cfg.get_int("model.blocks_per_stage"));
  mc.backbone.num_experts = Index(cfg.get_int("model.num_experts"));
  mc.num_classes = Index(cfg.get_int("model.num_classes"));

  mc.ssfm.reduction_ratio = Index(cfg.get_int("ssfm.reduction_ratio"));
  mc.ssfm.spatial_kernel = Index(cfg.get_int("ssfm.spatial_kernel"));
  mc.ssfm.scale_kernels = cfg.get_index_list("ssfm.scale_kernels");
  mc.ssfm.shuffle_groups = Index(cfg.get_int("ssfm.shuffle_groups"));
  mc.ssfm.ace_double_norm = cfg.get_bool("ssfm.ace_double_norm");

  mc.mcrm.embed_dim = Index(cfg.get_int("mcrm.embed_dim"));
  mc.mcrm.queue_capacity = Index(cfg.get_int("mcrm.queue_capacity"));
  mc.mcrm.tau_c = cfg.get_double("mcrm.tau_c");
  mc.mcrm.lambda = cfg.get_double("mcrm.lambda");
  mc.mcrm.tau_g = cfg.get_double("mcrm.tau_g");
  mc.mcrm.gumbel_hard = cfg.get_bool("mcrm.gumbel_hard");
  mc.mcrm.aux_expert_ce = cfg.get_double("mcrm.aux_expert_ce");
  mc.mcrm.ema_projection = cfg.get_bool("mcrm.ema_projection");
  mc.mcrm.ema_momentum = cfg.get_double("mcrm.ema_momentum");

  mc.validate();
  return mc;
}

TrainSettings train_settings(const Config& cfg) {
  TrainSettings s;
  s.lr = cfg.get_double("train.lr");
  s.momentum = cfg.get_double("train.momentum");
  s.weight_decay = cfg.get_double("train.weight_decay");
  s.clip_norm = cfg.get_double("train.clip_norm");
  s.batch_size = Index(cfg.get_int("train.batch_size"));
  s.max_epochs = Index(cfg.get_int("train.max_epochs"));
  s.seed = std::uint64_t(cfg.get_int("train.seed"));
  s.ace_on = cfg.get_bool("train.ace_on");
  s.samc_on = cfg.get_bool("train.samc_on");
  s.lmc_on = cfg.get_bool("train.lmc_on");
  const std::string alpha_mode = cfg.get_string("train.alpha_mode");
  if (alpha_mode == "adaptive") {
    s.fixed_alpha.reset();
  } else if (alpha_mode.rfind("fixed:", 0) == 0) {
    try {
      std::size_t pos = 0;
      const std::string tail = alpha_mode.substr(6);
      s.fixed_alpha = std::stod(tail, &pos);
      if (pos != tail.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("train.alpha_mode: cannot parse '" + alpha_mode + "'");
    }
  } else {
    throw ConfigError("train.alpha_mode must be 'adaptive' or 'fixed:<value>', got '" +
                      alpha_mode + "'");
  }
  s.manifest = cfg.get_string("data.manifest");
  s.train_frac = cfg.get_double("data.train_frac");
  s.val_frac = cfg.get_double("data.val_frac");
  s.validate();
  return s;
}

data::AugmentPolicy augment_policy(const Config& cfg) {
  data::AugmentPolicy policy;
  policy.rotation_deg = cfg.get_double("augment.rotation_deg");
  policy.hflip_prob = cfg.get_double("augment.hflip_prob");
  policy.vflip_prob = cfg.get_double("augment.vflip_prob");
  policy.brightness_lo = cfg.get_double("augment.brightness_lo");
  policy.brightness_hi = cfg.get_double("augment.brightness_hi");
  policy.resize_target = Index(cfg.get_int("model.input_size"));
  policy.validate();
  return policy;
}

SplitData load_split(const data::DatasetManifest& manifest, const std::vector<Index>& ids) {
  SplitData out;
  out.images.reserve(ids.size());
  out.labels.reserve(ids.size());
  for (Index i : ids) {
    out.images.push_back(data::read_png_gray(manifest.image_path(i)));
    out.labels.push_back(manifest.entries[std::size_t(i)].label);
  }
  return out;
}

ExperimentData load_experiment_data(const Config& cfg) {
  const TrainSettings settings = train_settings(cfg);
  if (settings.manifest.empty()) {
    throw ConfigError("data.manifest is not set");
  }
  ExperimentData out;
  out.manifest = data::load_manifest(settings.manifest);
  const Index configured = Index(cfg.get_int("model.num_classes"));
  if (out.manifest.num_classes() != configured) {
    throw ConfigError("model.num_classes is " + std::to_string(configured) +
                      " but the manifest defines " +
                      std::to_string(out.manifest.num_classes()) + " classes");
  }
  out.split = data::stratified_split(out.manifest, settings.train_frac, settings.val_frac,
                                     settings.seed);
  out.train = load_split(out.manifest, out.split.train);
  out.val = load_split(out.manifest, out.split.val);
  out.test = load_split(out.manifest, out.split.test);
  return out;
}

Trainer::Trainer(const Config& cfg)
    : settings_(train_settings(cfg)),
      model_cfg_(model_config(cfg)),
      policy_(augment_policy(cfg)),
      config_hash_(cfg.hash()),
      model_(model_cfg_, settings_.seed),
      opt_(model_.parameters(), float(settings_.momentum), float(settings_.weight_decay),
           float(settings_.clip_norm)),
      noise_rng_(Rng(settings_.seed).fork(kGateNoiseStream)),
      shuffle_rng_(Rng(settings_.seed).fork(kShuffleStream)) {}

Tensor<float> Trainer::assemble_batch(const SplitData& split, const std::vector<Index>& ids,
                                      Index epoch, bool train_mode,
                                      std::vector<std::int64_t>& labels_out) const {
  const Index target = model_cfg_.backbone.input_size;
  std::vector<data::Image> views;
  views.reserve(ids.size());
  labels_out.clear();
  labels_out.reserve(ids.size());
  for (Index id : ids) {
    const auto& img = split.images[std::size_t(id)];
    if (train_mode) {
      Rng sample_rng =
          Rng(settings_.seed).fork(kAugmentStream).fork(std::uint64_t(epoch)).fork(std::uint64_t(id));
      views.push_back(data::augment(img, policy_, sample_rng));
    } else {
      views.push_back(data::resize_bilinear(img, target, target));
    }
    labels_out.push_back(split.labels[std::size_t(id)]);
  }
  return data::to_batch(views);
}

std::optional<LossBreakdown> Trainer::train_step(const Tensor<float>& x,
                                                 const std::vector<std::int64_t>& y,
                                                 double lr) {
  LossOptions opts;
  opts.lmc_on = settings_.lmc_on;
  opts.fixed_alpha = settings_.fixed_alpha;
  try {
    auto input = Var<float>::constant(x);
    auto out = model_.forward(input, true, &noise_rng_, settings_.ace_on, settings_.samc_on);
    auto loss = model_.losses(out, y, opts);
    if (!loss.total.value().all_finite() || !std::isfinite(loss.breakdown.l_total)) {
      throw NumericalError("train step: non-finite total loss");
    }
    opt_.zero_grad();
    backward(loss.total);
    opt_.step(float(lr));
    model_.post_step_update();
    model_.queue_update(out, y);
    consecutive_bad_ = 0;
    return loss.breakdown;
  } catch (const NumericalError& err) {
    ++consecutive_bad_;
    std::fprintf(stderr, "[trainer] aborted step (%lld consecutive): %s\n",
                 (long long)consecutive_bad_, err.what());
    if (consecutive_bad_ >= 3) throw;
    return std::nullopt;
  }
}

MetricsReport Trainer::evaluate(const SplitData& split) {
  if (split.images.empty()) throw DataError("evaluate: empty split");
  NoGradGuard frozen;
  const Index n = Index(split.images.size());
  const Index num_classes = model_cfg_.num_classes;
  std::vector<std::int64_t> labels;
  std::vector<std::int64_t> preds;
  labels.reserve(std::size_t(n));
  preds.reserve(std::size_t(n));
  for (Index start = 0; start < n; start += settings_.batch_size) {
    const Index stop = std::min(n, start + settings_.batch_size);
    std::vector<Index> ids;
    for (Index i = start; i < stop; ++i) ids.push_back(i);
    std::vector<std::int64_t> batch_labels;
    auto x = assemble_batch(split, ids, 0, false, batch_labels);
    auto out = model_.forward(Var<float>::constant(x), false, nullptr, settings_.ace_on,
                              settings_.samc_on);
    const auto& logits = out.fused_logits.value();
    for (Index r = 0; r < stop - start; ++r) {
      Index best = 0;
      for (Index c = 1; c < num_classes; ++c) {
        if (logits.at(r, c) > logits.at(r, best)) best = c;
      }
      preds.push_back(best);
      labels.push_back(batch_labels[std::size_t(r)]);
    }
  }
  return compute_metrics(labels, preds, num_classes);
}

FitResult Trainer::fit(const SplitData& train, const SplitData& val,
                       const std::string& metrics_csv, const std::string& best_ckpt,
                       bool verbose) {
  if (train.images.empty()) throw DataError("fit: empty training split");
  if (val.images.empty()) throw DataError("fit: empty validation split");

  std::ofstream csv;
  if (!metrics_csv.empty()) {
    csv.open(metrics_csv, std::ios::trunc);
    if (!csv) throw IoError("cannot open metrics file for writing: " + metrics_csv);
    csv << "epoch,lr,L_sup,L_self,L_mc,L_moe,alpha,L_total,"
           "val_acc,val_precision,val_recall,val_f1\n";
  }

  FitResult result;
  double best_f1 = -1.0;
  const Index n = Index(train.images.size());
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[std::size_t(i)] = i;

  for (Index epoch = 0; epoch < settings_.max_epochs; ++epoch) {
    const double lr = cosine_lr(settings_.lr, epoch, settings_.max_epochs);

    for (Index i = n - 1; i > 0; --i) {
      const Index j = Index(shuffle_rng_.uniform_int(std::uint64_t(i) + 1));
      std::swap(order[std::size_t(i)], order[std::size_t(j)]);
    }

    LossBreakdown sums;
    Index completed = 0;
    for (Index start = 0; start < n; start += settings_.batch_size) {
      const Index stop = std::min(n, start + settings_.batch_size);
      if (stop - start < 2) break;  // contrastive losses need at least a pair
      std::vector<Index> ids(order.begin() + start, order.begin() + stop);
      std::vector<std::int64_t> y;
      auto x = assemble_batch(train, ids, epoch, true, y);
      if (auto step = train_step(x, y, lr)) {
        sums.l_sup += step->l_sup;
        sums.l_self += step->l_self;
        sums.l_mc += step->l_mc;
        sums.l_moe += step->l_moe;
        sums.alpha += step->alpha;
        sums.l_total += step->l_total;
        ++completed;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    if (completed > 0) {
      const double inv = 1.0 / double(completed);
      stats.mean_loss.l_sup = sums.l_sup * inv;
      stats.mean_loss.l_self = sums.l_self * inv;
      stats.mean_loss.l_mc = sums.l_mc * inv;
      stats.mean_loss.l_moe = sums.l_moe * inv;
      stats.mean_loss.alpha = sums.alpha * inv;
      stats.mean_loss.l_total = sums.l_total * inv;
    }
    stats.val = evaluate(val);

    if (csv.is_open()) {
      char row[512];
      std::snprintf(row, sizeof row,
                    "%lld,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f\n",
                    (long long)epoch, lr, stats.mean_loss.l_sup, stats.mean_loss.l_self,
                    stats.mean_loss.l_mc, stats.mean_loss.l_moe, stats.mean_loss.alpha,
                    stats.mean_loss.l_total, stats.val.accuracy, stats.val.precision,
                    stats.val.recall, stats.val.f1);
      csv << row;
      csv.flush();
    }
    if (verbose) {
      std::fprintf(stderr, "[trainer] epoch %lld/%lld lr %.6f L_total %.4f val_f1 %.2f\n",
                   (long long)(epoch + 1), (long long)settings_.max_epochs, lr,
                   stats.mean_loss.l_total, stats.val.f1);
    }

    if (stats.val.f1 > best_f1) {
      best_f1 = stats.val.f1;
      result.best_epoch = epoch;
      result.best_val = stats.val;
      if (!best_ckpt.empty()) {
        CheckpointMeta meta;
        meta.config_hash = config_hash_;
        meta.epochs_completed = std::uint64_t(epoch) + 1;
        meta.rng_states = rng_states();
        save_checkpoint(best_ckpt, model_, &opt_, meta);
      }
    }
    result.history.push_back(std::move(stats));
  }
  return result;
}

std::vector<std::array<std::uint64_t, 4>> Trainer::rng_states() const {
  return {noise_rng_.state(), shuffle_rng_.state()};
}

void Trainer::set_rng_states(const std::vector<std::array<std::uint64_t, 4>>& states) {
  if (states.size() != 2) throw StateError("trainer: expected two rng states");
  noise_rng_.set_state(states[0]);
  shuffle_rng_.set_state(states[1]);
}

}  // namespace semc::engine
