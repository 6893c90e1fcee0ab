// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semc/data/augment.hpp"
#include "semc/data/dataset.hpp"
#include "semc/data/image.hpp"
#include "semc/engine/config.hpp"
#include "semc/engine/metrics.hpp"
#include "semc/engine/optimizer.hpp"
#include "semc/model/semc_model.hpp"

namespace semc::engine {

/// Optimization and experiment settings parsed out of a Config.
struct TrainSettings {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 5.0;  // 0 disables clipping
  Index batch_size = 16;
  Index max_epochs = 200;
  std::uint64_t seed = 0;
  bool ace_on = true;
  bool samc_on = true;
  bool lmc_on = true;
  std::optional<double> fixed_alpha;  // empty selects the adaptive balance
  std::string manifest;
  double train_frac = 0.70;
  double val_frac = 0.15;

  void validate() const;
};

SemcConfig model_config(const Config& cfg);
TrainSettings train_settings(const Config& cfg);
data::AugmentPolicy augment_policy(const Config& cfg);

/// Decoded images and labels for one split, held in memory.
struct SplitData {
  std::vector<data::Image> images;
  std::vector<std::int64_t> labels;
};

SplitData load_split(const data::DatasetManifest& manifest, const std::vector<Index>& ids);

/// Manifest plus the three decoded splits for one experiment.
struct ExperimentData {
  data::DatasetManifest manifest;
  data::SplitIndices split;
  SplitData train;
  SplitData val;
  SplitData test;
};

ExperimentData load_experiment_data(const Config& cfg);

/// One epoch's record: averaged losses over completed steps plus validation
/// metrics. Matches one row of the metrics CSV.
struct EpochStats {
  Index epoch = 0;
  double lr = 0.0;
  LossBreakdown mean_loss;
  MetricsReport val;
};

struct FitResult {
  Index best_epoch = -1;
  MetricsReport best_val;
  std::vector<EpochStats> history;
};

/// Orchestrates optimization of one SemcModel: seeded batch assembly with
/// per-sample augmentation streams, loss backpropagation, gradient clipping,
/// momentum updates, queue maintenance, and cosine learning-rate decay.
class Trainer {
 public:
  explicit Trainer(const Config& cfg);

  SemcModel<float>& model() { return model_; }
  SgdMomentum<float>& optimizer() { return opt_; }
  const TrainSettings& settings() const { return settings_; }
  const SemcConfig& model_cfg() const { return model_cfg_; }
  std::uint64_t config_hash() const { return config_hash_; }

  /// Decode one batch: augmented views in training mode, plain resize in
  /// evaluation mode. Augmentation draws from a stream keyed by (seed, epoch,
  /// sample id), so results do not depend on batch order.
  Tensor<float> assemble_batch(const SplitData& split, const std::vector<Index>& ids,
                               Index epoch, bool train_mode,
                               std::vector<std::int64_t>& labels_out) const;

  /// One optimization step. Returns the loss record, or nothing when the step
  /// was aborted because the loss or gradients turned non-finite; raises
  /// NumericalError after three consecutive aborts.
  std::optional<LossBreakdown> train_step(const Tensor<float>& x,
                                          const std::vector<std::int64_t>& y, double lr);

  /// Frozen forward passes over a split; the queue is left untouched.
  MetricsReport evaluate(const SplitData& split);

  /// Epoch loop with cosine learning-rate decay. Writes one CSV row per epoch
  /// to `metrics_csv` and checkpoints the best validation macro-F1 model to
  /// `best_ckpt`; either path may be empty to skip that artifact.
  FitResult fit(const SplitData& train, const SplitData& val,
                const std::string& metrics_csv, const std::string& best_ckpt,
                bool verbose = false);

  std::vector<std::array<std::uint64_t, 4>> rng_states() const;
  void set_rng_states(const std::vector<std::array<std::uint64_t, 4>>& states);

 private:
  TrainSettings settings_;
  SemcConfig model_cfg_;
  data::AugmentPolicy policy_;
  std::uint64_t config_hash_ = 0;
  SemcModel<float> model_;
  SgdMomentum<float> opt_;
  Rng noise_rng_;
  Rng shuffle_rng_;
  Index consecutive_bad_ = 0;
};

}  // namespace semc::engine
