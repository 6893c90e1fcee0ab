// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "semc/core/error.hpp"
#include "semc/core/tensor.hpp"

namespace semc::engine {

/// Classification quality summary. Scores are percentages; precision, recall,
/// and F1 are macro-averaged over classes, with empty denominators scored as
/// zero for their class.
struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::vector<Index>> confusion;  // [true_class][predicted_class]
};

MetricsReport compute_metrics(const std::vector<std::int64_t>& y_true,
                              const std::vector<std::int64_t>& y_pred,
                              Index num_classes);

}  // namespace semc::engine
