// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/engine/metrics.hpp"

#include <string>

namespace semc::engine {

MetricsReport compute_metrics(const std::vector<std::int64_t>& y_true,
                              const std::vector<std::int64_t>& y_pred,
                              Index num_classes) {
  if (num_classes < 2) throw ConfigError("metrics: need at least two classes");
  if (y_true.empty()) throw DataError("metrics: empty prediction set");
  if (y_true.size() != y_pred.size()) {
    throw ShapeError("metrics: " + std::to_string(y_true.size()) + " labels vs " +
                     std::to_string(y_pred.size()) + " predictions");
  }

  MetricsReport report;
  report.confusion.assign(std::size_t(num_classes),
                          std::vector<Index>(std::size_t(num_classes), 0));
  Index correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const std::int64_t t = y_true[i];
    const std::int64_t p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("metrics: label out of range at position " + std::to_string(i));
    }
    ++report.confusion[std::size_t(t)][std::size_t(p)];
    if (t == p) ++correct;
  }

  double precision_sum = 0.0;
  double recall_sum = 0.0;
  double f1_sum = 0.0;
  for (Index c = 0; c < num_classes; ++c) {
    const double tp = double(report.confusion[std::size_t(c)][std::size_t(c)]);
    double support = 0.0;
    double predicted = 0.0;
    for (Index k = 0; k < num_classes; ++k) {
      support += double(report.confusion[std::size_t(c)][std::size_t(k)]);
      predicted += double(report.confusion[std::size_t(k)][std::size_t(c)]);
    }
    const double precision = predicted > 0.0 ? tp / predicted : 0.0;
    const double recall = support > 0.0 ? tp / support : 0.0;
    const double denom = precision + recall;
    precision_sum += precision;
    recall_sum += recall;
    f1_sum += denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
  }

  const double classes = double(num_classes);
  report.accuracy = 100.0 * double(correct) / double(y_true.size());
  report.precision = 100.0 * precision_sum / classes;
  report.recall = 100.0 * recall_sum / classes;
  report.f1 = 100.0 * f1_sum / classes;
  return report;
}

}  // namespace semc::engine
