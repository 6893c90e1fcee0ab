// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "semc/core/error.hpp"
#include "semc/core/tensor.hpp"

namespace semc::engine {

/// Single-cycle cosine annealing: lr0 at t = 0, zero at t = T, monotone
/// nonincreasing in between.
inline double cosine_lr(double lr0, Index t, Index total) {
  if (lr0 <= 0) throw ConfigError("schedule: base learning rate must be positive");
  if (total < 1) throw ConfigError("schedule: total steps must be >= 1");
  if (t < 0 || t > total) throw ConfigError("schedule: step out of range");
  return lr0 * 0.5 * (1.0 + std::cos(M_PI * double(t) / double(total)));
}

}  // namespace semc::engine
