// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "semc/core/rng.hpp"
#include "semc/data/image.hpp"

namespace semc::data {

/// Random-transform policy for one training sample: rotation up to
/// +-rotation_deg, coin-flip mirror along each axis, multiplicative
/// brightness drawn from [brightness_lo, brightness_hi], then a resize to
/// the square target. A default-constructed policy only resizes.
struct AugmentPolicy {
  double rotation_deg = 0.0;
  double hflip_prob = 0.0;
  double vflip_prob = 0.0;
  double brightness_lo = 1.0;
  double brightness_hi = 1.0;
  Index resize_target = 512;

  void validate() const;
};

/// Apply the policy with randomness drawn from `rng`. Deterministic for a
/// fixed stream; the output is always [target,target] with values in [0,1].
Image augment(const Image& img, const AugmentPolicy& policy, Rng& rng);

}  // namespace semc::data
