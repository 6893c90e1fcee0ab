// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/data/augment.hpp"

namespace semc::data {

void AugmentPolicy::validate() const {
  if (rotation_deg < 0.0) throw ConfigError("augment: rotation range must be >= 0");
  if (hflip_prob < 0.0 || hflip_prob > 1.0 || vflip_prob < 0.0 || vflip_prob > 1.0) {
    throw ConfigError("augment: flip probabilities must lie in [0,1]");
  }
  if (brightness_lo <= 0.0 || brightness_hi < brightness_lo) {
    throw ConfigError("augment: brightness range must satisfy 0 < lo <= hi");
  }
  if (resize_target < 1) throw ConfigError("augment: resize target must be positive");
}

Image augment(const Image& img, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  Image out = resize_bilinear(img, policy.resize_target, policy.resize_target);
  if (policy.rotation_deg > 0.0) {
    const double angle = rng.uniform(-policy.rotation_deg, policy.rotation_deg);
    out = rotate_bilinear(out, angle);
  }
  if (policy.hflip_prob > 0.0 && rng.bernoulli(policy.hflip_prob)) out = hflip(out);
  if (policy.vflip_prob > 0.0 && rng.bernoulli(policy.vflip_prob)) out = vflip(out);
  if (policy.brightness_lo != 1.0 || policy.brightness_hi != 1.0) {
    const float factor = float(rng.uniform(policy.brightness_lo, policy.brightness_hi));
    out = adjust_brightness(out, factor);
  }
  clip01(out);
  return out;
}

}  // namespace semc::data
