// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "semc/core/rng.hpp"
#include "semc/data/image.hpp"

namespace semc::data {

/// Procedural grayscale dataset: every image shares the same background
/// model (depth gradient, soft blobs, multiplicative speckle); each class
/// plants its own motif (ellipse, streak, or textured patch with
/// class-specific geometry) under a small random pose jitter, so classes are
/// separable only through the motif region.
struct SyntheticSpec {
  Index num_classes = 7;
  Index per_class = 20;
  Index image_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Render sample `index` of class `class_id`. The random stream depends only
/// on (seed, index), so images of different classes at the same index share
/// background and jitter bit-for-bit and differ only where motifs land.
/// `mask_out`, when given, receives a [H,W] indicator of the motif region.
Image render_synthetic_image(const SyntheticSpec& spec, Index class_id, Index index,
                             Image* mask_out = nullptr);

/// Write `images/`, `manifest.csv`, and `classes.txt` under `out_dir`.
/// Returns the manifest path.
std::string generate_synthetic_dataset(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace semc::data
