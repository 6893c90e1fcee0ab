// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "semc/core/tensor.hpp"

namespace semc::data {

/// Grayscale images travel as rank-2 [H,W] tensors with values in [0,1].
using Image = Tensor<float>;

Image resize_bilinear(const Image& img, Index out_h, Index out_w);

/// Rotate counterclockwise about the image center with bilinear sampling.
/// Samples falling outside the source are filled with 0.
Image rotate_bilinear(const Image& img, double degrees);

Image hflip(const Image& img);
Image vflip(const Image& img);

/// Multiply by `factor` and clip to [0,1].
Image adjust_brightness(const Image& img, float factor);

void clip01(Image& img);

/// Stack same-sized images into a [B,1,H,W] batch.
Tensor<float> to_batch(const std::vector<Image>& images);

}  // namespace semc::data
