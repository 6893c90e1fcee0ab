// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "semc/data/image.hpp"

namespace semc::data {

/// Decode a PNG to a grayscale [H,W] image in [0,1]. Color inputs are
/// luminance-converted; 16-bit depth is reduced to 8; alpha is dropped.
Image read_png_gray(const std::string& path);

/// Encode as 8-bit grayscale. Values are clipped to [0,1] and quantized.
void write_png_gray(const std::string& path, const Image& img);

}  // namespace semc::data
