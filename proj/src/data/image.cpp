// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/data/image.hpp"

#include <algorithm>
#include <cmath>

namespace semc::data {

namespace {

void require_image(const Image& img, const char* op) {
  if (img.rank() != 2 || img.dim(0) < 1 || img.dim(1) < 1) {
    throw ShapeError(std::string(op) + ": expected a non-empty [H,W] image, got " +
                     shape_str(img.shape()));
  }
}

float sample_bilinear(const Image& img, double y, double x) {
  const Index h = img.dim(0), w = img.dim(1);
  const Index y0 = Index(std::floor(y)), x0 = Index(std::floor(x));
  const double fy = y - double(y0), fx = x - double(x0);
  auto at = [&](Index yy, Index xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return double(img[yy * w + xx]);
  };
  const double top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
  const double bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
  return float(top * (1.0 - fy) + bot * fy);
}

}  // namespace

Image resize_bilinear(const Image& img, Index out_h, Index out_w) {
  require_image(img, "resize");
  if (out_h < 1 || out_w < 1) throw ShapeError("resize: target size must be positive");
  const Index h = img.dim(0), w = img.dim(1);
  if (out_h == h && out_w == w) return img;

  Image out({out_h, out_w});
  const double sy = double(h) / double(out_h);
  const double sx = double(w) / double(out_w);
  for (Index oy = 0; oy < out_h; ++oy) {
    // half-pixel centers, clamped to the valid sample range
    const double y = std::clamp((double(oy) + 0.5) * sy - 0.5, 0.0, double(h - 1));
    for (Index ox = 0; ox < out_w; ++ox) {
      const double x = std::clamp((double(ox) + 0.5) * sx - 0.5, 0.0, double(w - 1));
      out[oy * out_w + ox] = sample_bilinear(img, y, x);
    }
  }
  return out;
}

Image rotate_bilinear(const Image& img, double degrees) {
  require_image(img, "rotate");
  const Index h = img.dim(0), w = img.dim(1);
  const double rad = degrees * (M_PI / 180.0);
  const double c = std::cos(rad), s = std::sin(rad);
  const double cy = (double(h) - 1.0) / 2.0, cx = (double(w) - 1.0) / 2.0;

  Image out({h, w});
  for (Index oy = 0; oy < h; ++oy) {
    for (Index ox = 0; ox < w; ++ox) {
      // inverse-rotate the output coordinate into the source frame
      const double dy = double(oy) - cy, dx = double(ox) - cx;
      const double sx = cx + c * dx + s * dy;
      const double sy = cy - s * dx + c * dy;
      out[oy * w + ox] = (sy < -0.5 || sy > double(h) - 0.5 || sx < -0.5 || sx > double(w) - 0.5)
                             ? 0.0f
                             : sample_bilinear(img, sy, sx);
    }
  }
  return out;
}

Image hflip(const Image& img) {
  require_image(img, "hflip");
  const Index h = img.dim(0), w = img.dim(1);
  Image out({h, w});
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) out[y * w + x] = img[y * w + (w - 1 - x)];
  }
  return out;
}

Image vflip(const Image& img) {
  require_image(img, "vflip");
  const Index h = img.dim(0), w = img.dim(1);
  Image out({h, w});
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) out[y * w + x] = img[(h - 1 - y) * w + x];
  }
  return out;
}

Image adjust_brightness(const Image& img, float factor) {
  require_image(img, "brightness");
  Image out = img;
  out.array() = (out.array() * factor).cwiseMax(0.0f).cwiseMin(1.0f);
  return out;
}

void clip01(Image& img) { img.array() = img.array().cwiseMax(0.0f).cwiseMin(1.0f); }

Tensor<float> to_batch(const std::vector<Image>& images) {
  if (images.empty()) throw ShapeError("to_batch: empty image list");
  const Index h = images[0].dim(0), w = images[0].dim(1);
  for (const auto& im : images) {
    require_image(im, "to_batch");
    if (im.dim(0) != h || im.dim(1) != w) {
      throw ShapeError("to_batch: mixed image sizes " + shape_str(images[0].shape()) +
                       " vs " + shape_str(im.shape()));
    }
  }
  Tensor<float> out({Index(images.size()), 1, h, w});
  for (std::size_t b = 0; b < images.size(); ++b) {
    std::copy(images[b].data(), images[b].data() + h * w, out.data() + Index(b) * h * w);
  }
  return out;
}

}  // namespace semc::data
