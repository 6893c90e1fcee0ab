// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "semc/data/png_io.hpp"

namespace semc::data {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic: need at least two classes");
  if (per_class < 1) throw ConfigError("synthetic: per_class must be positive");
  if (image_size < 32) throw ConfigError("synthetic: image_size must be >= 32");
}

namespace {

struct Pose {
  double dx = 0.0, dy = 0.0;  // center offset, pixels
  double rot = 0.0;           // radians
  double scale = 1.0;
};

void paint_background(Image& img, Rng& rng) {
  const Index size = img.dim(0);
  for (Index y = 0; y < size; ++y) {
    const float depth = 0.15f + 0.10f * float(y) / float(size);
    for (Index x = 0; x < size; ++x) img[y * size + x] = depth;
  }
  // three soft blobs of varying extent
  for (int k = 0; k < 3; ++k) {
    const double cy = rng.uniform(0.1, 0.9) * double(size);
    const double cx = rng.uniform(0.1, 0.9) * double(size);
    const double radius = rng.uniform(0.15, 0.40) * double(size);
    const double amp = rng.uniform(0.03, 0.08);
    for (Index y = 0; y < size; ++y) {
      for (Index x = 0; x < size; ++x) {
        const double d2 = (double(y) - cy) * (double(y) - cy) +
                          (double(x) - cx) * (double(x) - cx);
        img[y * size + x] += float(amp * std::exp(-d2 / (2.0 * radius * radius)));
      }
    }
  }
}

/// Rotate (y,x) about the motif center into motif-local coordinates.
struct Frame {
  double cy, cx, cos_r, sin_r, inv_scale;
  void local(double y, double x, double& ly, double& lx) const {
    const double dy = (y - cy) * inv_scale, dx = (x - cx) * inv_scale;
    lx = cos_r * dx + sin_r * dy;
    ly = -sin_r * dx + cos_r * dy;
  }
};

void paint_ellipse(Image& img, Image& mask, const Frame& f, double a, double b,
                   float intensity) {
  const Index size = img.dim(0);
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      double ly, lx;
      f.local(double(y), double(x), ly, lx);
      const double r = (lx * lx) / (a * a) + (ly * ly) / (b * b);
      if (r <= 1.0) {
        // soft edge: full strength inside, fading over the outer 20%
        const float w = float(std::min(1.0, (1.0 - r) / 0.2));
        img[y * size + x] += intensity * w;
        mask[y * size + x] = 1.0f;
      }
    }
  }
}

void paint_streak(Image& img, Image& mask, const Frame& f, double half_len,
                  double half_width, float intensity) {
  const Index size = img.dim(0);
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      double ly, lx;
      f.local(double(y), double(x), ly, lx);
      if (std::abs(lx) <= half_len && std::abs(ly) <= half_width) {
        const float w = float(1.0 - 0.5 * std::abs(ly) / half_width);
        img[y * size + x] += intensity * w;
        mask[y * size + x] = 1.0f;
      }
    }
  }
}

void paint_texture(Image& img, Image& mask, const Frame& f, double half_extent,
                   double frequency, float intensity) {
  const Index size = img.dim(0);
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      double ly, lx;
      f.local(double(y), double(x), ly, lx);
      if (std::abs(lx) <= half_extent && std::abs(ly) <= half_extent) {
        const double grid = std::sin(frequency * lx) * std::sin(frequency * ly);
        img[y * size + x] += intensity * float(0.5 + 0.5 * grid);
        mask[y * size + x] = 1.0f;
      }
    }
  }
}

}  // namespace

Image render_synthetic_image(const SyntheticSpec& spec, Index class_id, Index index,
                             Image* mask_out) {
  spec.validate();
  if (class_id < 0 || class_id >= spec.num_classes) {
    throw ConfigError("synthetic: class id " + std::to_string(class_id) + " out of range");
  }
  const Index size = spec.image_size;
  Rng rng = Rng(spec.seed).fork(std::uint64_t(index));

  Image img({size, size});
  paint_background(img, rng);

  Pose pose;
  pose.dx = rng.uniform(-0.06, 0.06) * double(size);
  pose.dy = rng.uniform(-0.06, 0.06) * double(size);
  pose.rot = rng.uniform(-0.26, 0.26);  // about +-15 degrees
  pose.scale = rng.uniform(0.9, 1.1);

  // class-specific geometry; the random stream is never consulted here, so
  // classes at the same index share every stochastic draw
  const Index kind = class_id % 3;
  const double grade = double(class_id / 3);
  Frame frame;
  frame.cy = double(size) / 2.0 + pose.dy;
  frame.cx = double(size) / 2.0 + pose.dx;
  const double class_rot = pose.rot + 0.35 * double(class_id);
  frame.cos_r = std::cos(class_rot);
  frame.sin_r = std::sin(class_rot);
  frame.inv_scale = 1.0 / pose.scale;

  Image mask({size, size});
  if (kind == 0) {
    const double a = (0.20 + 0.03 * grade) * double(size);
    const double b = (0.11 + 0.02 * grade) * double(size);
    paint_ellipse(img, mask, frame, a, b, 0.45f);
  } else if (kind == 1) {
    const double half_len = (0.30 + 0.04 * grade) * double(size);
    const double half_width = (0.020 + 0.006 * grade) * double(size);
    paint_streak(img, mask, frame, half_len, half_width, 0.50f);
  } else {
    const double half_extent = (0.18 + 0.03 * grade) * double(size);
    const double frequency = 2.0 * M_PI * (5.0 + 1.5 * grade) / double(size);
    paint_texture(img, mask, frame, half_extent, frequency, 0.40f);
  }

  // multiplicative speckle over the whole frame
  for (Index i = 0; i < size * size; ++i) {
    img[i] *= 1.0f + 0.10f * float(rng.normal());
  }
  clip01(img);

  if (mask_out) *mask_out = std::move(mask);
  return img;
}

std::string generate_synthetic_dataset(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  const fs::path root(out_dir);
  fs::create_directories(root / "images");

  {
    std::ofstream classes(root / "classes.txt");
    if (!classes) throw IoError("cannot create " + (root / "classes.txt").string());
    for (Index c = 0; c < spec.num_classes; ++c) classes << "class" << c << "\n";
  }

  std::ofstream manifest(root / "manifest.csv");
  if (!manifest) throw IoError("cannot create " + (root / "manifest.csv").string());
  manifest << "path,label\n";
  for (Index c = 0; c < spec.num_classes; ++c) {
    for (Index i = 0; i < spec.per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "images/class%lld_%04lld.png",
                    static_cast<long long>(c), static_cast<long long>(i));
      write_png_gray((root / name).string(), render_synthetic_image(spec, c, i));
      manifest << name << ",class" << c << "\n";
    }
  }
  return (root / "manifest.csv").string();
}

}  // namespace semc::data
