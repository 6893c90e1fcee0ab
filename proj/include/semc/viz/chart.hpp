// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semc/data/image.hpp"

namespace semc::viz {

/// One polyline with point markers. `shade` is the gray level in [0,1]
/// (0 draws black).
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  float shade = 0.0f;
  bool markers = true;
};

struct ChartSpec {
  Index width = 720;
  Index height = 480;
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Explicit x tick positions with labels; when empty, numeric ticks are
  /// derived from the data range.
  std::vector<std::pair<double, std::string>> x_ticks;
  std::optional<double> y_min;
  std::optional<double> y_max;
};

/// Stamp 5x7 bitmap glyphs (letters are case-folded) onto the image with the
/// top-left corner of the first glyph at (top, left).
void draw_text(data::Image& img, Index top, Index left, const std::string& text,
               float shade = 0.0f, Index scale = 1);

/// Render the chart as a grayscale image: white background, black axes and
/// labels, one shaded polyline per series.
data::Image render_chart(const ChartSpec& spec);

/// Render and encode in one step.
void write_chart_png(const std::string& path, const ChartSpec& spec);

}  // namespace semc::viz
