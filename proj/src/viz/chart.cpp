// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/viz/chart.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "semc/data/png_io.hpp"

namespace semc::viz {

namespace {

using Glyph = std::array<const char*, 7>;

// 5x7 typeface covering what axis labels need: digits, case-folded letters,
// and a little punctuation. '1' marks a set pixel.
const Glyph* find_glyph(char c) {
  static const Glyph kSpace = {"00000", "00000", "00000", "00000", "00000", "00000", "00000"};
  static const Glyph kDot = {"00000", "00000", "00000", "00000", "00000", "01100", "01100"};
  static const Glyph kDash = {"00000", "00000", "00000", "01110", "00000", "00000", "00000"};
  static const Glyph kColon = {"00000", "01100", "01100", "00000", "01100", "01100", "00000"};
  static const Glyph kSlash = {"00001", "00010", "00010", "00100", "01000", "01000", "10000"};
  static const Glyph kPercent = {"11000", "11001", "00010", "00100", "01000", "10011", "00011"};
  static const Glyph kEquals = {"00000", "00000", "11111", "00000", "11111", "00000", "00000"};
  static const Glyph kUnderscore = {"00000", "00000", "00000", "00000", "00000", "00000", "11111"};
  static const Glyph kPlus = {"00000", "00100", "00100", "11111", "00100", "00100", "00000"};
  static const Glyph kDigits[10] = {
      {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},
      {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},
      {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},
      {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},
      {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},
      {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},
      {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},
      {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},
      {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},
      {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},
  };
  static const Glyph kLetters[26] = {
      {"01110", "10001", "10001", "11111", "10001", "10001", "10001"},  // A
      {"11110", "10001", "10001", "11110", "10001", "10001", "11110"},  // B
      {"01110", "10001", "10000", "10000", "10000", "10001", "01110"},  // C
      {"11110", "10001", "10001", "10001", "10001", "10001", "11110"},  // D
      {"11111", "10000", "10000", "11110", "10000", "10000", "11111"},  // E
      {"11111", "10000", "10000", "11110", "10000", "10000", "10000"},  // F
      {"01110", "10001", "10000", "10111", "10001", "10001", "01111"},  // G
      {"10001", "10001", "10001", "11111", "10001", "10001", "10001"},  // H
      {"01110", "00100", "00100", "00100", "00100", "00100", "01110"},  // I
      {"00111", "00010", "00010", "00010", "00010", "10010", "01100"},  // J
      {"10001", "10010", "10100", "11000", "10100", "10010", "10001"},  // K
      {"10000", "10000", "10000", "10000", "10000", "10000", "11111"},  // L
      {"10001", "11011", "10101", "10101", "10001", "10001", "10001"},  // M
      {"10001", "11001", "10101", "10011", "10001", "10001", "10001"},  // N
      {"01110", "10001", "10001", "10001", "10001", "10001", "01110"},  // O
      {"11110", "10001", "10001", "11110", "10000", "10000", "10000"},  // P
      {"01110", "10001", "10001", "10001", "10101", "10010", "01101"},  // Q
      {"11110", "10001", "10001", "11110", "10100", "10010", "10001"},  // R
      {"01111", "10000", "10000", "01110", "00001", "00001", "11110"},  // S
      {"11111", "00100", "00100", "00100", "00100", "00100", "00100"},  // T
      {"10001", "10001", "10001", "10001", "10001", "10001", "01110"},  // U
      {"10001", "10001", "10001", "10001", "10001", "01010", "00100"},  // V
      {"10001", "10001", "10001", "10101", "10101", "10101", "01010"},  // W
      {"10001", "10001", "01010", "00100", "01010", "10001", "10001"},  // X
      {"10001", "10001", "01010", "00100", "00100", "00100", "00100"},  // Y
      {"11111", "00001", "00010", "00100", "01000", "10000", "11111"},  // Z
  };
  if (c >= '0' && c <= '9') return &kDigits[c - '0'];
  const char upper = char(std::toupper(static_cast<unsigned char>(c)));
  if (upper >= 'A' && upper <= 'Z') return &kLetters[upper - 'A'];
  switch (c) {
    case ' ': return &kSpace;
    case '.': return &kDot;
    case '-': return &kDash;
    case ':': return &kColon;
    case '/': return &kSlash;
    case '%': return &kPercent;
    case '=': return &kEquals;
    case '_': return &kUnderscore;
    case '+': return &kPlus;
    default: return &kSpace;
  }
}

void set_px(data::Image& img, Index y, Index x, float shade) {
  if (y < 0 || x < 0 || y >= img.dim(0) || x >= img.dim(1)) return;
  img[y * img.dim(1) + x] = shade;
}

void draw_line(data::Image& img, double y0, double x0, double y1, double x1, float shade) {
  const double steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) * 2.0 + 1.0;
  const Index n = Index(steps);
  for (Index i = 0; i <= n; ++i) {
    const double t = double(i) / double(n);
    set_px(img, Index(std::lround(y0 + t * (y1 - y0))), Index(std::lround(x0 + t * (x1 - x0))),
           shade);
  }
}

void draw_marker(data::Image& img, Index y, Index x, float shade) {
  for (Index dy = -1; dy <= 1; ++dy) {
    for (Index dx = -1; dx <= 1; ++dx) set_px(img, y + dy, x + dx, shade);
  }
}

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

constexpr Index kGlyphW = 5;
constexpr Index kGlyphH = 7;
constexpr Index kGlyphGap = 1;

Index text_width(const std::string& text, Index scale) {
  if (text.empty()) return 0;
  return Index(text.size()) * (kGlyphW + kGlyphGap) * scale - kGlyphGap * scale;
}

}  // namespace

void draw_text(data::Image& img, Index top, Index left, const std::string& text, float shade,
               Index scale) {
  if (scale < 1) throw ConfigError("draw_text: scale must be >= 1");
  Index cursor = left;
  for (char c : text) {
    const Glyph& glyph = *find_glyph(c);
    for (Index row = 0; row < kGlyphH; ++row) {
      for (Index col = 0; col < kGlyphW; ++col) {
        if (glyph[std::size_t(row)][col] != '1') continue;
        for (Index sy = 0; sy < scale; ++sy) {
          for (Index sx = 0; sx < scale; ++sx) {
            set_px(img, top + row * scale + sy, cursor + col * scale + sx, shade);
          }
        }
      }
    }
    cursor += (kGlyphW + kGlyphGap) * scale;
  }
}

data::Image render_chart(const ChartSpec& spec) {
  if (spec.width < 160 || spec.height < 120) {
    throw ConfigError("chart: canvas must be at least 160x120");
  }
  data::Image img({spec.height, spec.width});
  img.array() = 1.0f;

  const Index left = 64;
  const Index right = spec.width - 16;
  const Index top = 28;
  const Index bottom = spec.height - 44;

  // data ranges
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -std::numeric_limits<double>::infinity();
  double y_lo = spec.y_min.value_or(std::numeric_limits<double>::infinity());
  double y_hi = spec.y_max.value_or(-std::numeric_limits<double>::infinity());
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw ShapeError("chart: series x/y length mismatch");
    for (double v : s.x) {
      x_lo = std::min(x_lo, v);
      x_hi = std::max(x_hi, v);
    }
    if (!spec.y_min || !spec.y_max) {
      for (double v : s.y) {
        if (!spec.y_min) y_lo = std::min(y_lo, v);
        if (!spec.y_max) y_hi = std::max(y_hi, v);
      }
    }
  }
  for (const auto& [pos, label] : spec.x_ticks) {
    x_lo = std::min(x_lo, pos);
    x_hi = std::max(x_hi, pos);
  }
  if (!std::isfinite(x_lo)) {
    x_lo = 0.0;
    x_hi = 1.0;
  }
  if (!std::isfinite(y_lo) || !std::isfinite(y_hi)) {
    y_lo = 0.0;
    y_hi = 1.0;
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) {
    y_lo -= 1.0;
    y_hi += 1.0;
  } else {
    const double pad = 0.05 * (y_hi - y_lo);
    if (!spec.y_min) y_lo -= pad;
    if (!spec.y_max) y_hi += pad;
  }

  const auto to_px_x = [&](double v) {
    return double(left) + (v - x_lo) / (x_hi - x_lo) * double(right - left);
  };
  const auto to_px_y = [&](double v) {
    return double(bottom) - (v - y_lo) / (y_hi - y_lo) * double(bottom - top);
  };

  // horizontal grid and y tick labels
  constexpr Index kYTicks = 5;
  for (Index i = 0; i <= kYTicks; ++i) {
    const double v = y_lo + (y_hi - y_lo) * double(i) / double(kYTicks);
    const Index py = Index(std::lround(to_px_y(v)));
    if (i > 0) draw_line(img, py, left + 1, py, right, 0.88f);
    const std::string label = format_tick(std::round(v * 100.0) / 100.0);
    draw_text(img, py - kGlyphH / 2, left - 6 - text_width(label, 1), label);
  }

  // x ticks: explicit labels or derived numeric ones
  std::vector<std::pair<double, std::string>> ticks = spec.x_ticks;
  if (ticks.empty()) {
    constexpr Index kXTicks = 5;
    for (Index i = 0; i <= kXTicks; ++i) {
      const double v = x_lo + (x_hi - x_lo) * double(i) / double(kXTicks);
      ticks.emplace_back(v, format_tick(std::round(v * 100.0) / 100.0));
    }
  }
  for (const auto& [pos, label] : ticks) {
    const Index px = Index(std::lround(to_px_x(pos)));
    draw_line(img, bottom, px, bottom + 4, px, 0.0f);
    draw_text(img, bottom + 7, px - text_width(label, 1) / 2, label);
  }

  // axes
  draw_line(img, top, left, bottom, left, 0.0f);
  draw_line(img, bottom, left, bottom, right, 0.0f);

  // series
  for (const auto& s : spec.series) {
    for (std::size_t i = 0; i + 1 < s.x.size(); ++i) {
      draw_line(img, to_px_y(s.y[i]), to_px_x(s.x[i]), to_px_y(s.y[i + 1]), to_px_x(s.x[i + 1]),
                s.shade);
    }
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        draw_marker(img, Index(std::lround(to_px_y(s.y[i]))),
                    Index(std::lround(to_px_x(s.x[i]))), s.shade);
      }
    }
  }

  // legend: series names in their shades, top-right
  Index legend_row = top + 4;
  for (const auto& s : spec.series) {
    if (s.name.empty()) continue;
    draw_text(img, legend_row, right - text_width(s.name, 1), s.name, s.shade);
    legend_row += kGlyphH + 3;
  }

  if (!spec.title.empty()) {
    draw_text(img, 8, (spec.width - text_width(spec.title, 1)) / 2, spec.title);
  }
  if (!spec.x_label.empty()) {
    draw_text(img, spec.height - kGlyphH - 6, (spec.width - text_width(spec.x_label, 1)) / 2,
              spec.x_label);
  }
  if (!spec.y_label.empty()) {
    draw_text(img, 8, 4, spec.y_label);
  }
  return img;
}

void write_chart_png(const std::string& path, const ChartSpec& spec) {
  data::write_png_gray(path, render_chart(spec));
}

}  // namespace semc::viz
