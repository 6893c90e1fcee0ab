// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/data/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <vector>

namespace semc::data {

namespace {

struct FileCloser {
  std::FILE* fp = nullptr;
  ~FileCloser() {
    if (fp) std::fclose(fp);
  }
};

}  // namespace

Image read_png_gray(const std::string& path) {
  FileCloser file;
  file.fp = std::fopen(path.c_str(), "rb");
  if (!file.fp) throw IoError("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png: allocation failed");
  }

  // declared before setjmp so the error path unwinds them normally
  std::vector<unsigned char> raster;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG: " + path);
  }

  png_init_io(png, file.fp);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_COLOR) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);  // default luminance weights
  }
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  const png_size_t rowbytes = png_get_rowbytes(png, info);
  raster.resize(std::size_t(rowbytes) * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + std::size_t(y) * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image out({Index(height), Index(width)});
  for (png_uint_32 y = 0; y < height; ++y) {
    const unsigned char* src = raster.data() + std::size_t(y) * rowbytes;
    for (png_uint_32 x = 0; x < width; ++x) {
      out[Index(y) * Index(width) + Index(x)] = float(src[x]) / 255.0f;
    }
  }
  return out;
}

void write_png_gray(const std::string& path, const Image& img) {
  if (img.rank() != 2 || img.dim(0) < 1 || img.dim(1) < 1) {
    throw ShapeError("png write: expected a non-empty [H,W] image, got " +
                     shape_str(img.shape()));
  }
  const Index h = img.dim(0), w = img.dim(1);

  FileCloser file;
  file.fp = std::fopen(path.c_str(), "wb");
  if (!file.fp) throw IoError("cannot create " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png: allocation failed");
  }

  std::vector<unsigned char> raster;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG: " + path);
  }

  raster.resize(std::size_t(h) * std::size_t(w));
  for (Index i = 0; i < h * w; ++i) {
    const float v = std::min(1.0f, std::max(0.0f, img[i]));
    raster[std::size_t(i)] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  rows.resize(std::size_t(h));
  for (Index y = 0; y < h; ++y) rows[std::size_t(y)] = raster.data() + std::size_t(y * w);

  png_init_io(png, file.fp);
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace semc::data
