// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "semc/data/augment.hpp"
#include "semc/data/dataset.hpp"
#include "semc/data/png_io.hpp"
#include "semc/data/synthetic.hpp"

using namespace semc;
using namespace semc::data;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("semc_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

Image checkerboard(Index size, Index cell) {
  Image img({size, size});
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      img[y * size + x] = ((y / cell + x / cell) % 2 == 0) ? 0.85f : 0.15f;
    }
  }
  return img;
}

void write_text(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_CASE("png round-trip preserves 8-bit grayscale exactly") {
  TempDir dir("png");
  Rng rng(5);
  Image img({37, 23});
  // quantized values so the round-trip is lossless
  for (Index i = 0; i < img.numel(); ++i) {
    img[i] = float(rng.uniform_int(256)) / 255.0f;
  }
  const auto path = (dir.path / "probe.png").string();
  write_png_gray(path, img);
  Image back = read_png_gray(path);
  REQUIRE(back.shape() == Shape{37, 23});
  CHECK(back.max_abs_diff(img) < 0.5f / 255.0f);

  CHECK_THROWS_AS(read_png_gray((dir.path / "absent.png").string()), IoError);
  write_text(dir.path / "junk.png", "this is not a png");
  CHECK_THROWS_AS(read_png_gray((dir.path / "junk.png").string()), IoError);
}

TEST_CASE("image ops satisfy their closed-form identities") {
  Image img = checkerboard(32, 4);

  // flips are involutions
  CHECK(hflip(hflip(img)).max_abs_diff(img) == 0.0f);
  CHECK(vflip(vflip(img)).max_abs_diff(img) == 0.0f);

  // resize to the same size is the identity
  CHECK(resize_bilinear(img, 32, 32).max_abs_diff(img) == 0.0f);

  // downscale of a constant image stays constant
  Image flat({16, 16});
  flat.array() = 0.4f;
  auto small = resize_bilinear(flat, 7, 5);
  REQUIRE(small.shape() == Shape{7, 5});
  for (Index i = 0; i < small.numel(); ++i) CHECK(small[i] == doctest::Approx(0.4f));

  // rotation by 0 keeps every pixel; by 360 returns near the original interior
  CHECK(rotate_bilinear(img, 0.0).max_abs_diff(img) == 0.0f);
  auto spun = rotate_bilinear(img, 360.0);
  CHECK(spun.max_abs_diff(img) < 1e-4f);

  // brightness factor 1 is the identity; factor 2 clips into [0,1]
  CHECK(adjust_brightness(img, 1.0f).max_abs_diff(img) == 0.0f);
  auto bright = adjust_brightness(img, 2.0f);
  for (Index i = 0; i < bright.numel(); ++i) {
    CHECK(bright[i] <= 1.0f);
    CHECK(bright[i] >= img[i]);
  }

  // batch stacking lays images out in order
  auto batch = to_batch({img, vflip(img)});
  REQUIRE(batch.shape() == Shape{2, 1, 32, 32});
  CHECK(batch[5] == img[5]);
  CHECK_THROWS_AS(to_batch({img, checkerboard(16, 4)}), ShapeError);
}

TEST_CASE("augmentation is deterministic and honors the identity policy") {
  Image img = checkerboard(48, 6);

  AugmentPolicy identity;
  identity.resize_target = 32;
  Rng rng(3);
  auto out = augment(img, identity, rng);
  CHECK(out.max_abs_diff(resize_bilinear(img, 32, 32)) == 0.0f);

  // a same-size identity policy returns the input untouched
  AugmentPolicy same;
  same.resize_target = 48;
  auto untouched = augment(img, same, rng);
  CHECK(untouched.max_abs_diff(img) == 0.0f);

  // certain horizontal flip applied twice restores the image
  AugmentPolicy flip;
  flip.resize_target = 48;
  flip.hflip_prob = 1.0;
  auto once = augment(img, flip, rng);
  auto twice = augment(once, flip, rng);
  CHECK(once.max_abs_diff(img) > 0.0f);
  CHECK(twice.max_abs_diff(img) == 0.0f);

  // full policy: same stream, same result; different stream, different result
  AugmentPolicy full;
  full.resize_target = 32;
  full.rotation_deg = 20.0;
  full.hflip_prob = 0.5;
  full.vflip_prob = 0.5;
  full.brightness_lo = 0.8;
  full.brightness_hi = 1.2;
  Rng a(77), b(77), c(78);
  auto ra = augment(img, full, a);
  auto rb = augment(img, full, b);
  auto rc = augment(img, full, c);
  CHECK(ra.max_abs_diff(rb) == 0.0f);
  CHECK(ra.max_abs_diff(rc) > 0.0f);
  for (Index i = 0; i < ra.numel(); ++i) {
    CHECK(ra[i] >= 0.0f);
    CHECK(ra[i] <= 1.0f);
  }

  AugmentPolicy bad;
  bad.hflip_prob = 1.5;
  Rng r(1);
  CHECK_THROWS_AS(augment(img, bad, r), ConfigError);
  bad = AugmentPolicy{};
  bad.brightness_lo = 0.0;
  CHECK_THROWS_AS(augment(img, bad, r), ConfigError);
}

TEST_CASE("manifest loading validates structure and contents") {
  TempDir dir("manifest");
  fs::create_directories(dir.path / "img");
  Image px({4, 4});
  for (const char* name : {"a.png", "b.png", "c.png", "d.png"}) {
    write_png_gray((dir.path / "img" / name).string(), px);
  }
  write_text(dir.path / "classes.txt", "cyst\nshadow\n");
  write_text(dir.path / "manifest.csv",
             "path,label\nimg/a.png,cyst\nimg/b.png,shadow\nimg/c.png,cyst\nimg/d.png,shadow\n");

  auto m = load_manifest((dir.path / "manifest.csv").string());
  CHECK(m.num_classes() == 2);
  CHECK(m.size() == 4);
  CHECK(m.class_names[0] == "cyst");
  CHECK(m.entries[1].label == 1);
  CHECK(m.class_counts() == std::vector<Index>{2, 2});
  CHECK(fs::exists(m.image_path(0)));

  CHECK_THROWS_AS(load_manifest((dir.path / "nope.csv").string()), IoError);

  write_text(dir.path / "manifest.csv", "path,label\nimg/a.png,unknown\n");
  CHECK_THROWS_WITH_AS(load_manifest((dir.path / "manifest.csv").string()),
                       doctest::Contains("unknown"), DataError);

  write_text(dir.path / "manifest.csv", "path,label\nimg/a.png,cyst\nimg/a.png,cyst\n");
  CHECK_THROWS_WITH_AS(load_manifest((dir.path / "manifest.csv").string()),
                       doctest::Contains("img/a.png"), DataError);

  write_text(dir.path / "manifest.csv", "path,label\nimg/missing.png,cyst\n");
  CHECK_THROWS_AS(load_manifest((dir.path / "manifest.csv").string()), IoError);

  // a class listed in classes.txt but absent from the rows
  write_text(dir.path / "manifest.csv", "path,label\nimg/a.png,cyst\nimg/b.png,cyst\n");
  CHECK_THROWS_WITH_AS(load_manifest((dir.path / "manifest.csv").string()),
                       doctest::Contains("shadow"), DataError);

  // single-class vocabularies are rejected outright
  write_text(dir.path / "classes.txt", "cyst\n");
  write_text(dir.path / "manifest.csv", "path,label\nimg/a.png,cyst\n");
  CHECK_THROWS_AS(load_manifest((dir.path / "manifest.csv").string()), DataError);

  write_text(dir.path / "classes.txt", "cyst\nshadow\n");
  write_text(dir.path / "manifest.csv", "wrong,header\nimg/a.png,cyst\n");
  CHECK_THROWS_AS(load_manifest((dir.path / "manifest.csv").string()), DataError);
}

TEST_CASE("stratified split is deterministic with per-class proportions") {
  TempDir dir("split");
  SyntheticSpec spec;
  spec.num_classes = 3;
  spec.per_class = 20;
  spec.image_size = 32;
  spec.seed = 11;
  auto manifest_path = generate_synthetic_dataset(spec, dir.str());
  auto m = load_manifest(manifest_path);
  REQUIRE(m.size() == 60);

  auto s1 = stratified_split(m, 0.70, 0.15, 9);
  auto s2 = stratified_split(m, 0.70, 0.15, 9);
  auto s3 = stratified_split(m, 0.70, 0.15, 10);
  CHECK(s1.train == s2.train);
  CHECK(s1.val == s2.val);
  CHECK(s1.test == s2.test);
  CHECK(s1.train != s3.train);

  CHECK(s1.train.size() == 42);  // 14 per class
  CHECK(s1.val.size() == 9);     // 3 per class
  CHECK(s1.test.size() == 9);

  // disjoint and complete
  std::vector<char> seen(60, 0);
  auto mark = [&](const std::vector<Index>& ids) {
    for (Index i : ids) {
      CHECK_FALSE(seen[std::size_t(i)]);
      seen[std::size_t(i)] = 1;
    }
  };
  mark(s1.train);
  mark(s1.val);
  mark(s1.test);
  for (char s : seen) CHECK(s == 1);

  // per-class counts within one sample of the target fractions
  for (Index c = 0; c < 3; ++c) {
    auto count = [&](const std::vector<Index>& ids) {
      Index n = 0;
      for (Index i : ids)
        if (m.entries[std::size_t(i)].label == c) ++n;
      return n;
    };
    CHECK(std::abs(double(count(s1.train)) - 0.70 * 20.0) <= 1.0);
    CHECK(std::abs(double(count(s1.val)) - 0.15 * 20.0) <= 1.0);
    CHECK(std::abs(double(count(s1.test)) - 0.15 * 20.0) <= 1.0);
  }

  CHECK_THROWS_AS(stratified_split(m, 0.0, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(m, 0.9, 0.2, 1), ConfigError);
}

TEST_CASE("synthetic rendering is seed-stable and classes differ in the motif") {
  SyntheticSpec spec;
  spec.num_classes = 7;
  spec.per_class = 2;
  spec.image_size = 64;
  spec.seed = 21;

  auto a1 = render_synthetic_image(spec, 2, 1);
  auto a2 = render_synthetic_image(spec, 2, 1);
  CHECK(a1.max_abs_diff(a2) == 0.0f);

  // different indices give different frames
  auto other = render_synthetic_image(spec, 2, 0);
  CHECK(a1.max_abs_diff(other) > 0.0f);

  // same index, different class: identical outside the motif union,
  // different inside it
  for (Index cb = 1; cb < 7; ++cb) {
    Image mask_a, mask_b;
    auto ia = render_synthetic_image(spec, 0, 0, &mask_a);
    auto ib = render_synthetic_image(spec, cb, 0, &mask_b);
    double inside_sum = 0.0, outside_max = 0.0;
    Index inside_n = 0;
    for (Index i = 0; i < ia.numel(); ++i) {
      const double d = std::abs(double(ia[i]) - double(ib[i]));
      if (mask_a[i] > 0.0f || mask_b[i] > 0.0f) {
        inside_sum += d;
        ++inside_n;
      } else {
        outside_max = std::max(outside_max, d);
      }
    }
    REQUIRE(inside_n > 0);
    CHECK(inside_sum / double(inside_n) > 0.0);
    CHECK(outside_max == 0.0);
  }

  SyntheticSpec bad = spec;
  bad.num_classes = 1;
  CHECK_THROWS_AS(render_synthetic_image(bad, 0, 0), ConfigError);
  CHECK_THROWS_AS(render_synthetic_image(spec, 9, 0), ConfigError);
}

TEST_CASE("the generated corpus loads and counts out exactly") {
  TempDir dir("gen");
  SyntheticSpec spec;
  spec.num_classes = 7;
  spec.per_class = 20;
  spec.image_size = 32;
  spec.seed = 0;
  auto manifest_path = generate_synthetic_dataset(spec, dir.str());

  auto m = load_manifest(manifest_path);
  CHECK(m.num_classes() == 7);
  CHECK(m.size() == 140);
  for (Index count : m.class_counts()) CHECK(count == 20);

  // images decode to the requested geometry with sane dynamic range
  auto img = read_png_gray(m.image_path(0));
  CHECK(img.shape() == Shape{32, 32});
  float lo = 1.0f, hi = 0.0f;
  for (Index i = 0; i < img.numel(); ++i) {
    lo = std::min(lo, img[i]);
    hi = std::max(hi, img[i]);
  }
  CHECK(hi > lo);

  // regeneration with the same seed is byte-identical
  TempDir dir2("gen2");
  generate_synthetic_dataset(spec, dir2.str());
  std::ifstream f1(dir.path / "images" / "class0_0000.png", std::ios::binary);
  std::ifstream f2(dir2.path / "images" / "class0_0000.png", std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK_FALSE(b1.empty());
}
