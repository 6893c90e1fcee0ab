// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "semc/cli/cli.hpp"
#include "semc/data/dataset.hpp"
#include "semc/data/png_io.hpp"

using namespace semc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("semc_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

// Redirects a file descriptor into a file so output from both C stdio and
// iostreams can be inspected after the call.
struct CaptureFd {
  CaptureFd(int fd, fs::path file) : fd_(fd), file_(std::move(file)) {
    flush_all();
    saved_ = ::dup(fd_);
    const int sink = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    ::dup2(sink, fd_);
    ::close(sink);
  }
  ~CaptureFd() { restore(); }
  std::string text() {
    restore();
    std::ifstream in(file_, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  void flush_all() {
    std::cout.flush();
    std::cerr.flush();
    std::fflush(stdout);
    std::fflush(stderr);
  }
  void restore() {
    if (saved_ < 0) return;
    flush_all();
    ::dup2(saved_, fd_);
    ::close(saved_);
    saved_ = -1;
  }
  int fd_;
  fs::path file_;
  int saved_ = -1;
};

int run_cli(const TempDir& dir, const std::vector<std::string>& args,
            std::string* out_text = nullptr, std::string* err_text = nullptr) {
  CaptureFd out(1, dir.path / "stdout.txt");
  CaptureFd err(2, dir.path / "stderr.txt");
  int rc = -1;
  try {
    rc = cli::run(args);
  } catch (...) {
    if (out_text) *out_text = out.text();
    if (err_text) *err_text = err.text();
    throw;
  }
  if (out_text) *out_text = out.text();
  if (err_text) *err_text = err.text();
  return rc;
}

std::string make_corpus(const TempDir& dir, const std::string& name) {
  const fs::path corpus = dir.path / name;
  const int rc = run_cli(dir, {"gen-synth", "--out", corpus.string(), "--classes", "3",
                               "--per-class", "6", "--size", "32", "--seed", "5"});
  REQUIRE(rc == 0);
  return (corpus / "manifest.csv").string();
}

std::vector<std::string> tiny_sets(const std::string& manifest) {
  return {
      "--set", "data.manifest=" + manifest,
      "--set", "model.input_size=32",
      "--set", "model.stage_channels=4,8,16,32",
      "--set", "model.num_classes=3",
      "--set", "ssfm.reduction_ratio=4",
      "--set", "ssfm.spatial_kernel=3",
      "--set", "ssfm.scale_kernels=1,3",
      "--set", "mcrm.embed_dim=8",
      "--set", "mcrm.queue_capacity=32",
      "--set", "train.batch_size=4",
      "--set", "train.max_epochs=2",
      "--set", "augment.rotation_deg=5.0",
  };
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

TEST_CASE("gen-synth writes a loadable corpus and refuses accidental overwrites") {
  TempDir dir("synth");
  const std::string manifest = make_corpus(dir, "corpus");

  const data::DatasetManifest loaded = data::load_manifest(manifest);
  CHECK(loaded.entries.size() == 18);

  std::string err;
  const std::vector<std::string> again = {"gen-synth", "--out", (dir.path / "corpus").string(),
                                          "--classes", "3", "--per-class", "6", "--size", "32"};
  CHECK(run_cli(dir, again, nullptr, &err) == 2);
  CHECK(err.find("refusing to overwrite") != std::string::npos);
  CHECK(run_cli(dir, cat(again, {"--force"})) == 0);
}

TEST_CASE("train writes run artifacts and is seed deterministic") {
  TempDir dir("train");
  const std::string manifest = make_corpus(dir, "corpus");
  const fs::path run_a = dir.path / "runA";
  const fs::path run_b = dir.path / "runB";

  std::string out;
  const std::vector<std::string> base =
      cat({"train", "--seed", "3"}, tiny_sets(manifest));
  CHECK(run_cli(dir, cat(base, {"--out", run_a.string()}), &out) == 0);
  CHECK(out.find("best epoch") != std::string::npos);
  CHECK(out.find("val acc") != std::string::npos);
  CHECK(out.find("test acc") != std::string::npos);
  CHECK(out.find("run directory") != std::string::npos);
  CHECK(fs::exists(run_a / "config.resolved"));
  CHECK(fs::exists(run_a / "metrics.csv"));
  CHECK(fs::exists(run_a / "best.ckpt"));
  CHECK(slurp(run_a / "config.resolved").find("train.seed = 3\n") != std::string::npos);

  const std::vector<std::string> lines = csv_lines(run_a / "metrics.csv");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] ==
        "epoch,lr,L_sup,L_self,L_mc,L_moe,alpha,L_total,val_acc,val_precision,val_recall,val_f1");

  CHECK(run_cli(dir, cat(base, {"--out", run_b.string()})) == 0);
  CHECK(slurp(run_a / "metrics.csv") == slurp(run_b / "metrics.csv"));
  CHECK(!slurp(run_a / "metrics.csv").empty());

  std::string err;
  CHECK(run_cli(dir, cat(base, {"--out", run_a.string()}), nullptr, &err) == 2);
  CHECK(err.find("refusing to overwrite") != std::string::npos);
  CHECK(run_cli(dir, cat(base, {"--out", run_a.string(), "--force"})) == 0);
}

TEST_CASE("zero self-contrastive weight makes the mixed loss equal the supervised one") {
  TempDir dir("lambda");
  const std::string manifest = make_corpus(dir, "corpus");
  const fs::path run = dir.path / "run";

  const int rc = run_cli(dir, cat({"train", "--out", run.string(), "--seed", "1", "--set",
                                   "mcrm.lambda=0.0"},
                                  tiny_sets(manifest)));
  REQUIRE(rc == 0);

  const std::vector<std::string> lines = csv_lines(run / "metrics.csv");
  REQUIRE(lines.size() >= 2);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> fields = csv_fields(lines[i]);
    REQUIRE(fields.size() == 12);
    CHECK(fields[2] == fields[4]);
  }
}

TEST_CASE("eval reloads a checkpoint and prints a confusion matrix") {
  TempDir dir("eval");
  const std::string manifest = make_corpus(dir, "corpus");
  const fs::path run = dir.path / "run";
  REQUIRE(run_cli(dir, cat({"train", "--out", run.string(), "--seed", "3"},
                           tiny_sets(manifest))) == 0);
  const std::string ckpt = (run / "best.ckpt").string();

  std::string out;
  CHECK(run_cli(dir, cat({"eval", "--ckpt", ckpt, "--seed", "3"}, tiny_sets(manifest)), &out) ==
        0);
  CHECK(out.find("test acc") != std::string::npos);
  CHECK(out.find("confusion") != std::string::npos);

  CHECK(run_cli(dir, cat({"eval", "--ckpt", ckpt, "--seed", "3", "--split", "val"},
                         tiny_sets(manifest)),
                &out) == 0);
  CHECK(out.find("val acc") != std::string::npos);

  std::string err;
  CHECK(run_cli(dir, cat({"eval", "--ckpt", ckpt, "--seed", "4"}, tiny_sets(manifest)), nullptr,
                &err) == 1);
  CHECK(err.find("hash mismatch") != std::string::npos);

  CHECK(run_cli(dir, cat({"eval", "--ckpt", (dir.path / "missing.ckpt").string(), "--seed", "3"},
                         tiny_sets(manifest))) == 1);

  CHECK(run_cli(dir, cat({"eval", "--ckpt", ckpt, "--seed", "3", "--split", "bogus"},
                         tiny_sets(manifest)),
                nullptr, &err) == 2);
  CHECK(err.find("--split") != std::string::npos);
}

TEST_CASE("usage and configuration errors exit with code 2") {
  TempDir dir("usage");

  CHECK(run_cli(dir, {}) == 2);
  CHECK(run_cli(dir, {"bogus"}) == 2);
  CHECK(run_cli(dir, {"train"}) == 2);
  CHECK(run_cli(dir, {"--help"}) == 0);
  CHECK(run_cli(dir, {"train", "--help"}) == 0);

  std::string err;
  CHECK(run_cli(dir,
                {"train", "--out", (dir.path / "x").string(), "--set", "train.typo=1"},
                nullptr, &err) == 2);
  CHECK(err.find("train.typo") != std::string::npos);

  CHECK(run_cli(dir, {"train", "--out", (dir.path / "x").string()}, nullptr, &err) == 2);
  CHECK(err.find("data.manifest is not set") != std::string::npos);

  CHECK(run_cli(dir,
                {"train", "--out", (dir.path / "x").string(), "--set",
                 "data.manifest=" + (dir.path / "nope.csv").string()},
                nullptr, &err) == 2);
  CHECK(err.find("nope.csv") != std::string::npos);
}

TEST_CASE("ablate sweeps the module grid and summarizes per-seed scores") {
  TempDir dir("ablate");
  const std::string manifest = make_corpus(dir, "corpus");
  const fs::path out_one = dir.path / "ab1";
  const fs::path out_two = dir.path / "ab2";

  std::string table;
  const std::vector<std::string> base = cat({"ablate", "--seeds", "0"}, tiny_sets(manifest));
  REQUIRE(run_cli(dir, cat(base, {"--out", out_one.string()}), &table) == 0);
  CHECK(table.find("| configuration | ACE | SAMC | contrastive loss |") != std::string::npos);
  CHECK(fs::exists(out_one / "ablate.md"));
  CHECK(fs::exists(out_one / "runs" / "baseline_seed0" / "metrics.csv"));
  CHECK(fs::exists(out_one / "runs" / "full_seed0" / "best.ckpt"));

  const std::vector<std::string> lines = csv_lines(out_one / "ablate.csv");
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "config,ace,samc,lmc,seed,val_acc,val_f1");
  CHECK(lines[1].rfind("baseline,0,0,0,0,", 0) == 0);
  CHECK(lines[5].rfind("full,1,1,1,0,", 0) == 0);

  // Two parallel jobs must land on the same numbers as a serial sweep.
  REQUIRE(run_cli(dir, cat(base, {"--out", out_two.string(), "--jobs", "2"})) == 0);
  CHECK(slurp(out_one / "ablate.csv") == slurp(out_two / "ablate.csv"));
}

TEST_CASE("sweep-alpha writes one row per mixing mode plus a chart") {
  TempDir dir("sweep");
  const std::string manifest = make_corpus(dir, "corpus");
  const fs::path out = dir.path / "sweep";

  REQUIRE(run_cli(dir, cat({"sweep-alpha", "--out", out.string(), "--jobs", "2"},
                           tiny_sets(manifest))) == 0);

  const std::vector<std::string> lines = csv_lines(out / "sweep_alpha.csv");
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "alpha,val_acc,val_f1");
  CHECK(lines[1].rfind("0.01,", 0) == 0);
  CHECK(lines[6].rfind("adaptive,", 0) == 0);

  const data::Image chart = data::read_png_gray((out / "sweep_alpha.png").string());
  CHECK(chart.dim(0) == 480);
  CHECK(chart.dim(1) == 720);
}

TEST_CASE("inspect reports parameter groups, queue occupancy, and gate weights") {
  TempDir dir("inspect");
  const std::string manifest = make_corpus(dir, "corpus");

  std::string out;
  CHECK(run_cli(dir, cat({"inspect"}, tiny_sets(manifest)), &out) == 0);
  CHECK(out.find("parameter groups") != std::string::npos);
  CHECK(out.find("queue occupancy 0/32") != std::string::npos);
  CHECK(out.find("row sums within 1e-6: yes") != std::string::npos);

  const fs::path run = dir.path / "run";
  REQUIRE(run_cli(dir, cat({"train", "--out", run.string(), "--seed", "3"},
                           tiny_sets(manifest))) == 0);
  CHECK(run_cli(dir, cat({"inspect", "--ckpt", (run / "best.ckpt").string(), "--seed", "3"},
                         tiny_sets(manifest)),
                &out) == 0);
  CHECK(out.find("queue occupancy") != std::string::npos);
  CHECK(out.find("queue occupancy 0/") == std::string::npos);
}
