// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "semc/data/synthetic.hpp"
#include "semc/engine/checkpoint.hpp"
#include "semc/engine/config.hpp"
#include "semc/engine/metrics.hpp"
#include "semc/engine/optimizer.hpp"
#include "semc/engine/schedule.hpp"
#include "semc/engine/trainer.hpp"

using namespace semc;
using namespace semc::engine;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("semc_engine_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

// Settings small enough that a training step takes milliseconds.
Config tiny_config(const std::string& manifest) {
  Config cfg = Config::defaults();
  cfg.apply_override("model.input_size=32");
  cfg.apply_override("model.stage_channels=4,8,16,32");
  cfg.apply_override("model.num_classes=3");
  cfg.apply_override("ssfm.reduction_ratio=4");
  cfg.apply_override("ssfm.spatial_kernel=3");
  cfg.apply_override("ssfm.scale_kernels=1,3");
  cfg.apply_override("mcrm.embed_dim=8");
  cfg.apply_override("mcrm.queue_capacity=32");
  cfg.apply_override("train.batch_size=4");
  cfg.apply_override("train.max_epochs=2");
  cfg.apply_override("augment.rotation_deg=5.0");
  cfg.apply_override("data.manifest=" + manifest);
  return cfg;
}

std::string make_corpus(const TempDir& dir, Index classes, Index per_class, Index size,
                        std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.num_classes = classes;
  spec.per_class = per_class;
  spec.image_size = size;
  spec.seed = seed;
  return data::generate_synthetic_dataset(spec, dir.str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config files, overrides, and hashing behave as a closed key set") {
  Config cfg = Config::defaults();
  CHECK(cfg.get_int("train.batch_size") == 16);
  CHECK(cfg.get_double("train.lr") == doctest::Approx(1e-3));
  CHECK(cfg.get_bool("train.ace_on"));
  CHECK(cfg.get_index_list("model.stage_channels") == std::vector<Index>{16, 32, 64, 128});

  const std::uint64_t base_hash = cfg.hash();
  cfg.apply_override("train.lr=0.01");
  CHECK(cfg.get_double("train.lr") == doctest::Approx(0.01));
  CHECK(cfg.hash() != base_hash);
  cfg.apply_override("train.lr=0.001");
  CHECK(cfg.hash() == base_hash);

  CHECK_THROWS_AS(cfg.apply_override("train.lrr=0.01"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("train.alpha_mode"), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("train.lr"), ConfigError);
  CHECK_THROWS_AS(cfg.get_string("absent.key"), ConfigError);

  TempDir dir("config");
  std::ofstream(dir.path / "a.cfg") << "# comment line\n"
                                       "train.lr = 0.005  # trailing comment\n"
                                       "\n"
                                       "model.num_experts = 4\n";
  Config from_file = Config::defaults();
  from_file.load_file((dir.path / "a.cfg").string());
  CHECK(from_file.get_double("train.lr") == doctest::Approx(0.005));
  CHECK(from_file.get_int("model.num_experts") == 4);

  std::ofstream(dir.path / "bad.cfg") << "typo.key = 1\n";
  Config rejecting = Config::defaults();
  CHECK_THROWS_WITH_AS(rejecting.load_file((dir.path / "bad.cfg").string()),
                       doctest::Contains("typo.key"), ConfigError);
  std::ofstream(dir.path / "noeq.cfg") << "train.lr 0.005\n";
  CHECK_THROWS_AS(rejecting.load_file((dir.path / "noeq.cfg").string()), ConfigError);
  CHECK_THROWS_AS(rejecting.load_file((dir.path / "absent.cfg").string()), ConfigError);

  // resolved snapshot reparses to the same hash
  std::ofstream(dir.path / "resolved.cfg") << from_file.resolved_text();
  Config reparsed = Config::defaults();
  reparsed.load_file((dir.path / "resolved.cfg").string());
  CHECK(reparsed.hash() == from_file.hash());
}

TEST_CASE("cosine schedule hits its endpoints and decays monotonically") {
  CHECK(cosine_lr(1e-3, 0, 200) == doctest::Approx(1e-3));
  CHECK(cosine_lr(1e-3, 200, 200) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_lr(1e-3, 100, 200) == doctest::Approx(5e-4));

  double prev = cosine_lr(1e-3, 0, 137);
  for (Index t = 1; t <= 137; ++t) {
    const double cur = cosine_lr(1e-3, t, 137);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }

  CHECK_THROWS_AS(cosine_lr(0.0, 0, 10), ConfigError);
  CHECK_THROWS_AS(cosine_lr(1e-3, 11, 10), ConfigError);
  CHECK_THROWS_AS(cosine_lr(1e-3, -1, 10), ConfigError);
}

TEST_CASE("sgd with momentum reproduces the closed-form two-step update") {
  auto w = Var<float>::leaf(Tensor<float>::from({2}, {1.0f, -2.0f}), true);
  std::vector<ParamRef<float>> params{{"w", w, true}};
  SgdMomentum<float> opt(params, 0.9f, 0.0f, 0.0f);

  // constant gradient g = (1, 2), lr = 0.1
  auto set_grad = [&](float g0, float g1) {
    w.zero_grad();
    w.node()->accumulate(Tensor<float>::from({2}, {g0, g1}));
  };
  set_grad(1.0f, 2.0f);
  opt.step(0.1f);
  // v1 = g, w1 = w0 - 0.1 v1
  CHECK(w.value()[0] == doctest::Approx(0.9f));
  CHECK(w.value()[1] == doctest::Approx(-2.2f));
  set_grad(1.0f, 2.0f);
  opt.step(0.1f);
  // v2 = 0.9 v1 + g = 1.9 g, w2 = w1 - 0.1 * 1.9 g
  CHECK(w.value()[0] == doctest::Approx(0.9f - 0.19f));
  CHECK(w.value()[1] == doctest::Approx(-2.2f - 0.38f));

  // weight decay adds wd * w to the gradient of decaying parameters only
  auto wd_on = Var<float>::leaf(Tensor<float>::from({1}, {2.0f}), true);
  auto wd_off = Var<float>::leaf(Tensor<float>::from({1}, {2.0f}), true);
  std::vector<ParamRef<float>> mixed{{"on", wd_on, true}, {"off", wd_off, false}};
  SgdMomentum<float> opt2(mixed, 0.0f, 0.5f, 0.0f);
  wd_on.zero_grad();
  wd_off.zero_grad();
  wd_on.node()->accumulate(Tensor<float>::from({1}, {0.0f}));
  wd_off.node()->accumulate(Tensor<float>::from({1}, {0.0f}));
  opt2.step(1.0f);
  CHECK(wd_on.value()[0] == doctest::Approx(1.0f));   // 2 - 1*0.5*2
  CHECK(wd_off.value()[0] == doctest::Approx(2.0f));  // untouched

  // clipping rescales the whole gradient to the requested global norm
  auto c = Var<float>::leaf(Tensor<float>::from({2}, {0.0f, 0.0f}), true);
  std::vector<ParamRef<float>> cp{{"c", c, false}};
  SgdMomentum<float> opt3(cp, 0.0f, 0.0f, 1.0f);
  c.node()->accumulate(Tensor<float>::from({2}, {3.0f, 4.0f}));  // norm 5
  const float norm = opt3.step(1.0f);
  CHECK(norm == doctest::Approx(5.0f));
  CHECK(c.value()[0] == doctest::Approx(-0.6f));
  CHECK(c.value()[1] == doctest::Approx(-0.8f));

  // non-finite gradients abort before any state changes
  auto d = Var<float>::leaf(Tensor<float>::from({1}, {1.0f}), true);
  std::vector<ParamRef<float>> dp{{"d", d, false}};
  SgdMomentum<float> opt4(dp, 0.9f, 0.0f, 0.0f);
  d.node()->accumulate(Tensor<float>::from({1}, {std::numeric_limits<float>::quiet_NaN()}));
  CHECK_THROWS_AS(opt4.step(0.1f), NumericalError);
  CHECK(d.value()[0] == 1.0f);

  CHECK_THROWS_AS(SgdMomentum<float>(params, 1.0f, 0.0f, 0.0f), ConfigError);
  CHECK_THROWS_AS(SgdMomentum<float>(params, 0.9f, -1.0f, 0.0f), ConfigError);
}

TEST_CASE("metrics match a direct confusion-matrix oracle on random inputs") {
  // hand case: balanced two-class set, constant predictor
  std::vector<std::int64_t> y_true{0, 0, 0, 1, 1, 1};
  std::vector<std::int64_t> y_pred{0, 0, 0, 0, 0, 0};
  auto report = compute_metrics(y_true, y_pred, 2);
  CHECK(report.accuracy == doctest::Approx(50.0));
  CHECK(report.f1 == doctest::Approx(100.0 / 3.0).epsilon(1e-9));
  CHECK(report.confusion[0][0] == 3);
  CHECK(report.confusion[1][0] == 3);
  CHECK(report.confusion[0][1] == 0);

  // perfect predictions score 100 everywhere
  auto perfect = compute_metrics({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
  CHECK(perfect.accuracy == doctest::Approx(100.0));
  CHECK(perfect.precision == doctest::Approx(100.0));
  CHECK(perfect.recall == doctest::Approx(100.0));
  CHECK(perfect.f1 == doctest::Approx(100.0));

  Rng rng(40);
  for (int trial = 0; trial < 100; ++trial) {
    const Index classes = 2 + Index(rng.uniform_int(6));
    const Index n = 1 + Index(rng.uniform_int(60));
    std::vector<std::int64_t> t(static_cast<std::size_t>(n));
    std::vector<std::int64_t> p(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      t[std::size_t(i)] = std::int64_t(rng.uniform_int(std::uint64_t(classes)));
      p[std::size_t(i)] = std::int64_t(rng.uniform_int(std::uint64_t(classes)));
    }
    auto got = compute_metrics(t, p, classes);

    // independent recomputation straight from the definitions
    std::vector<std::vector<Index>> cm(std::size_t(classes),
                                       std::vector<Index>(std::size_t(classes), 0));
    Index correct = 0;
    for (Index i = 0; i < n; ++i) {
      ++cm[std::size_t(t[std::size_t(i)])][std::size_t(p[std::size_t(i)])];
      if (t[std::size_t(i)] == p[std::size_t(i)]) ++correct;
    }
    double ps = 0, rs = 0, fs = 0;
    for (Index c = 0; c < classes; ++c) {
      double tp = double(cm[std::size_t(c)][std::size_t(c)]), fp = 0, fn = 0;
      for (Index k = 0; k < classes; ++k) {
        if (k != c) {
          fp += double(cm[std::size_t(k)][std::size_t(c)]);
          fn += double(cm[std::size_t(c)][std::size_t(k)]);
        }
      }
      const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      ps += prec;
      rs += rec;
      fs += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    }
    CHECK(got.accuracy == doctest::Approx(100.0 * double(correct) / double(n)).epsilon(1e-9));
    CHECK(got.precision == doctest::Approx(100.0 * ps / double(classes)).epsilon(1e-9));
    CHECK(got.recall == doctest::Approx(100.0 * rs / double(classes)).epsilon(1e-9));
    CHECK(got.f1 == doctest::Approx(100.0 * fs / double(classes)).epsilon(1e-9));

    // confusion rows sum to per-class support
    for (Index c = 0; c < classes; ++c) {
      Index row_sum = 0, support = 0;
      for (Index k = 0; k < classes; ++k) row_sum += got.confusion[std::size_t(c)][std::size_t(k)];
      for (Index i = 0; i < n; ++i) support += t[std::size_t(i)] == c ? 1 : 0;
      CHECK(row_sum == support);
    }
  }

  CHECK_THROWS_AS(compute_metrics({}, {}, 2), DataError);
  CHECK_THROWS_AS(compute_metrics({0, 1}, {0}, 2), ShapeError);
  CHECK_THROWS_AS(compute_metrics({0, 2}, {0, 1}, 2), DataError);
}

TEST_CASE("trainer steps reduce the loss and honor ablation switches") {
  TempDir dir("trainer");
  auto manifest = make_corpus(dir, 3, 4, 32, 7);
  Config cfg = tiny_config(manifest);
  Trainer trainer(cfg);
  auto exp = load_experiment_data(cfg);
  REQUIRE(exp.train.images.size() == 9);  // 3 per class at 70/15/15 of 4

  std::vector<Index> ids{0, 1, 2, 3};
  std::vector<std::int64_t> y;
  auto x = trainer.assemble_batch(exp.train, ids, 0, true, y);
  REQUIRE(x.shape() == Shape{4, 1, 32, 32});
  REQUIRE(y.size() == 4);

  // same (epoch, id) stream gives a bitwise-identical batch regardless of order
  std::vector<Index> reversed{3, 2, 1, 0};
  std::vector<std::int64_t> y2;
  auto x2 = trainer.assemble_batch(exp.train, reversed, 0, true, y2);
  for (Index r = 0; r < 4; ++r) {
    const Index a = r * 32 * 32;
    const Index b = (3 - r) * 32 * 32;
    float diff = 0;
    for (Index i = 0; i < 32 * 32; ++i) diff = std::max(diff, std::abs(x[a + i] - x2[b + i]));
    CHECK(diff == 0.0f);
  }

  auto first = trainer.train_step(x, y, 1e-3);
  REQUIRE(first.has_value());
  CHECK(std::isfinite(first->l_total));
  CHECK(first->alpha > 0.0);
  CHECK(first->alpha < 1.0);
  CHECK(trainer.model().queue().size() == 8);  // two sibling views of four samples

  // repeated steps on one batch drive the loss down (overfits the batch)
  double last = first->l_total;
  double lowest = last;
  for (int i = 0; i < 10; ++i) {
    auto step = trainer.train_step(x, y, 1e-3);
    REQUIRE(step.has_value());
    last = step->l_total;
    lowest = std::min(lowest, last);
  }
  CHECK(lowest < first->l_total);

  // lmc off: the total collapses to the classification loss
  Config ab = tiny_config(manifest);
  ab.apply_override("train.lmc_on=false");
  Trainer ablated(ab);
  auto step = ablated.train_step(x, y, 1e-3);
  REQUIRE(step.has_value());
  CHECK(step->l_total == doctest::Approx(step->l_moe).epsilon(1e-12));
  CHECK(step->alpha == doctest::Approx(1.0));
  CHECK(step->l_sup == 0.0);
  CHECK(step->l_self == 0.0);
  CHECK(ablated.model().queue().size() == 8);  // keys still flow; only the loss changes

  // fixed alpha propagates into the breakdown
  Config fixed = tiny_config(manifest);
  fixed.apply_override("train.alpha_mode=fixed:0.25");
  Trainer fixed_trainer(fixed);
  auto fixed_step = fixed_trainer.train_step(x, y, 1e-3);
  REQUIRE(fixed_step.has_value());
  CHECK(fixed_step->alpha == doctest::Approx(0.25));

  Config bad_alpha = tiny_config(manifest);
  bad_alpha.apply_override("train.alpha_mode=fixed:1.5");
  CHECK_THROWS_AS(Trainer{bad_alpha}, ConfigError);
}

TEST_CASE("evaluation is frozen: queue, parameters, and buffers stay bitwise equal") {
  TempDir dir("eval");
  auto manifest = make_corpus(dir, 3, 4, 32, 3);
  Config cfg = tiny_config(manifest);
  Trainer trainer(cfg);
  auto exp = load_experiment_data(cfg);

  // a couple of steps to populate the queue and running statistics
  for (int i = 0; i < 2; ++i) {
    std::vector<Index> ids{0, 1, 2, 3};
    std::vector<std::int64_t> y;
    auto x = trainer.assemble_batch(exp.train, ids, Index(i), true, y);
    REQUIRE(trainer.train_step(x, y, 1e-3).has_value());
  }

  auto queue_rows = trainer.model().queue().snapshot_embeddings();
  auto queue_labels = trainer.model().queue().snapshot_labels();
  auto params = trainer.model().parameters();
  std::vector<Tensor<float>> param_copy;
  for (auto& p : params) param_copy.push_back(p.var.value());
  std::vector<BufferRef<float>> buffers;
  trainer.model().collect_buffers(buffers);
  std::vector<Tensor<float>> buffer_copy;
  for (auto& b : buffers) buffer_copy.push_back(*b.tensor);

  auto report = trainer.evaluate(exp.val);
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 100.0);
  CHECK(report.f1 >= 0.0);
  CHECK(report.f1 <= 100.0);

  CHECK(trainer.model().queue().snapshot_embeddings().max_abs_diff(queue_rows) == 0.0f);
  CHECK(trainer.model().queue().snapshot_labels() == queue_labels);
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(params[i].var.value().max_abs_diff(param_copy[i]) == 0.0f);
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    CHECK(buffers[i].tensor->max_abs_diff(buffer_copy[i]) == 0.0f);
  }

  // two evaluations of the same frozen model agree exactly
  auto again = trainer.evaluate(exp.val);
  CHECK(again.accuracy == report.accuracy);
  CHECK(again.f1 == report.f1);

  SplitData empty;
  CHECK_THROWS_AS(trainer.evaluate(empty), DataError);
}

TEST_CASE("fit writes the metrics csv deterministically and tracks the best epoch") {
  TempDir dir("fit");
  auto manifest = make_corpus(dir, 3, 6, 32, 5);
  Config cfg = tiny_config(manifest);
  cfg.apply_override("train.max_epochs=3");

  auto run = [&](const fs::path& csv) {
    Trainer trainer(cfg);
    auto exp = load_experiment_data(cfg);
    return trainer.fit(exp.train, exp.val, csv.string(), "");
  };
  auto r1 = run(dir.path / "m1.csv");
  auto r2 = run(dir.path / "m2.csv");

  const std::string c1 = slurp(dir.path / "m1.csv");
  const std::string c2 = slurp(dir.path / "m2.csv");
  CHECK(c1 == c2);
  CHECK_FALSE(c1.empty());
  CHECK(c1.rfind("epoch,lr,L_sup,L_self,L_mc,L_moe,alpha,L_total,"
                 "val_acc,val_precision,val_recall,val_f1\n",
                 0) == 0);

  // one header plus one row per epoch
  CHECK(std::count(c1.begin(), c1.end(), '\n') == 4);
  CHECK(r1.history.size() == 3);
  CHECK(r1.best_epoch >= 0);
  CHECK(r1.best_epoch < 3);
  CHECK(r1.best_val.f1 == r2.best_val.f1);

  // the recorded lr column follows the cosine schedule
  for (std::size_t e = 0; e < r1.history.size(); ++e) {
    CHECK(r1.history[e].lr == doctest::Approx(cosine_lr(1e-3, Index(e), 3)));
  }

  // best val f1 is the maximum over history
  double max_f1 = -1.0;
  for (const auto& row : r1.history) max_f1 = std::max(max_f1, row.val.f1);
  CHECK(r1.best_val.f1 == doctest::Approx(max_f1));
}

TEST_CASE("checkpoints round-trip bitwise and reject mismatched settings") {
  TempDir dir("ckpt");
  auto manifest = make_corpus(dir, 3, 4, 32, 9);
  Config cfg = tiny_config(manifest);
  Trainer trainer(cfg);
  auto exp = load_experiment_data(cfg);

  for (int i = 0; i < 3; ++i) {
    std::vector<Index> ids{0, 1, 2, 3};
    std::vector<std::int64_t> y;
    auto x = trainer.assemble_batch(exp.train, ids, Index(i), true, y);
    REQUIRE(trainer.train_step(x, y, 1e-3).has_value());
  }

  const std::string path = (dir.path / "model.ckpt").string();
  CheckpointMeta meta;
  meta.config_hash = cfg.hash();
  meta.epochs_completed = 3;
  meta.rng_states = trainer.rng_states();
  save_checkpoint(path, trainer.model(), &trainer.optimizer(), meta);

  const auto before = trainer.evaluate(exp.val);

  // restore into a freshly built trainer with different initial weights
  Config other = tiny_config(manifest);
  other.apply_override("train.seed=99");
  Trainer restored(other);
  auto loaded = load_checkpoint(path, restored.model(), &restored.optimizer(), cfg.hash());
  CHECK(loaded.epochs_completed == 3);
  CHECK(loaded.rng_states == meta.rng_states);

  auto p_src = trainer.model().parameters();
  auto p_dst = restored.model().parameters();
  REQUIRE(p_src.size() == p_dst.size());
  for (std::size_t i = 0; i < p_src.size(); ++i) {
    CHECK(p_dst[i].var.value().max_abs_diff(p_src[i].var.value()) == 0.0f);
  }
  const auto& v_src = trainer.optimizer().velocities();
  const auto& v_dst = restored.optimizer().velocities();
  REQUIRE(v_src.size() == v_dst.size());
  for (std::size_t i = 0; i < v_src.size(); ++i) {
    CHECK(v_dst[i].max_abs_diff(v_src[i]) == 0.0f);
  }
  CHECK(restored.model().queue().size() == trainer.model().queue().size());
  CHECK(restored.model()
            .queue()
            .snapshot_embeddings()
            .max_abs_diff(trainer.model().queue().snapshot_embeddings()) == 0.0f);
  CHECK(restored.model().queue().snapshot_labels() == trainer.model().queue().snapshot_labels());

  // identical evaluation after the round-trip
  const auto after = restored.evaluate(exp.val);
  CHECK(after.accuracy == before.accuracy);
  CHECK(after.precision == before.precision);
  CHECK(after.recall == before.recall);
  CHECK(after.f1 == before.f1);

  // hash mismatch and expert-count mismatch both refuse to load
  CHECK_THROWS_AS(load_checkpoint(path, restored.model(), nullptr, cfg.hash() + 1),
                  CheckpointError);
  Config wider = tiny_config(manifest);
  wider.apply_override("model.num_experts=2");
  Trainer wrong_shape(wider);
  CHECK_THROWS_AS(load_checkpoint(path, wrong_shape.model(), nullptr, cfg.hash()),
                  CheckpointError);

  // corrupt and truncated files are rejected
  std::ofstream(dir.path / "junk.ckpt", std::ios::binary) << "definitely not a checkpoint";
  CHECK_THROWS_AS(
      load_checkpoint((dir.path / "junk.ckpt").string(), restored.model(), nullptr, cfg.hash()),
      CheckpointError);
  const std::string bytes = slurp(path);
  std::ofstream(dir.path / "cut.ckpt", std::ios::binary)
      << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(
      load_checkpoint((dir.path / "cut.ckpt").string(), restored.model(), nullptr, cfg.hash()),
      CheckpointError);
  CHECK_THROWS_AS(load_checkpoint((dir.path / "absent.ckpt").string(), restored.model(), nullptr,
                                  cfg.hash()),
                  IoError);
}
