// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/cli/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "semc/data/synthetic.hpp"
#include "semc/engine/checkpoint.hpp"
#include "semc/engine/config.hpp"
#include "semc/engine/trainer.hpp"
#include "semc/viz/chart.hpp"

namespace semc::cli {

namespace {

namespace fs = std::filesystem;
using engine::Config;
using engine::Trainer;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;  // negative: keep the config's seed
  bool force = false;
  bool verbose = false;
  Index jobs = 1;
};

Config build_config(const CommonOpts& opts) {
  Config cfg = Config::defaults();
  if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  if (opts.seed >= 0) cfg.apply_override("train.seed=" + std::to_string(opts.seed));
  return cfg;
}

void require_fresh(const fs::path& artifact, bool force) {
  if (!force && fs::exists(artifact)) {
    throw ConfigError("refusing to overwrite " + artifact.string() + " (pass --force)");
  }
}

void require_manifest(const Config& cfg) {
  const std::string manifest = cfg.get_string("data.manifest");
  if (manifest.empty()) throw ConfigError("data.manifest is not set");
  if (!fs::exists(manifest)) throw ConfigError("manifest not found: " + manifest);
}

Index effective_jobs(Index requested) {
  const char* det = std::getenv("SEMC_DETERMINISTIC");
  if (det != nullptr && std::string(det) == "1") return 1;
  return std::max<Index>(1, requested);
}

void run_jobs(Index jobs, std::vector<std::function<void()>>& work) {
  jobs = std::min<Index>(jobs, Index(work.size()));
  if (jobs <= 1) {
    for (auto& job : work) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(work.size());
  std::vector<std::thread> pool;
  for (Index t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= work.size()) return;
        try {
          work[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  for (auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    if (comma == std::string::npos) comma = csv.size();
    const std::string item = csv.substr(start, comma - start);
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size() || v < 0) throw std::invalid_argument("bad seed");
      seeds.push_back(std::uint64_t(v));
    } catch (const std::exception&) {
      throw ConfigError("--seeds expects a comma-separated list of integers, got '" + csv + "'");
    }
    start = comma + 1;
  }
  return seeds;
}

void print_metrics(const char* tag, const engine::MetricsReport& m) {
  std::printf("%s acc %.2f precision %.2f recall %.2f f1 %.2f\n", tag, m.accuracy, m.precision,
              m.recall, m.f1);
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void cmd_train(const CommonOpts& opts) {
  Config cfg = build_config(opts);
  require_manifest(cfg);
  fs::create_directories(opts.out_dir);
  const fs::path out(opts.out_dir);
  require_fresh(out / "metrics.csv", opts.force);

  {
    std::ofstream resolved(out / "config.resolved");
    if (!resolved) throw IoError("cannot write " + (out / "config.resolved").string());
    resolved << cfg.resolved_text();
  }

  Trainer trainer(cfg);
  auto data = engine::load_experiment_data(cfg);
  const std::string best_ckpt = (out / "best.ckpt").string();
  auto result = trainer.fit(data.train, data.val, (out / "metrics.csv").string(), best_ckpt,
                            opts.verbose);

  std::printf("best epoch %lld\n", (long long)result.best_epoch);
  print_metrics("val", result.best_val);
  if (!data.test.images.empty()) {
    engine::load_checkpoint(best_ckpt, trainer.model(), nullptr, cfg.hash());
    print_metrics("test", trainer.evaluate(data.test));
  }
  std::printf("run directory %s\n", out.string().c_str());
}

void cmd_eval(const CommonOpts& opts, const std::string& ckpt, const std::string& split_name) {
  Config cfg = build_config(opts);
  require_manifest(cfg);
  Trainer trainer(cfg);
  engine::load_checkpoint(ckpt, trainer.model(), nullptr, cfg.hash());
  auto data = engine::load_experiment_data(cfg);
  const engine::SplitData* split = nullptr;
  if (split_name == "train") split = &data.train;
  else if (split_name == "val") split = &data.val;
  else if (split_name == "test") split = &data.test;
  else throw ConfigError("--split must be train, val, or test, got '" + split_name + "'");

  auto report = trainer.evaluate(*split);
  print_metrics(split_name.c_str(), report);
  std::printf("confusion (rows: true class, columns: predicted)\n");
  for (const auto& row : report.confusion) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::printf("%s%6lld", c == 0 ? "" : " ", (long long)row[c]);
    }
    std::printf("\n");
  }
}

void cmd_gen_synth(const std::string& out_dir, Index classes, Index per_class, Index size,
                   std::uint64_t seed, bool force) {
  fs::create_directories(out_dir);
  require_fresh(fs::path(out_dir) / "manifest.csv", force);
  data::SyntheticSpec spec;
  spec.num_classes = classes;
  spec.per_class = per_class;
  spec.image_size = size;
  spec.seed = seed;
  const std::string manifest = data::generate_synthetic_dataset(spec, out_dir);
  std::printf("wrote %s (%lld classes, %lld images each, %lldpx)\n", manifest.c_str(),
              (long long)classes, (long long)per_class, (long long)size);
}

struct RunScore {
  double acc = 0.0;
  double f1 = 0.0;
};

RunScore run_one_training(const Config& cfg, const fs::path& run_dir, bool verbose) {
  fs::create_directories(run_dir);
  {
    std::ofstream resolved(run_dir / "config.resolved");
    resolved << cfg.resolved_text();
  }
  Trainer trainer(cfg);
  auto data = engine::load_experiment_data(cfg);
  auto result = trainer.fit(data.train, data.val, (run_dir / "metrics.csv").string(),
                            (run_dir / "best.ckpt").string(), verbose);
  return {result.best_val.accuracy, result.best_val.f1};
}

void cmd_ablate(const CommonOpts& opts, const std::string& seeds_csv) {
  Config base = build_config(opts);
  require_manifest(base);
  const auto seeds = parse_seed_list(seeds_csv);
  if (seeds.empty()) throw ConfigError("--seeds must name at least one seed");
  fs::create_directories(opts.out_dir);
  const fs::path out(opts.out_dir);
  require_fresh(out / "ablate.csv", opts.force);

  struct Combo {
    const char* name;
    bool ace, samc, lmc;
  };
  const Combo combos[5] = {
      {"baseline", false, false, false},
      {"+ace", true, false, false},
      {"+ace+samc", true, true, false},
      {"+ace+lmc", true, false, true},
      {"full", true, true, true},
  };

  std::vector<std::vector<RunScore>> scores(5, std::vector<RunScore>(seeds.size()));
  std::vector<std::function<void()>> work;
  std::mutex log_mutex;
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      work.emplace_back([&, c, s] {
        Config cfg = base;
        cfg.apply_override(std::string("train.ace_on=") + (combos[c].ace ? "true" : "false"));
        cfg.apply_override(std::string("train.samc_on=") + (combos[c].samc ? "true" : "false"));
        cfg.apply_override(std::string("train.lmc_on=") + (combos[c].lmc ? "true" : "false"));
        cfg.apply_override("train.seed=" + std::to_string(seeds[s]));
        const fs::path run_dir =
            out / "runs" / (std::string(combos[c].name) + "_seed" + std::to_string(seeds[s]));
        scores[c][s] = run_one_training(cfg, run_dir, false);
        std::lock_guard<std::mutex> lock(log_mutex);
        std::fprintf(stderr, "[ablate] %s seed %llu: acc %.2f f1 %.2f\n", combos[c].name,
                     (unsigned long long)seeds[s], scores[c][s].acc, scores[c][s].f1);
      });
    }
  }
  run_jobs(effective_jobs(opts.jobs), work);

  std::ofstream csv(out / "ablate.csv");
  if (!csv) throw IoError("cannot write " + (out / "ablate.csv").string());
  csv << "config,ace,samc,lmc,seed,val_acc,val_f1\n";
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      char row[256];
      std::snprintf(row, sizeof row, "%s,%d,%d,%d,%llu,%.4f,%.4f\n", combos[c].name,
                    combos[c].ace ? 1 : 0, combos[c].samc ? 1 : 0, combos[c].lmc ? 1 : 0,
                    (unsigned long long)seeds[std::size_t(s)], scores[c][s].acc,
                    scores[c][s].f1);
      csv << row;
    }
  }

  std::ofstream md(out / "ablate.md");
  md << "| configuration | ACE | SAMC | contrastive loss | mean val acc | mean val F1 |\n";
  md << "|---|---|---|---|---|---|\n";
  std::string table;
  for (std::size_t c = 0; c < 5; ++c) {
    double acc = 0.0;
    double f1 = 0.0;
    for (const auto& score : scores[c]) {
      acc += score.acc;
      f1 += score.f1;
    }
    acc /= double(seeds.size());
    f1 /= double(seeds.size());
    char row[256];
    std::snprintf(row, sizeof row, "| %s | %s | %s | %s | %.2f | %.2f |\n", combos[c].name,
                  combos[c].ace ? "on" : "off", combos[c].samc ? "on" : "off",
                  combos[c].lmc ? "on" : "off", acc, f1);
    md << row;
    table += row;
  }
  std::printf("| configuration | ACE | SAMC | contrastive loss | mean val acc | mean val F1 |\n");
  std::printf("|---|---|---|---|---|---|\n%s", table.c_str());
}

void cmd_sweep_alpha(const CommonOpts& opts) {
  Config base = build_config(opts);
  require_manifest(base);
  fs::create_directories(opts.out_dir);
  const fs::path out(opts.out_dir);
  require_fresh(out / "sweep_alpha.csv", opts.force);

  const std::vector<std::pair<std::string, std::string>> modes = {
      {"0.01", "fixed:0.01"}, {"0.05", "fixed:0.05"}, {"0.1", "fixed:0.1"},
      {"0.2", "fixed:0.2"},   {"0.5", "fixed:0.5"},   {"adaptive", "adaptive"},
  };
  std::vector<RunScore> scores(modes.size());
  std::vector<std::function<void()>> work;
  std::mutex log_mutex;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    work.emplace_back([&, i] {
      Config cfg = base;
      cfg.apply_override("train.alpha_mode=" + modes[i].second);
      scores[i] = run_one_training(cfg, out / "runs" / ("alpha_" + modes[i].first), false);
      std::lock_guard<std::mutex> lock(log_mutex);
      std::fprintf(stderr, "[sweep-alpha] %s: acc %.2f f1 %.2f\n", modes[i].first.c_str(),
                   scores[i].acc, scores[i].f1);
    });
  }
  run_jobs(effective_jobs(opts.jobs), work);

  std::ofstream csv(out / "sweep_alpha.csv");
  if (!csv) throw IoError("cannot write " + (out / "sweep_alpha.csv").string());
  csv << "alpha,val_acc,val_f1\n";
  for (std::size_t i = 0; i < modes.size(); ++i) {
    char row[128];
    std::snprintf(row, sizeof row, "%s,%.4f,%.4f\n", modes[i].first.c_str(), scores[i].acc,
                  scores[i].f1);
    csv << row;
  }

  viz::ChartSpec chart;
  chart.title = "validation quality vs loss balance";
  chart.x_label = "alpha";
  chart.y_label = "percent";
  viz::Series acc;
  acc.name = "accuracy";
  viz::Series f1;
  f1.name = "macro f1";
  f1.shade = 0.55f;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    chart.x_ticks.emplace_back(double(i), modes[i].first);
    acc.x.push_back(double(i));
    acc.y.push_back(scores[i].acc);
    f1.x.push_back(double(i));
    f1.y.push_back(scores[i].f1);
  }
  chart.series = {acc, f1};
  viz::write_chart_png((out / "sweep_alpha.png").string(), chart);
  std::printf("wrote %s and %s\n", (out / "sweep_alpha.csv").string().c_str(),
              (out / "sweep_alpha.png").string().c_str());
}

void cmd_inspect(const CommonOpts& opts, const std::string& ckpt) {
  Config cfg = build_config(opts);
  Trainer trainer(cfg);
  if (!ckpt.empty()) {
    engine::load_checkpoint(ckpt, trainer.model(), &trainer.optimizer(), cfg.hash());
  }
  auto& model = trainer.model();

  auto groups = model.expert_parameter_groups();
  Index total = 0;
  Index shared = 0;
  for (const auto& p : groups.shared) shared += p.var.numel();
  total += shared;
  std::printf("parameter groups\n");
  std::printf("  shared: %zu tensors, %lld values\n", groups.shared.size(), (long long)shared);
  for (std::size_t n = 0; n < groups.expert.size(); ++n) {
    Index count = 0;
    for (const auto& p : groups.expert[n]) count += p.var.numel();
    total += count;
    std::printf("  expert %zu: %zu tensors, %lld values\n", n, groups.expert[n].size(),
                (long long)count);
  }
  std::printf("  total: %lld values\n", (long long)total);

  std::printf("tensor shapes\n");
  for (auto& p : model.parameters()) {
    std::printf("  %s %s\n", p.name.c_str(), shape_string(p.var.shape()).c_str());
  }

  std::printf("queue occupancy %lld/%lld\n", (long long)model.queue().size(),
              (long long)model.queue().capacity());

  // gate behavior on a synthetic probe batch
  const Index batch = 8;
  const Index size = model.config().backbone.input_size;
  Tensor<float> probe({batch, model.config().backbone.in_channels, size, size});
  Rng rng(trainer.settings().seed);
  probe.set_uniform(rng, 0.0f, 1.0f);
  NoGradGuard frozen;
  auto out = model.forward(Var<float>::constant(probe), false, nullptr,
                           trainer.settings().ace_on, trainer.settings().samc_on);
  const auto& weights = out.gate.weights.value();
  const Index experts = weights.dim(1);
  std::printf("gate weights on a probe batch (rows sum to 1)\n");
  std::vector<double> mean(std::size_t(experts), 0.0);
  bool sums_ok = true;
  for (Index r = 0; r < batch; ++r) {
    double sum = 0.0;
    std::printf("  sample %lld:", (long long)r);
    for (Index e = 0; e < experts; ++e) {
      const double w = double(weights.at(r, e));
      sum += w;
      mean[std::size_t(e)] += w / double(batch);
      std::printf(" %.4f", w);
    }
    std::printf("  (sum %.6f)\n", sum);
    if (std::abs(sum - 1.0) > 1e-6) sums_ok = false;
  }
  std::printf("  mean:");
  for (double m : mean) std::printf(" %.4f", m);
  std::printf("\n  row sums within 1e-6: %s\n", sums_ok ? "yes" : "NO");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"structure-enhanced mixture-of-experts ultrasound plane classifier"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  auto* train = app.add_subcommand("train", "train a model and write run artifacts");
  train->add_option("--config", train_opts.config_path, "config file path");
  train->add_option("--out", train_opts.out_dir, "run directory")->required();
  train->add_option("--set", train_opts.overrides, "config override key=value");
  train->add_option("--seed", train_opts.seed, "seed override");
  train->add_flag("--force", train_opts.force, "overwrite existing artifacts");
  train->add_flag("--verbose", train_opts.verbose, "per-epoch progress on stderr");
  train->callback([&] { cmd_train(train_opts); });

  CommonOpts eval_opts;
  std::string eval_ckpt;
  std::string eval_split = "test";
  auto* evaluate = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  evaluate->add_option("--config", eval_opts.config_path, "config file path");
  evaluate->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  evaluate->add_option("--split", eval_split, "train, val, or test");
  evaluate->add_option("--set", eval_opts.overrides, "config override key=value");
  evaluate->add_option("--seed", eval_opts.seed, "seed override");
  evaluate->callback([&] { cmd_eval(eval_opts, eval_ckpt, eval_split); });

  std::string synth_out;
  std::int64_t synth_classes = 7;
  std::int64_t synth_per_class = 20;
  std::int64_t synth_size = 128;
  std::int64_t synth_seed = 0;
  bool synth_force = false;
  auto* synth = app.add_subcommand("gen-synth", "generate the synthetic corpus");
  synth->add_option("--out", synth_out, "dataset directory")->required();
  synth->add_option("--classes", synth_classes, "number of classes");
  synth->add_option("--per-class", synth_per_class, "images per class");
  synth->add_option("--size", synth_size, "image side length");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_flag("--force", synth_force, "overwrite an existing dataset");
  synth->callback([&] {
    if (synth_seed < 0) throw ConfigError("--seed must be nonnegative");
    cmd_gen_synth(synth_out, Index(synth_classes), Index(synth_per_class), Index(synth_size),
                  std::uint64_t(synth_seed), synth_force);
  });

  CommonOpts ablate_opts;
  std::string ablate_seeds = "0,1,2";
  auto* ablate = app.add_subcommand("ablate", "train the five-block ablation table");
  ablate->add_option("--config", ablate_opts.config_path, "config file path");
  ablate->add_option("--out", ablate_opts.out_dir, "output directory")->required();
  ablate->add_option("--set", ablate_opts.overrides, "config override key=value");
  ablate->add_option("--seeds", ablate_seeds, "comma-separated seed list");
  ablate->add_option("--jobs", ablate_opts.jobs, "parallel runs");
  ablate->add_flag("--force", ablate_opts.force, "overwrite existing artifacts");
  ablate->callback([&] { cmd_ablate(ablate_opts, ablate_seeds); });

  CommonOpts sweep_opts;
  auto* sweep = app.add_subcommand("sweep-alpha", "train across fixed and adaptive loss balances");
  sweep->add_option("--config", sweep_opts.config_path, "config file path");
  sweep->add_option("--out", sweep_opts.out_dir, "output directory")->required();
  sweep->add_option("--set", sweep_opts.overrides, "config override key=value");
  sweep->add_option("--seed", sweep_opts.seed, "seed override");
  sweep->add_option("--jobs", sweep_opts.jobs, "parallel runs");
  sweep->add_flag("--force", sweep_opts.force, "overwrite existing artifacts");
  sweep->callback([&] { cmd_sweep_alpha(sweep_opts); });

  CommonOpts inspect_opts;
  std::string inspect_ckpt;
  auto* inspect = app.add_subcommand("inspect", "report model structure and gate behavior");
  inspect->add_option("--config", inspect_opts.config_path, "config file path");
  inspect->add_option("--ckpt", inspect_ckpt, "checkpoint path (optional)");
  inspect->add_option("--set", inspect_opts.overrides, "config override key=value");
  inspect->add_option("--seed", inspect_opts.seed, "seed override");
  inspect->callback([&] { cmd_inspect(inspect_opts, inspect_ckpt); });

  try {
    std::vector<const char*> argv;
    argv.push_back("semc");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace semc::cli
