// Copyright 2026 The fedattack-sim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <string>
#include <vector>

#include "fedattack/checkpoint.hpp"
#include "fedattack/experiment.hpp"
#include "fedattack/oracles/checks.hpp"

namespace fs = std::filesystem;
using namespace fedattack;

namespace {

struct CommonOptions {
  std::string config;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out-dir", opts.out_dir, "Directory for result files");
  cmd->add_option("--seed", opts.seed, "Override train.seed");
  cmd->add_option("-j,--threads", opts.threads, "Worker threads per run")->check(CLI::PositiveNumber);
}

struct Loaded {
  ExperimentSpec spec;
  InteractionLog log;
  std::string hash;
};

Loaded load(const CommonOptions& opts) {
  Loaded l{parse_config(opts.config), {}, {}};
  if (opts.seed) l.spec.base.seed = *opts.seed;
  l.spec.base.threads = opts.threads;
  l.hash = config_hash(l.spec);
  l.log = load_dataset(l.spec.dataset);
  spdlog::info("dataset: {} users, {} items, {} interactions (config {})", l.log.user_count, l.log.item_count,
               l.log.records.size(), l.hash);
  return l;
}

class Manifest {
 public:
  Manifest(std::string command, const CommonOptions& opts, std::string hash)
      : command_(std::move(command)), dir_(opts.out_dir), hash_(std::move(hash)),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
  }

  void write(const std::string& file, std::string_view content, std::vector<std::uint64_t> seeds) {
    write_file_atomic(dir_ / file, content);
    entries_.push_back({file, hash_, std::move(seeds)});
    spdlog::info("wrote {}", (dir_ / file).string());
  }

  // For files written by other means.
  void record(const std::string& file, std::vector<std::uint64_t> seeds) {
    entries_.push_back({file, hash_, std::move(seeds)});
  }

  void finish() const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file_atomic(dir_ / "manifest.json", manifest_json(command_, hash_, entries_, wall));
  }

  const fs::path& dir() const { return dir_; }

 private:
  std::string command_;
  fs::path dir_;
  std::string hash_;
  std::chrono::steady_clock::time_point start_;
  std::vector<ManifestEntry> entries_;
};

int cmd_train(const CommonOptions& opts, bool save_checkpoint) {
  const Loaded l = load(opts);
  Manifest manifest("train", opts, l.hash);
  const SimulationConfig& config = l.spec.base;
  std::optional<ModelParams> best;
  std::int32_t best_epoch = -1;
  double best_hr = -1.0, best_ndcg = -1.0;
  TrainingHooks hooks;
  if (save_checkpoint) {
    // The timeline picks the best epoch after the fact, so snapshot on
    // every validation improvement.
    hooks.on_epoch = [&](const EpochMetrics& m, const ModelParams& params) {
      if (m.val_hr > best_hr || (m.val_hr == best_hr && m.val_ndcg > best_ndcg)) {
        best_hr = m.val_hr;
        best_ndcg = m.val_ndcg;
        best = params;
        best_epoch = m.epoch;
      }
    };
  }
  const MetricsTimeline timeline = run_single(config, l.log, hooks);
  const auto& b = timeline.best();
  spdlog::info("best epoch {}: HR@{} {:.4f} nDCG@{} {:.4f}", b.epoch, config.k_eval, b.hr, config.k_eval, b.ndcg);
  manifest.write("metrics.csv", metrics_csv(timeline, config), {config.seed});
  if (best) {
    save_model(manifest.dir() / "model.bin", *best);
    manifest.record("model.bin", {config.seed});
    spdlog::info("saved epoch {} checkpoint", best_epoch);
  }
  manifest.finish();
  return EXIT_SUCCESS;
}

int cmd_sweep(const CommonOptions& opts) {
  const Loaded l = load(opts);
  Manifest manifest("sweep", opts, l.hash);
  const auto seeds = sweep_seeds(l.spec);
  const SweepResult result = run_sweep(l.spec, l.log);
  manifest.write("results.csv", sweep_table_csv(result), seeds);
  manifest.write("runs.csv", sweep_runs_csv(result), seeds);
  std::string failures = "attack,defense,byz_ratio,pool_fraction,error\n";
  std::size_t failed = 0;
  for (const auto& row : result.rows) {
    if (!row.error) continue;
    ++failed;
    std::string msg = *row.error;
    for (char& c : msg) {
      if (c == ',' || c == '\n') c = ';';
    }
    failures += std::string(to_string(row.cell.attack)) + "," + std::string(to_string(row.cell.defense)) + "," +
                std::to_string(row.cell.byzantine_ratio) + "," + std::to_string(row.cell.pool_fraction) + "," + msg +
                "\n";
  }
  if (failed > 0) manifest.write("failures.csv", failures, seeds);
  manifest.finish();
  if (failed > 0) {
    spdlog::error("{} of {} cells failed", failed, result.rows.size());
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}

int cmd_detect(const CommonOptions& opts, bool keep_log) {
  const Loaded l = load(opts);
  Manifest manifest("detect", opts, l.hash);
  const auto attacks = l.spec.attacks.empty() ? std::vector{l.spec.base.attack.kind} : l.spec.attacks;
  std::vector<DetectionReport> reports;
  std::size_t failed = 0;
  for (AttackKind attack : attacks) {
    SimulationConfig config = l.spec.base;
    config.attack.kind = attack;
    const std::string name(to_string(attack));
    std::optional<GradientLogWriter> writer;
    if (keep_log) {
      const ModelParams shape = init_params(l.log.user_count, l.log.item_count, config.dim, config.predictor, 0);
      writer.emplace(manifest.dir() / ("gradients_" + name + ".bin"),
                     manifest.dir() / ("gradients_" + name + ".labels.tsv"), shape.layout);
    }
    try {
      reports.push_back(run_detection_protocol(config, l.spec.detector, l.log, writer ? &*writer : nullptr));
    } catch (const Error& e) {
      spdlog::error("{}: {}", name, e.what());
      ++failed;
      if (writer) {
        writer.reset();
        fs::remove(manifest.dir() / ("gradients_" + name + ".bin"));
        fs::remove(manifest.dir() / ("gradients_" + name + ".labels.tsv"));
      }
      continue;
    }
    const auto& r = reports.back();
    save_detector(manifest.dir() / ("detector_" + name + ".bin"), r.training.model);
    manifest.record("detector_" + name + ".bin", {config.seed});
    if (writer) {
      manifest.record("gradients_" + name + ".bin", {config.seed});
      manifest.record("gradients_" + name + ".labels.tsv", {config.seed});
    }
    manifest.write("phase1_" + name + ".csv", metrics_csv(r.phase1, config), {config.seed});
    manifest.write("phase2_" + name + ".csv", metrics_csv(r.phase2, config), {config.seed});
    spdlog::info("{}: flagged {} gradients ({} Byzantine); filtered HR {:.4f}", name, r.phase2.flagged_gradients,
                 r.phase2.flagged_byzantine, r.phase2.best().hr);
  }
  manifest.write("detector_accuracy.csv", detector_accuracy_csv(reports), {l.spec.base.seed});
  manifest.finish();
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}

int cmd_analyze(const CommonOptions& opts) {
  const Loaded l = load(opts);
  Manifest manifest("analyze", opts, l.hash);
  const AnalysisResult a = run_analysis(l.spec.base, l.log);
  spdlog::info("PCA explained variance {:.3f} / {:.3f}", a.pca.explained[0], a.pca.explained[1]);
  manifest.write("metrics.csv", metrics_csv(a.timeline, l.spec.base), {l.spec.base.seed});
  manifest.write("hardness.csv", hardness_csv(a.hardness), {l.spec.base.seed});
  manifest.write("pca.csv", pca_csv(a), {l.spec.base.seed});
  manifest.finish();
  return EXIT_SUCCESS;
}

int cmd_print_config(const std::string& path) {
  const ExperimentSpec spec = parse_config(path);
  std::fputs(serialize_config(spec).c_str(), stdout);
  std::printf("# hash %s\n", config_hash(spec).c_str());
  return EXIT_SUCCESS;
}

int cmd_oracle() {
  int failed = 0;
  for (const auto& check : oracles::all_checks()) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = check.run();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !result.pass;
    std::printf("%s %.*s: %s [%.1f s]\n", result.pass ? "PASS" : "FAIL", static_cast<int>(check.name.size()),
                check.name.data(), result.detail.c_str(), seconds);
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated recommendation poisoning simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  CommonOptions train_opts, sweep_opts, detect_opts, analyze_opts;
  bool save_checkpoint = false;
  bool keep_log = false;
  std::string print_path;

  auto* train = app.add_subcommand("train", "Single run; writes metrics.csv");
  add_common(train, train_opts);
  train->add_flag("--checkpoint", save_checkpoint, "Save the best-validation model to model.bin");

  auto* sweep = app.add_subcommand("sweep", "Attack x defense x ratio grid over seeds; writes results.csv");
  add_common(sweep, sweep_opts);

  auto* detect = app.add_subcommand("detect", "Two-phase detector protocol per attack");
  add_common(detect, detect_opts);
  detect->add_flag("--gradient-log", keep_log, "Also dump phase-1 gradients and role labels");

  auto* analyze = app.add_subcommand("analyze", "Sample hardness and gradient PCA of the final epoch");
  add_common(analyze, analyze_opts);

  auto* print = app.add_subcommand("print-config", "Show the resolved config and its hash");
  print->add_option("config", print_path)->required()->check(CLI::ExistingFile);

  auto* oracle = app.add_subcommand("oracle", "Compare core routines against the brute-force oracles");

  CLI11_PARSE(app, argc, argv);

  spdlog::set_default_logger(spdlog::stderr_color_mt("fedattack"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train) return cmd_train(train_opts, save_checkpoint);
    if (*sweep) return cmd_sweep(sweep_opts);
    if (*detect) return cmd_detect(detect_opts, keep_log);
    if (*analyze) return cmd_analyze(analyze_opts);
    if (*print) return cmd_print_config(print_path);
    if (*oracle) return cmd_oracle();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return EXIT_FAILURE;
}
