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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedattack/checkpoint.hpp"
#include "fedattack/dataset.hpp"
#include "fedattack/detection.hpp"
#include "fedattack/eval.hpp"
#include "fedattack/fedcore.hpp"

namespace fedattack {

enum class DatasetKind { Synthetic, MovieLens, Tsv };

struct DatasetSource {
  DatasetKind kind = DatasetKind::Synthetic;
  std::string path;
  std::size_t min_item_interactions = 1;
  SyntheticSpec synthetic;

  bool operator==(const DatasetSource&) const = default;
};

struct DetectorSettings {
  std::int32_t epochs = 400;
  double lr = 0.2;
  std::int32_t hidden = 32;

  bool operator==(const DetectorSettings&) const = default;
};

// Base run configuration plus the sweep grid. Empty axes fall back to the
// corresponding base value; no seeds means five consecutive seeds from
// train.seed.
struct ExperimentSpec {
  SimulationConfig base;
  DatasetSource dataset;
  DetectorSettings detector;
  std::vector<AttackKind> attacks;
  std::vector<DefenseKind> defenses;
  std::vector<double> byzantine_ratios{0.01, 0.02, 0.05};
  std::vector<double> pool_fractions;
  std::vector<std::uint64_t> seeds;

  void validate() const;
  bool operator==(const ExperimentSpec&) const = default;
};

// Flat `key = value` text; `[section]` headers prefix the keys that follow
// with `section.`; `#` starts a comment. Unknown or repeated keys are errors.
ExperimentSpec parse_config_text(std::string_view text);
ExperimentSpec parse_config(const std::filesystem::path& path);

// Canonical text form; parse_config_text(serialize_config(s)) == s.
std::string serialize_config(const ExperimentSpec& spec);

// 16 hex digits of FNV-1a over the canonical text.
std::string config_hash(const ExperimentSpec& spec);

InteractionLog load_dataset(const DatasetSource& source);

ClientRegistry make_registry(const SimulationConfig& config, const InteractionLog& log);

MetricsTimeline run_single(const SimulationConfig& config, const InteractionLog& log,
                           const TrainingHooks& hooks = {});

struct SweepCell {
  AttackKind attack = AttackKind::None;
  DefenseKind defense = DefenseKind::Mean;
  double byzantine_ratio = 0.0;
  double pool_fraction = 1.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  EpochMetrics reported;  // best-validation epoch
};

struct SweepRow {
  SweepCell cell;
  std::vector<SeedRun> runs;
  double hr_mean = 0.0;
  double hr_std = 0.0;
  double ndcg_mean = 0.0;
  double ndcg_std = 0.0;
  std::optional<std::string> error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool all_succeeded() const;
};

std::vector<SweepCell> sweep_cells(const ExperimentSpec& spec);
std::vector<std::uint64_t> sweep_seeds(const ExperimentSpec& spec);
SimulationConfig cell_config(const ExperimentSpec& spec, const SweepCell& cell, std::uint64_t seed);

// Runs every cell for every seed. A failing cell is recorded and the
// sweep moves on.
SweepResult run_sweep(const ExperimentSpec& spec, const InteractionLog& log);

struct DetectionReport {
  AttackKind attack = AttackKind::None;
  std::uint64_t seed = 0;
  std::size_t collected_malicious = 0;
  std::size_t collected_normal = 0;
  DetectorTraining training;
  MetricsTimeline phase1;
  MetricsTimeline phase2;
};

// Collects labelled gradients in a first run, trains the detector on a
// balanced sample and re-runs training with the frozen detector filtering
// each round.
DetectionReport run_detection_protocol(const SimulationConfig& config, const DetectorSettings& settings,
                                       const InteractionLog& log, GradientLogWriter* gradient_log = nullptr);

struct AnalysisResult {
  MetricsTimeline timeline;
  HardnessProfile hardness;
  PcaProjection pca;
  std::vector<UserId> pca_clients;
  std::vector<Role> pca_roles;
};

// Trains once and profiles the final epoch: sample hardness from the
// logged training pairs and a PCA of the featurized client gradients.
AnalysisResult run_analysis(const SimulationConfig& config, const InteractionLog& log);

std::string metrics_csv(const MetricsTimeline& timeline, const SimulationConfig& config);
std::string sweep_table_csv(const SweepResult& result);
std::string sweep_runs_csv(const SweepResult& result);
std::string hardness_csv(const HardnessProfile& profile);
std::string pca_csv(const AnalysisResult& analysis);
std::string detector_accuracy_csv(const std::vector<DetectionReport>& reports);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct ManifestEntry {
  std::string file;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
};

std::string manifest_json(std::string_view command, std::string_view config_hash,
                          const std::vector<ManifestEntry>& outputs, double wall_time_seconds);

std::string_view build_id();

}  // namespace fedattack
