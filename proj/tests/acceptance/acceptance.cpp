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

// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "fedattack/experiment.hpp"
#include "fedattack/oracles/checks.hpp"

namespace fa = fedattack;
namespace oracles = fedattack::oracles;

namespace {

using Outcome = oracles::CheckResult;

std::string fmt_double(double v, int precision = 4) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << v;
  return out.str();
}

constexpr int kSeeds = 5;

// 1,000 users x 500 items with planted clusters; DotProduct + SeqMean.
fa::ExperimentSpec desk_spec() {
  auto spec = fa::parse_config_text(R"([dataset]
format = synthetic
users = 1000
items = 500
[train]
epochs = 20
dim = 32
seed = 1
predictor = dot
user_model = seq_mean
[defense]
tau = 2
)");
  spec.seeds.clear();
  for (int s = 1; s <= kSeeds; ++s) spec.seeds.push_back(static_cast<std::uint64_t>(s));
  return spec;
}

const fa::InteractionLog& desk_log() {
  static const fa::InteractionLog log = fa::load_dataset(desk_spec().dataset);
  return log;
}

Outcome learning_sanity() {
  auto spec = desk_spec();
  spec.attacks = {fa::AttackKind::None};
  spec.defenses = {fa::DefenseKind::Mean};
  spec.byzantine_ratios = {0.0};
  const auto result = fa::run_sweep(spec, desk_log());
  const auto& row = result.rows.at(0);
  if (row.error) return {false, *row.error};
  const double baseline = 5.0 / static_cast<double>(desk_log().item_count);
  std::string per_seed;
  for (const auto& r : row.runs) per_seed += " " + fmt_double(r.reported.hr);
  return {row.hr_mean >= 3.0 * baseline, "mean HR@5 " + fmt_double(row.hr_mean) + " vs 3x random " +
                                             fmt_double(3.0 * baseline) + " (seeds:" + per_seed + ")"};
}

// Attacks x {mean, norm_bound tau=2} at 5% Byzantine, shared by two criteria.
struct AttackGrid {
  std::map<std::pair<fa::AttackKind, fa::DefenseKind>, double> hr;
  std::string error;
};

const AttackGrid& attack_grid() {
  static const AttackGrid grid = [] {
    AttackGrid g;
    auto spec = desk_spec();
    spec.attacks = {fa::AttackKind::None, fa::AttackKind::FedAttack, fa::AttackKind::LabelFlip, fa::AttackKind::StatOpt};
    spec.defenses = {fa::DefenseKind::Mean, fa::DefenseKind::NormBound};
    spec.byzantine_ratios = {0.05};
    for (const auto& row : fa::run_sweep(spec, desk_log()).rows) {
      if (row.error) g.error += std::string(fa::to_string(row.cell.attack)) + ": " + *row.error + "; ";
      g.hr[{row.cell.attack, row.cell.defense}] = row.hr_mean;
    }
    return g;
  }();
  return grid;
}

double degradation(const AttackGrid& g, fa::AttackKind attack, fa::DefenseKind defense) {
  const double clean = g.hr.at({fa::AttackKind::None, defense});
  return (clean - g.hr.at({attack, defense})) / clean;
}

Outcome attack_effectiveness() {
  const auto& g = attack_grid();
  if (!g.error.empty()) return {false, g.error};
  const double clean = g.hr.at({fa::AttackKind::None, fa::DefenseKind::Mean});
  const double fed = g.hr.at({fa::AttackKind::FedAttack, fa::DefenseKind::Mean});
  const double flip = g.hr.at({fa::AttackKind::LabelFlip, fa::DefenseKind::Mean});
  const double drop = degradation(g, fa::AttackKind::FedAttack, fa::DefenseKind::Mean);
  return {drop >= 0.10 && fed <= flip, "HR@5 none " + fmt_double(clean) + ", fedattack " + fmt_double(fed) +
                                           " (drop " + fmt_double(100.0 * drop, 1) + "%), label_flip " +
                                           fmt_double(flip)};
}

Outcome defense_circumvention() {
  const auto& g = attack_grid();
  if (!g.error.empty()) return {false, g.error};
  const double stat_mean = degradation(g, fa::AttackKind::StatOpt, fa::DefenseKind::Mean);
  const double stat_nb = degradation(g, fa::AttackKind::StatOpt, fa::DefenseKind::NormBound);
  const double fed_nb = degradation(g, fa::AttackKind::FedAttack, fa::DefenseKind::NormBound);
  return {stat_nb < stat_mean && fed_nb >= 0.10,
          "stat_opt drop " + fmt_double(100.0 * stat_mean, 1) + "% -> " + fmt_double(100.0 * stat_nb, 1) +
              "% under norm_bound; fedattack drop under norm_bound " + fmt_double(100.0 * fed_nb, 1) + "%"};
}

Outcome hardness_profile() {
  auto spec = desk_spec();
  spec.base.attack.kind = fa::AttackKind::FedAttack;
  spec.base.byzantine_ratio = 0.05;
  int bucket_violations = 0;
  int overall_violations = 0;
  std::string detail;
  for (std::uint64_t seed : spec.seeds) {
    auto config = spec.base;
    config.seed = seed;
    const auto a = fa::run_analysis(config, desk_log());
    for (const auto& b : a.hardness.buckets) {
      const auto& byz = b.stats[1];
      if (byz[0].empty() && byz[1].empty()) continue;
      bucket_violations += !(byz[1].mean > byz[0].mean);
    }
    const double byz_neg = a.hardness.overall(fa::Role::Byzantine, true).mean;
    const double benign_neg = a.hardness.overall(fa::Role::Benign, true).mean;
    overall_violations += !(byz_neg > benign_neg);
    detail += " " + fmt_double(byz_neg, 3) + "/" + fmt_double(benign_neg, 3);
  }
  return {bucket_violations == 0 && overall_violations == 0,
          std::to_string(bucket_violations) + " bucket violations; byzantine/benign mean <u,neg> per seed:" + detail};
}

Outcome detector_direction() {
  auto spec = desk_spec();
  spec.base.byzantine_ratio = 0.05;
  int violations = 0;
  double stat_sum = 0.0, fed_sum = 0.0;
  std::string detail;
  for (std::uint64_t seed : spec.seeds) {
    auto config = spec.base;
    config.seed = seed;
    config.attack.kind = fa::AttackKind::StatOpt;
    const double stat = fa::run_detection_protocol(config, spec.detector, desk_log()).training.heldout_accuracy;
    config.attack.kind = fa::AttackKind::FedAttack;
    const double fed = fa::run_detection_protocol(config, spec.detector, desk_log()).training.heldout_accuracy;
    violations += !(stat > fed);
    stat_sum += stat;
    fed_sum += fed;
    detail += " " + fmt_double(stat, 3) + "/" + fmt_double(fed, 3);
  }
  return {violations == 0, "stat_opt/fedattack held-out accuracy per seed:" + detail + " (means " +
                               fmt_double(stat_sum / kSeeds, 3) + "/" + fmt_double(fed_sum / kSeeds, 3) + ")"};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  struct Case {
    fa::AttackKind attack;
    fa::DefenseKind defense;
    fa::PredictorKind predictor;
    fa::UserModelKind user_model;
  };
  const std::vector<Case> cases{
      {fa::AttackKind::None, fa::DefenseKind::Mean, fa::PredictorKind::DotProduct, fa::UserModelKind::SeqMean},
      {fa::AttackKind::FedAttack, fa::DefenseKind::Krum, fa::PredictorKind::DotProduct, fa::UserModelKind::SeqMean},
      {fa::AttackKind::Lie, fa::DefenseKind::TrimmedMean, fa::PredictorKind::Mlp, fa::UserModelKind::SeqMean},
      {fa::AttackKind::StatOpt, fa::DefenseKind::NormBound, fa::PredictorKind::DotProduct, fa::UserModelKind::IdEmbedding},
      {fa::AttackKind::DynOpt, fa::DefenseKind::MultiKrum, fa::PredictorKind::Mlp, fa::UserModelKind::IdEmbedding},
      {fa::AttackKind::Gaussian, fa::DefenseKind::Median, fa::PredictorKind::DotProduct, fa::UserModelKind::SeqMean},
      {fa::AttackKind::LabelFlip, fa::DefenseKind::Mean, fa::PredictorKind::Mlp, fa::UserModelKind::SeqMean},
  };
  const auto dir = std::filesystem::temp_directory_path() / "fedattack_acceptance";
  std::filesystem::create_directories(dir);
  int differing = 0;
  int files = 0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    auto config = desk_spec().base;
    config.max_epochs = 3;
    config.byzantine_ratio = 0.1;
    config.seed = 100 + c;
    config.attack.kind = cases[c].attack;
    config.defense.kind = cases[c].defense;
    config.predictor = cases[c].predictor;
    config.user_model = cases[c].user_model;
    std::string reference;
    for (int threads : {1, 1, 4}) {
      config.threads = threads;
      const auto path = dir / ("metrics_" + std::to_string(c) + "_" + std::to_string(files++) + ".csv");
      fa::write_file_atomic(path, fa::metrics_csv(fa::run_single(config, desk_log()), config));
      const std::string bytes = read_file(path);
      if (reference.empty()) {
        reference = bytes;
      } else {
        differing += bytes != reference;
      }
    }
  }
  std::filesystem::remove_all(dir);
  return {differing == 0, std::to_string(cases.size()) + " configs x (threads 1, 1, 4), " +
                              std::to_string(differing) + " differing CSVs"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 for none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> criteria{
      {1, "gradient finite differences", 10, oracles::check_gradients},
      {2, "aggregator oracles", 30, oracles::check_aggregators},
      {3, "retrieval oracle", 10, oracles::check_retrieval},
      {4, "metric oracle", 0, oracles::check_metrics},
      {5, "learning sanity", 600, learning_sanity},
      {6, "attack effectiveness", 0, attack_effectiveness},
      {7, "defense circumvention", 0, defense_circumvention},
      {8, "hardness profile", 0, hardness_profile},
      {9, "detector direction", 0, detector_direction},
      {10, "determinism", 0, determinism},
      {11, "pca eigenvalues", 0, oracles::check_pca},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds >= c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += "; over the " + fmt_double(c.budget_seconds, 0) + " s budget";
    }
    failed += !outcome.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
