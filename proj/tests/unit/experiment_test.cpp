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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fedattack/experiment.hpp"

namespace fedattack {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kTiny = R"(# tiny grid
[dataset]
format = synthetic
users = 48
items = 60
clusters = 3
min_length = 6
max_length = 14

[train]
epochs = 2
dim = 8
lr = 0.01
k_positives = 3
seed = 3
)";

TEST(ParseConfig, DefaultsWhenOptionalKeysAbsent) {
  const auto spec = parse_config_text("[dataset]\nformat = synthetic\n");
  EXPECT_EQ(spec.base.lr, 1e-3);
  EXPECT_EQ(spec.base.dim, 64);
  EXPECT_EQ(spec.base.clients_per_round, 16);
  EXPECT_EQ(spec.base.max_epochs, 50);
  EXPECT_EQ(spec.base.k_eval, 5);
  EXPECT_EQ(spec.base.attack.kind, AttackKind::None);
  EXPECT_EQ(spec.base.defense.kind, DefenseKind::Mean);
  EXPECT_EQ(spec.byzantine_ratios, (std::vector<double>{0.01, 0.02, 0.05}));
  EXPECT_EQ(spec.dataset.synthetic, SyntheticSpec{});
}

TEST(ParseConfig, MissingRequiredKeyNamesIt) {
  try {
    parse_config_text("[train]\nepochs = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dataset.format"), std::string::npos);
  }
  try {
    parse_config_text("[dataset]\nformat = tsv\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dataset.path"), std::string::npos);
  }
}

TEST(ParseConfig, UnknownDuplicateAndMalformedRejected) {
  EXPECT_THROW(parse_config_text("[dataset]\nformat = synthetic\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[dataset]\nformat = synthetic\nformat = synthetic\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[dataset]\nformat = synthetic\n[train]\nepochs = many\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[dataset]\nformat = synthetic\n[attack]\nkind = nope\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[dataset]\nformat = synthetic\n[sweep]\nbyzantine_ratios = 0.1, 1.5\n"),
               ConfigError);
}

TEST(ParseConfig, SectionsListsAndAuto) {
  const auto spec = parse_config_text(R"([dataset]
format = tsv
path = data/log.tsv
[attack]
kind = lie
z_override = 0.5
[defense]
kind = multi_krum
f = 2
m_select = auto
[sweep]
attacks = fedattack, stat_opt
defenses = mean, norm_bound
byzantine_ratios = 0.05
seeds = 4, 9
)");
  EXPECT_EQ(spec.dataset.kind, DatasetKind::Tsv);
  EXPECT_EQ(spec.dataset.path, "data/log.tsv");
  EXPECT_EQ(spec.base.attack.kind, AttackKind::Lie);
  EXPECT_EQ(spec.base.attack.z_override, 0.5);
  EXPECT_EQ(spec.base.defense.kind, DefenseKind::MultiKrum);
  EXPECT_EQ(spec.base.defense.f, 2);
  EXPECT_EQ(spec.base.defense.m_select, -1);
  EXPECT_EQ(spec.attacks, (std::vector{AttackKind::FedAttack, AttackKind::StatOpt}));
  EXPECT_EQ(spec.defenses, (std::vector{DefenseKind::Mean, DefenseKind::NormBound}));
  EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{4, 9}));
}

TEST(SerializeConfig, RoundTripIsIdentity) {
  auto spec = parse_config_text(kTiny);
  spec.base.attack.kind = AttackKind::DynOpt;
  spec.base.attack.gamma_step = 0.1 + 0.2;
  spec.base.attack.z_override = -1.0 / 3.0;
  spec.base.defense.kind = DefenseKind::NormBound;
  spec.base.defense.tau = 2.5;
  spec.base.detector_threshold = 0.7;
  spec.base.feature_mode = FeatureMode::RawConcat;
  spec.base.exclude_seen = false;
  spec.base.predictor = PredictorKind::Mlp;
  spec.base.user_model = UserModelKind::IdEmbedding;
  spec.attacks = {AttackKind::None, AttackKind::Gaussian};
  spec.pool_fractions = {0.1, 1.0};
  spec.seeds = {1, 2, 3};
  spec.detector.hidden = 7;
  const std::string text = serialize_config(spec);
  const auto back = parse_config_text(text);
  EXPECT_EQ(back, spec);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(config_hash(back), config_hash(spec));
}

TEST(ConfigHash, SixteenHexDigitsAndSensitive) {
  const auto a = parse_config_text(kTiny);
  auto b = a;
  b.base.seed += 1;
  const std::string h = config_hash(a);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_NE(h, config_hash(b));
  // Comments and layout do not matter, only the resolved values.
  EXPECT_EQ(h, config_hash(parse_config_text(serialize_config(a))));
}

TEST(ParseConfig, ReadsFile) {
  const fs::path path = fs::temp_directory_path() / "fedattack_config_test.ini";
  std::ofstream(path) << kTiny;
  EXPECT_EQ(parse_config(path), parse_config_text(kTiny));
  fs::remove(path);
  EXPECT_THROW(parse_config(path), ConfigError);
}

TEST(LoadDataset, TsvFile) {
  const fs::path path = fs::temp_directory_path() / "fedattack_load_test.tsv";
  std::ofstream(path) << "1\t10\t1\n1\t11\t2\n1\t12\t3\n2\t10\t1\n2\t12\t2\n2\t13\t3\n";
  DatasetSource src;
  src.kind = DatasetKind::Tsv;
  src.path = path.string();
  const auto log = load_dataset(src);
  EXPECT_EQ(log.user_count, 2);
  EXPECT_EQ(log.item_count, 4);
  fs::remove(path);
}

TEST(Sweep, OneCellOneSeedGivesOneRow) {
  auto spec = parse_config_text(kTiny);
  spec.byzantine_ratios = {0.0};
  spec.seeds = {7};
  const auto log = load_dataset(spec.dataset);
  const auto result = run_sweep(spec, log);
  ASSERT_EQ(result.rows.size(), 1u);
  EXPECT_EQ(result.rows[0].runs.size(), 1u);
  EXPECT_EQ(result.rows[0].hr_std, 0.0);
  EXPECT_TRUE(result.all_succeeded());
}

std::map<std::string, std::vector<double>> column_by_cell(const std::string& csv, std::size_t key_cols,
                                                          std::size_t value_col) {
  std::map<std::string, std::vector<double>> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    std::string key;
    for (std::size_t i = 0; i < key_cols; ++i) key += cells[i] + "|";
    out[key].push_back(std::stod(cells[value_col]));
  }
  return out;
}

TEST(Sweep, GridShapeAndMeansMatchPerSeedRows) {
  auto spec = parse_config_text(kTiny);
  spec.base.max_epochs = 1;
  spec.attacks = {AttackKind::FedAttack, AttackKind::LabelFlip};
  spec.byzantine_ratios = {0.05, 0.1, 0.2};
  const auto log = load_dataset(spec.dataset);
  const auto result = run_sweep(spec, log);
  ASSERT_EQ(result.rows.size(), 6u);
  for (const auto& row : result.rows) {
    ASSERT_EQ(row.runs.size(), 5u);
    EXPECT_EQ(row.runs.front().seed, 3u);
    EXPECT_EQ(row.runs.back().seed, 7u);
    double sum = 0.0;
    for (const auto& r : row.runs) sum += r.reported.hr;
    EXPECT_NEAR(row.hr_mean, sum / 5.0, 1e-15);
  }
  // Recompute the table from the per-seed CSV.
  const auto per_seed = column_by_cell(sweep_runs_csv(result), 3, 6);
  const auto table = column_by_cell(sweep_table_csv(result), 3, 3);
  ASSERT_EQ(per_seed.size(), 6u);
  for (const auto& [key, values] : per_seed) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    ASSERT_TRUE(table.contains(key)) << key;
    EXPECT_NEAR(table.at(key)[0], mean, 1e-6) << key;
  }
}

TEST(Sweep, SampleStdAcrossSeeds) {
  auto spec = parse_config_text(kTiny);
  spec.base.max_epochs = 1;
  spec.byzantine_ratios = {0.0};
  spec.seeds = {1, 2, 3};
  const auto result = run_sweep(spec, load_dataset(spec.dataset));
  const auto& row = result.rows.at(0);
  double mean = 0.0;
  for (const auto& r : row.runs) mean += r.reported.ndcg;
  mean /= 3.0;
  double ss = 0.0;
  for (const auto& r : row.runs) ss += (r.reported.ndcg - mean) * (r.reported.ndcg - mean);
  EXPECT_NEAR(row.ndcg_std, std::sqrt(ss / 2.0), 1e-15);
}

TEST(Sweep, FailingCellIsRecordedAndSweepContinues) {
  auto spec = parse_config_text(kTiny);
  spec.base.max_epochs = 1;
  spec.base.attack.lambda = 1.0;
  spec.attacks = {AttackKind::FedAttack, AttackKind::None};
  // 60 items, profiles up to 14 plus held-out items: a 10% pool cannot
  // supply 6 disjoint hard samples.
  spec.pool_fractions = {0.1};
  spec.byzantine_ratios = {0.2};
  spec.seeds = {1};
  const auto result = run_sweep(spec, load_dataset(spec.dataset));
  ASSERT_EQ(result.rows.size(), 2u);
  EXPECT_TRUE(result.rows[0].error.has_value());
  EXPECT_FALSE(result.rows[1].error.has_value());
  EXPECT_FALSE(result.all_succeeded());
  const std::string table = sweep_table_csv(result);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);
}

TEST(Detection, NoAttackAbortsWithSingleClassError) {
  auto spec = parse_config_text(kTiny);
  spec.base.byzantine_ratio = 0.1;
  spec.base.max_epochs = 1;
  const auto log = load_dataset(spec.dataset);
  try {
    run_detection_protocol(spec.base, spec.detector, log);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("malicious"), std::string::npos);
  }
}

TEST(Detection, DeterministicPerSeed) {
  auto spec = parse_config_text(kTiny);
  spec.base.byzantine_ratio = 0.2;
  spec.base.attack.kind = AttackKind::StatOpt;
  spec.detector.epochs = 50;
  const auto log = load_dataset(spec.dataset);
  const auto a = run_detection_protocol(spec.base, spec.detector, log);
  const auto b = run_detection_protocol(spec.base, spec.detector, log);
  EXPECT_EQ(a.training.model.weights, b.training.model.weights);
  EXPECT_EQ(a.training.heldout_accuracy, b.training.heldout_accuracy);
  EXPECT_EQ(metrics_csv(a.phase2, spec.base), metrics_csv(b.phase2, spec.base));
  EXPECT_GT(a.collected_malicious, 0u);
  EXPECT_GT(a.collected_normal, a.collected_malicious);
  const std::string csv = detector_accuracy_csv({a});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "attack,accuracy");
  // Three decimals.
  const std::string value = csv.substr(csv.rfind(',') + 1);
  EXPECT_EQ(value.size(), 6u);
}

TEST(Analysis, FinalEpochHardnessAndPca) {
  auto spec = parse_config_text(kTiny);
  spec.base.byzantine_ratio = 0.2;
  spec.base.attack.kind = AttackKind::FedAttack;
  const auto log = load_dataset(spec.dataset);
  const auto a = run_analysis(spec.base, log);
  const auto registry = make_registry(spec.base, log);
  // Every client appears once in the final epoch.
  EXPECT_EQ(a.pca_clients.size(), registry.size());
  EXPECT_EQ(a.pca.coords.size(), registry.size());
  for (const auto& b : a.hardness.buckets) {
    if (b.stats[1][0].empty()) continue;
    EXPECT_GT(b.stats[1][1].mean, b.stats[1][0].mean);
  }
  const std::string csv = hardness_csv(a.hardness);
  EXPECT_NE(csv.find("1-4,benign,positive"), std::string::npos);
  EXPECT_NE(csv.find("200+,byzantine,negative"), std::string::npos);
}

TEST(MetricsCsv, HeaderAndRows) {
  MetricsTimeline t;
  t.epochs.push_back({1, 0.25, 0.125, 0.0, 0.0});
  SimulationConfig c;
  c.byzantine_ratio = 0.05;
  c.seed = 4;
  c.attack.kind = AttackKind::FedAttack;
  EXPECT_EQ(metrics_csv(t, c), "epoch,hr5,ndcg5,defense,attack,byz_ratio,seed\n1,0.250000,0.125000,mean,fedattack,0.05,4\n");
}

TEST(WriteFileAtomic, ReplacesContentAndLeavesNoTemporary) {
  const fs::path dir = fs::temp_directory_path() / "fedattack_atomic_test";
  fs::remove_all(dir);
  const fs::path path = dir / "nested" / "out.csv";
  write_file_atomic(path, "first\n");
  write_file_atomic(path, "second\n");
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(content, "second\n");
  EXPECT_FALSE(fs::exists(dir / "nested" / "out.csv.tmp"));
  fs::remove_all(dir);
}

TEST(Manifest, JsonFields) {
  const auto text = manifest_json("sweep", "00ff00ff00ff00ff", {{"results.csv", "00ff00ff00ff00ff", {1, 2}}}, 1.5);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["command"], "sweep");
  EXPECT_EQ(j["config_hash"], "00ff00ff00ff00ff");
  EXPECT_EQ(j["build_id"], std::string(build_id()));
  EXPECT_EQ(j["wall_time_seconds"], 1.5);
  ASSERT_EQ(j["outputs"].size(), 1u);
  EXPECT_EQ(j["outputs"][0]["file"], "results.csv");
  EXPECT_EQ(j["outputs"][0]["seeds"], (std::vector<int>{1, 2}));
  EXPECT_FALSE(build_id().empty());
}

}  // namespace
}  // namespace fedattack
