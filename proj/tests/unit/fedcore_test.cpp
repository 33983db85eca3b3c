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

#include <algorithm>
#include <random>
#include <set>

#include "fedattack/eval.hpp"
#include "fedattack/fedcore.hpp"

namespace fedattack {
namespace {

ClientRegistry toy_registry(std::size_t n) {
  std::vector<Split> splits(n, Split{{1, 2, 3}, 4, 5});
  return build_client_registry(splits, 0.0, 1, 0);
}

TEST(SampleRounds, EvenSplitIsDisjointCover) {
  const auto reg = toy_registry(32);
  Rng rng(3);
  const auto rounds = sample_rounds(reg, 16, rng);
  ASSERT_EQ(rounds.size(), 2u);
  std::set<UserId> seen;
  for (const auto& r : rounds) {
    EXPECT_EQ(r.size(), 16u);
    seen.insert(r.begin(), r.end());
  }
  EXPECT_EQ(seen.size(), 32u);
}

TEST(SampleRounds, LastRoundMayBeShort) {
  const auto reg = toy_registry(20);
  Rng rng(3);
  const auto rounds = sample_rounds(reg, 16, rng);
  ASSERT_EQ(rounds.size(), 2u);
  EXPECT_EQ(rounds[0].size(), 16u);
  EXPECT_EQ(rounds[1].size(), 4u);
}

TEST(SampleRounds, SameSeedSamePermutation) {
  const auto reg = toy_registry(50);
  Rng a(8), b(8);
  EXPECT_EQ(sample_rounds(reg, 16, a), sample_rounds(reg, 16, b));
}

std::vector<SparseGradient> random_gradients(const ParamLayout& layout, std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<ItemId> item(0, layout.num_items - 1);
  std::uniform_int_distribution<UserId> user(0, layout.num_users - 1);
  std::vector<SparseGradient> out(n);
  for (auto& g : out) {
    Vec row(layout.dim_u());
    for (int r = 0; r < 4; ++r) {
      for (double& v : row) v = normal(rng);
      g.add_item_row(item(rng), row);
    }
    for (double& v : row) v = normal(rng);
    g.add_user_row(user(rng), row);
    g.predictor_grad.resize(layout.predictor_size());
    for (double& v : g.predictor_grad) v = normal(rng);
  }
  return out;
}

TEST(AggregateRound, SingleGradientMean) {
  const ParamLayout layout{3, 6, 2, PredictorKind::Mlp};
  std::mt19937_64 rng(1);
  const auto g = random_gradients(layout, 1, rng);
  const Vec dense = g[0].densify(layout);
  EXPECT_EQ(aggregate_round(g, AggregationRule{DefenseKind::Mean}, layout), dense);
  EXPECT_EQ(aggregate_round(g, AggregationRule{DefenseKind::Median}, layout), dense);
  EXPECT_EQ(dense.size(), layout.total_size());
}

TEST(AggregateRound, SparsePathEqualsDenseAggregators) {
  const ParamLayout layout{10, 40, 3, PredictorKind::Mlp};
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto grads = random_gradients(layout, 1 + static_cast<std::size_t>(trial % 9), rng);
    std::vector<Vec> dense;
    for (const auto& g : grads) dense.push_back(g.densify(layout));
    EXPECT_EQ(aggregate_round(grads, AggregationRule{DefenseKind::Mean}, layout), agg_mean(dense));
    for (double tau : {0.5, 2.0, 100.0}) {
      AggregationRule rule{DefenseKind::NormBound};
      rule.tau = tau;
      EXPECT_EQ(aggregate_round(grads, rule, layout), agg_norm_bound(dense, tau));
    }
    const auto resolved = resolve_rule(AggregationRule{DefenseKind::TrimmedMean}, grads.size(), 0.2);
    EXPECT_EQ(aggregate_round(grads, resolved, layout), agg_trimmed_mean(dense, resolved.beta));
  }
}

TEST(AggregateRound, EmptyRejected) {
  const ParamLayout layout{1, 2, 2, PredictorKind::DotProduct};
  EXPECT_THROW(aggregate_round({}, AggregationRule{}, layout), PreconditionError);
}

struct Tiny {
  InteractionLog log;
  ClientRegistry registry;
};

Tiny tiny(double ratio, std::int32_t k_positives = 3) {
  Tiny t;
  t.log = generate_synthetic(SyntheticSpec{.users = 64, .items = 60, .clusters = 3, .min_length = 6, .max_length = 15});
  t.registry = build_client_registry(leave_one_out_split(t.log), ratio, k_positives, 5);
  return t;
}

SimulationConfig tiny_config() {
  SimulationConfig c;
  c.max_epochs = 3;
  c.dim = 8;
  c.lr = 0.01;
  c.k_positives = 3;
  c.seed = 11;
  return c;
}

TEST(RunTraining, OneEpochRoundCount) {
  std::vector<Split> splits(32, Split{{1, 2, 3}, 4, 5});
  const auto reg = build_client_registry(splits, 0.0, 1, 0);
  InteractionLog log;
  log.item_count = 10;
  auto config = tiny_config();
  config.max_epochs = 1;
  const auto t = run_training(config, reg, log);
  EXPECT_EQ(t.rounds, 2);
  EXPECT_EQ(t.epochs.size(), 1u);
}

TEST(RunTraining, RoundsPerEpochTruncates) {
  const auto t = tiny(0.0);
  auto config = tiny_config();
  config.rounds_per_epoch = 1;
  EXPECT_EQ(run_training(config, t.registry, t.log).rounds, 3);
}

TEST(RunTraining, BeatsRandomRanking) {
  const auto t = tiny(0.0);
  auto config = tiny_config();
  config.max_epochs = 20;
  const auto timeline = run_training(config, t.registry, t.log);
  EXPECT_GT(timeline.best().hr, 5.0 / 60.0);
}

TEST(RunTraining, IdenticalRunsAreBitIdentical) {
  const auto t = tiny(0.1);
  auto config = tiny_config();
  config.byzantine_ratio = 0.1;
  config.attack.kind = AttackKind::Lie;
  const auto a = run_training(config, t.registry, t.log);
  const auto b = run_training(config, t.registry, t.log);
  config.threads = 3;
  const auto c = run_training(config, t.registry, t.log);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EXPECT_EQ(a.epochs[i].hr, b.epochs[i].hr);
    EXPECT_EQ(a.epochs[i].ndcg, b.epochs[i].ndcg);
    EXPECT_EQ(a.epochs[i].val_hr, c.epochs[i].val_hr);
    EXPECT_EQ(a.epochs[i].ndcg, c.epochs[i].ndcg);
  }
  EXPECT_EQ(a.best_epoch, c.best_epoch);
}

TEST(RunTraining, FinalModelIndependentOfThreads) {
  const auto t = tiny(0.2);
  auto config = tiny_config();
  config.byzantine_ratio = 0.2;
  config.attack.kind = AttackKind::FedAttack;
  config.defense.kind = DefenseKind::Krum;
  Vec one, four;
  TrainingHooks hooks;
  hooks.on_epoch = [&](const EpochMetrics&, const ModelParams& p) { one = p.values; };
  run_training(config, t.registry, t.log, hooks);
  config.threads = 4;
  hooks.on_epoch = [&](const EpochMetrics&, const ModelParams& p) { four = p.values; };
  run_training(config, t.registry, t.log, hooks);
  EXPECT_EQ(one, four);
}

TEST(RunTraining, EveryAttackAndDefenseRuns) {
  const auto t = tiny(0.2);
  for (auto attack : {AttackKind::None, AttackKind::FedAttack, AttackKind::LabelFlip, AttackKind::Gaussian,
                      AttackKind::Lie, AttackKind::StatOpt, AttackKind::DynOpt}) {
    for (auto defense : {DefenseKind::Mean, DefenseKind::Median, DefenseKind::TrimmedMean, DefenseKind::Krum,
                         DefenseKind::MultiKrum, DefenseKind::NormBound}) {
      auto config = tiny_config();
      config.max_epochs = 1;
      config.byzantine_ratio = 0.2;
      config.attack.kind = attack;
      config.defense.kind = defense;
      const auto timeline = run_training(config, t.registry, t.log);
      EXPECT_EQ(timeline.epochs.size(), 1u) << to_string(attack) << "/" << to_string(defense);
      EXPECT_GE(timeline.best().hr, 0.0);
    }
  }
}

TEST(RunTraining, HooksSeeRolesTracesAndGradients) {
  const auto t = tiny(0.25);
  auto config = tiny_config();
  config.max_epochs = 1;
  config.byzantine_ratio = 0.25;
  config.attack.kind = AttackKind::FedAttack;
  TrainingHooks hooks;
  hooks.keep_traces = true;
  hooks.keep_gradients = true;
  std::vector<HardnessProfile> profiles;
  std::size_t records = 0;
  hooks.on_round = [&](const RoundRecord& r, const ModelParams& snapshot) {
    ++records;
    EXPECT_TRUE(std::ranges::is_sorted(r.participants));
    EXPECT_EQ(r.roles.size(), r.participants.size());
    EXPECT_EQ(r.gradients.size(), r.participants.size());
    EXPECT_EQ(r.round_avg.size(), snapshot.layout.total_size());
    for (std::size_t i = 0; i < r.participants.size(); ++i) {
      EXPECT_EQ(r.roles[i], t.registry.clients[static_cast<std::size_t>(r.participants[i])].role);
      EXPECT_EQ(r.traces[i].client, r.participants[i]);
    }
    profiles.push_back(hardness_profile(snapshot, t.registry, r.traces, config.user_model));
  };
  const auto timeline = run_training(config, t.registry, t.log, hooks);
  EXPECT_EQ(records, static_cast<std::size_t>(timeline.rounds));
  // Per round, a Byzantine client's hard negatives outscore its pseudo-positives.
  for (const auto& p : profiles) {
    for (const auto& b : p.buckets) {
      const auto& byz = b.stats[1];
      if (byz[0].empty()) continue;
      EXPECT_GE(byz[1].mean, byz[0].mean);
    }
  }
}

TEST(RunTraining, DetectorWithoutModelRejected) {
  const auto t = tiny(0.0);
  auto config = tiny_config();
  config.detector_enabled = true;
  EXPECT_THROW(run_training(config, t.registry, t.log), ConfigError);
}

TEST(RunTraining, InvalidConfigRejected) {
  const auto t = tiny(0.0);
  auto config = tiny_config();
  config.lr = 0.0;
  EXPECT_THROW(run_training(config, t.registry, t.log), ConfigError);
  config = tiny_config();
  config.defense.tau = -1.0;
  EXPECT_THROW(run_training(config, t.registry, t.log), ConfigError);
}

}  // namespace
}  // namespace fedattack
