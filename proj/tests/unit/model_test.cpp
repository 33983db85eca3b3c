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

#include <cmath>
#include <random>

#include "fedattack/model.hpp"
#include "fedattack/oracles/oracles.hpp"

namespace fedattack {
namespace {

ClientProfile profile(UserId id, std::vector<ItemId> train) {
  ClientProfile c;
  c.user_id = id;
  c.train_items = std::move(train);
  c.val_item = 0;
  c.test_item = 0;
  c.k_positives = 1;
  return c;
}

TEST(InitParams, SameSeedIsBitIdentical) {
  const auto a = init_params(10, 20, 8, PredictorKind::Mlp, 42);
  const auto b = init_params(10, 20, 8, PredictorKind::Mlp, 42);
  EXPECT_EQ(a.values, b.values);
}

TEST(InitParams, DifferentSeedsDiffer) {
  EXPECT_NE(init_params(10, 20, 8, PredictorKind::DotProduct, 1).values,
            init_params(10, 20, 8, PredictorKind::DotProduct, 2).values);
}

TEST(InitParams, ShapesFollowDimension) {
  const auto p = init_params(7, 11, 64, PredictorKind::DotProduct, 0);
  EXPECT_EQ(p.user_row(0).size(), 64u);
  EXPECT_EQ(p.layout.predictor_size(), 0u);
  EXPECT_EQ(p.values.size(), (7u + 11u) * 64u);
  const auto m = init_params(7, 11, 4, PredictorKind::Mlp, 0);
  EXPECT_EQ(m.layout.predictor_size(), 2u * 4 * 4 + 4 + 4 + 1);
  for (double v : m.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(UserEmbed, SeqMeanAveragesProfileRows) {
  auto p = init_params(3, 4, 2, PredictorKind::DotProduct, 0);
  std::ranges::copy(std::vector{1.0, 0.0}, p.item_row(1).begin());
  std::ranges::copy(std::vector{3.0, 2.0}, p.item_row(2).begin());
  EXPECT_EQ(user_embed(p, profile(0, {1, 2}), UserModelKind::SeqMean), (Vec{2.0, 1.0}));
  EXPECT_EQ(user_embed(p, profile(0, {2}), UserModelKind::SeqMean), (Vec{3.0, 2.0}));
}

TEST(UserEmbed, IdEmbeddingReadsUserRow) {
  const auto p = init_params(6, 4, 3, PredictorKind::DotProduct, 9);
  const Vec u = user_embed(p, profile(5, {1}), UserModelKind::IdEmbedding);
  EXPECT_TRUE(std::equal(u.begin(), u.end(), p.user_row(5).begin()));
}

TEST(UserEmbed, EmptySeqMeanProfileThrows) {
  const auto p = init_params(2, 4, 3, PredictorKind::DotProduct, 0);
  EXPECT_THROW(user_embed(p, profile(0, {}), UserModelKind::SeqMean), PreconditionError);
}

TEST(Score, DotProduct) {
  auto p = init_params(1, 2, 2, PredictorKind::DotProduct, 0);
  std::ranges::copy(std::vector{3.0, 4.0}, p.item_row(1).begin());
  EXPECT_DOUBLE_EQ(score(p, Vec{1.0, 2.0}, 1), 11.0);
  EXPECT_DOUBLE_EQ(score(p, Vec{0.0, 0.0}, 1), 0.0);
}

TEST(Score, ZeroMlpScoresZero) {
  auto p = init_params(1, 3, 4, PredictorKind::Mlp, 0);
  std::ranges::fill(p.predictor(), 0.0);
  EXPECT_DOUBLE_EQ(score(p, Vec{1.0, -2.0, 3.0, 0.5}, 2), 0.0);
}

TEST(Score, ScoreAllMatchesPerItemScore) {
  const auto p = init_params(2, 9, 5, PredictorKind::Mlp, 3);
  const Vec u = user_embed(p, profile(0, {1, 4}), UserModelKind::SeqMean);
  const Vec all = score_all(p, u);
  for (ItemId i = 0; i < 9; ++i) EXPECT_NEAR(all[static_cast<std::size_t>(i)], score(p, u, i), 1e-15);
}

TEST(BprLoss, EqualScoresGiveLn2) { EXPECT_NEAR(bpr_loss(0.3, 0.3), 0.6931471805599453, 1e-15); }

TEST(BprLoss, LargeMarginIsSoftplusOfMinusTwenty) {
  // softplus(-20) evaluated at 40 digits.
  EXPECT_NEAR(bpr_loss(20.0, 0.0), 2.0611536203143807e-9, 1e-22);
  EXPECT_NEAR(bpr_loss(20.0, 0.0), static_cast<double>(oracles::softplus(-20.0L)), 1e-22);
}

TEST(BprLoss, NegativeAboveWithMarginTwo) {
  EXPECT_NEAR(bpr_loss(0.0, 2.0), 2.1269280110429725, 1e-14);
}

TEST(BprLoss, NanThrows) { EXPECT_THROW(bpr_loss(std::nan(""), 0.0), Error); }

TEST(BprGradients, EqualScoresGiveMinusHalfOnPositive) {
  auto p = init_params(1, 3, 2, PredictorKind::DotProduct, 0);
  std::ranges::fill(p.values, 0.0);
  std::ranges::copy(std::vector{1.0, 0.0}, p.item_row(0).begin());
  // u = item 0 = [1, 0]; items 1 and 2 are zero so both scores are 0.
  const auto g = bpr_gradients(p, profile(0, {0}), ItemPair{1, 2}, UserModelKind::SeqMean);
  // dL/dy_p = -0.5, so dL/d(item 1) = -0.5 * u.
  EXPECT_DOUBLE_EQ(g.item_rows.at(1)[0], -0.5);
  EXPECT_DOUBLE_EQ(g.item_rows.at(2)[0], 0.5);
}

TEST(BprGradients, TouchesOnlyUsedRows) {
  const auto p = init_params(4, 30, 3, PredictorKind::DotProduct, 1);
  const auto c = profile(2, {3, 5, 7});
  const std::vector<ItemPair> pairs{{3, 10}, {5, 11}};
  const auto seq = bpr_gradients(p, c, pairs, UserModelKind::SeqMean);
  EXPECT_TRUE(seq.user_rows.empty());
  for (const auto& [id, row] : seq.item_rows) {
    EXPECT_TRUE(id == 3 || id == 5 || id == 7 || id == 10 || id == 11) << id;
  }
  const auto idg = bpr_gradients(p, c, pairs, UserModelKind::IdEmbedding);
  ASSERT_EQ(idg.user_rows.size(), 1u);
  EXPECT_TRUE(idg.user_rows.contains(2));
  EXPECT_EQ(idg.item_rows.size(), 4u);
}

// Mean over random instances of each user-model x predictor combination.
class GradientCheck : public ::testing::TestWithParam<std::tuple<UserModelKind, PredictorKind>> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto [user_kind, predictor] = GetParam();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int trial = 0; trial < 25; ++trial) {
    auto p = init_params(3, 8, 4, predictor, static_cast<std::uint64_t>(trial));
    for (double& v : p.values) v = normal(rng);
    const auto c = profile(1, {0, 2, 5});
    const std::vector<ItemPair> pairs{{2, 6}, {5, 7}};
    const Vec analytic = bpr_gradients(p, c, pairs, user_kind).densify(p.layout);
    auto loss = [&](const Vec& values) {
      ModelParams q{p.layout, values};
      double s = 0.0;
      for (const auto& pr : pairs) s += pair_loss(q, c, pr, user_kind);
      return s / static_cast<double>(pairs.size());
    };
    const Vec numeric = oracles::central_difference(loss, p.values, 1e-5);
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      const double scale = std::max({1e-6, std::abs(numeric[k]), std::abs(analytic[k])});
      EXPECT_LT(std::abs(numeric[k] - analytic[k]) / scale, 1e-4) << "coordinate " << k << " trial " << trial;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllModels, GradientCheck,
                         ::testing::Combine(::testing::Values(UserModelKind::IdEmbedding, UserModelKind::SeqMean),
                                            ::testing::Values(PredictorKind::DotProduct, PredictorKind::Mlp)));

TEST(SparseGradient, SparsifyRoundTrips) {
  const auto p = init_params(3, 6, 2, PredictorKind::Mlp, 0);
  SparseGradient g;
  g.add_item_row(4, Vec{1.0, -2.0});
  g.add_user_row(1, Vec{0.5, 0.0});
  g.predictor_grad.assign(p.layout.predictor_size(), 0.25);
  const Vec dense = g.densify(p.layout);
  const auto back = SparseGradient::sparsify(p.layout, dense);
  EXPECT_EQ(back.densify(p.layout), dense);
  EXPECT_EQ(back.item_rows.size(), 1u);
  EXPECT_EQ(back.user_rows.size(), 1u);
}

TEST(Adam, FirstUnitStepMovesByLearningRate) {
  ModelParams p{ParamLayout{0, 1, 1, PredictorKind::DotProduct}, Vec{0.0}};
  auto state = AdamState::zeros(1);
  adam_apply(state, p, Vec{1.0});
  // m_hat = v_hat = 1: delta = -lr / (1 + eps).
  EXPECT_NEAR(p.values[0], -0.00099999999000000010, 1e-18);
}

TEST(Adam, ZeroGradientLeavesParams) {
  auto p = init_params(2, 3, 2, PredictorKind::DotProduct, 5);
  const Vec before = p.values;
  auto state = AdamState::zeros(p.values.size());
  adam_apply(state, p, Vec(p.values.size(), 0.0));
  EXPECT_EQ(p.values, before);
}

TEST(Adam, RepeatedGradientKeepsStepSize) {
  ModelParams p{ParamLayout{0, 1, 1, PredictorKind::DotProduct}, Vec{0.0}};
  auto state = AdamState::zeros(1);
  adam_apply(state, p, Vec{0.3});
  const double d1 = p.values[0];
  adam_apply(state, p, Vec{0.3});
  const double d2 = p.values[0] - d1;
  EXPECT_NEAR(std::abs(d2), std::abs(d1), 1e-6);
}

TEST(Adam, MatchesRecurrenceOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Vec start(6), grad(6);
  for (auto& v : start) v = normal(rng);
  for (auto& v : grad) v = normal(rng);
  ModelParams p{ParamLayout{0, 3, 2, PredictorKind::DotProduct}, start};
  auto state = AdamState::zeros(6);
  for (int i = 0; i < 5; ++i) adam_apply(state, p, grad);
  const auto ref = oracles::adam_steps(start, grad, 5, 1e-3, 0.9, 0.999, 1e-8);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(p.values[k], ref.params[k], 1e-15);
    EXPECT_GE(state.second_moment[k], 0.0);
  }
  EXPECT_EQ(state.step_count, 5);
}

TEST(Adam, ShapeMismatchThrows) {
  auto p = init_params(1, 1, 2, PredictorKind::DotProduct, 0);
  auto state = AdamState::zeros(p.values.size());
  EXPECT_THROW(adam_apply(state, p, Vec{1.0}), PreconditionError);
}

}  // namespace
}  // namespace fedattack
