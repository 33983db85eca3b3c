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

#include "fedattack/defenses.hpp"
#include "fedattack/oracles/oracles.hpp"

namespace fedattack {
namespace {

std::vector<Vec> random_updates(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> normal;
  std::vector<Vec> out(n, Vec(d));
  for (auto& u : out)
    for (double& v : u) v = normal(rng);
  return out;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TEST(Mean, Examples) {
  EXPECT_EQ(agg_mean(std::vector<Vec>{{2.0}, {4.0}}), (Vec{3.0}));
  EXPECT_EQ(agg_mean(std::vector<Vec>{{1.5, -2.0}}), (Vec{1.5, -2.0}));
  EXPECT_EQ(agg_mean(std::vector<Vec>{{1.0, -3.0}, {-1.0, 3.0}}), (Vec{0.0, 0.0}));
}

TEST(Mean, EmptyAndRaggedRejected) {
  EXPECT_THROW(agg_mean(std::vector<Vec>{}), PreconditionError);
  EXPECT_THROW(agg_mean(std::vector<Vec>{{1.0}, {1.0, 2.0}}), PreconditionError);
}

TEST(Median, Examples) {
  EXPECT_EQ(agg_median(std::vector<Vec>{{1, 2}, {3, 4}, {5, 0}}), (Vec{3.0, 2.0}));
  EXPECT_EQ(agg_median(std::vector<Vec>{{1}, {3}}), (Vec{2.0}));
  EXPECT_EQ(agg_median(std::vector<Vec>{{7, -1}}), (Vec{7.0, -1.0}));
}

TEST(Median, MatchesSortOracle) {
  std::mt19937_64 rng(1);
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto u = random_updates(rng, n, 5);
    EXPECT_EQ(agg_median(u), oracles::coordinate_median(u));
  }
}

TEST(TrimmedMean, Examples) {
  EXPECT_DOUBLE_EQ(agg_trimmed_mean(std::vector<Vec>{{1}, {2}, {3}, {10}}, 1)[0], 2.5);
  std::mt19937_64 rng(2);
  const auto u = random_updates(rng, 6, 4);
  const Vec trimmed = agg_trimmed_mean(u, 0);
  const Vec mean = agg_mean(u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(trimmed[k], mean[k], 1e-15);
}

TEST(TrimmedMean, MatchesSortThenSliceOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 6);
    const auto u = random_updates(rng, n, 7);
    for (int beta = 0; 2 * beta < static_cast<int>(n); ++beta) {
      EXPECT_EQ(agg_trimmed_mean(u, beta), oracles::coordinate_trimmed_mean(u, beta));
    }
  }
}

TEST(TrimmedMean, BetaTooLargeRejected) {
  EXPECT_THROW(agg_trimmed_mean(std::vector<Vec>{{1}, {2}}, 1), ConfigError);
}

TEST(Krum, FourPointExample) {
  const std::vector<Vec> u{{0.0}, {0.1}, {0.2}, {10.0}};
  const auto scores = oracles::krum_scores(u, 1);
  // Frozen from the pairwise-distance oracle.
  EXPECT_NEAR(scores[0], 0.01, 1e-15);
  EXPECT_NEAR(scores[1], 0.01, 1e-15);
  EXPECT_NEAR(scores[2], 0.01, 1e-15);
  EXPECT_NEAR(scores[3], 96.04, 1e-12);
  EXPECT_EQ(krum_select(u, 1), 0u);
  EXPECT_EQ(agg_krum(u, 1), (Vec{0.0}));
}

TEST(Krum, IdenticalUpdatesPickFirst) {
  const std::vector<Vec> u(5, Vec{1.0, 2.0});
  EXPECT_EQ(krum_select(u, 1), 0u);
  EXPECT_EQ(agg_krum(u, 1), (Vec{1.0, 2.0}));
}

TEST(Krum, MatchesBruteForceScorer) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial % 5);
    const auto u = random_updates(rng, n, 6);
    for (int f = 0; f <= static_cast<int>(n) - 3; ++f) EXPECT_EQ(krum_select(u, f), oracles::krum_index(u, f));
  }
}

TEST(Krum, TooFewUpdatesRejected) {
  EXPECT_THROW(krum_select(std::vector<Vec>{{0}, {1}, {2}}, 1), ConfigError);
}

TEST(MultiKrum, SingleSelectionIsKrum) {
  std::mt19937_64 rng(5);
  const auto u = random_updates(rng, 7, 3);
  EXPECT_EQ(agg_multi_krum(u, 2, 1), agg_krum(u, 2));
}

TEST(MultiKrum, SelectAllIsMean) {
  std::mt19937_64 rng(6);
  const auto u = random_updates(rng, 6, 3);
  const Vec got = agg_multi_krum(u, 1, 6);
  const Vec want = agg_mean(u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
}

TEST(MultiKrum, MatchesReScoringOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial % 4);
    const auto u = random_updates(rng, n, 4);
    const int f = 1;
    for (int m = 1; m <= static_cast<int>(n) - f - 2; ++m) {
      EXPECT_EQ(multi_krum_select(u, f, m), oracles::multi_krum_indices(u, f, m));
    }
  }
}

TEST(NormBound, Examples) {
  EXPECT_EQ(agg_norm_bound(std::vector<Vec>{{0.0, 4.0}}, 2.0), (Vec{0.0, 2.0}));
  EXPECT_EQ(agg_norm_bound(std::vector<Vec>{{0.6, 0.8}}, 2.0), (Vec{0.6, 0.8}));
}

TEST(NormBound, ClippedUpdatesRespectTau) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto u = random_updates(rng, 1, 9);
    for (double& v : u[0]) v *= 3.0;
    EXPECT_LE(norm(agg_norm_bound(u, 2.0)), 2.0 + 1e-12);
  }
  const auto u = random_updates(rng, 6, 9);
  const Vec got = agg_norm_bound(u, 1.5);
  const Vec want = oracles::norm_clipped_mean(u, 1.5);
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
}

TEST(NormBound, NonPositiveTauRejected) {
  EXPECT_THROW(agg_norm_bound(std::vector<Vec>{{1.0}}, 0.0), ConfigError);
}

TEST(ResolveRule, AutoParametersFollowRatio) {
  const auto r = resolve_rule(AggregationRule{.kind = DefenseKind::MultiKrum}, 16, 0.05);
  EXPECT_EQ(r.f, 1);
  EXPECT_EQ(r.beta, 1);
  EXPECT_EQ(r.m_select, 13);
  const auto big = resolve_rule(AggregationRule{.kind = DefenseKind::TrimmedMean}, 16, 0.25);
  EXPECT_EQ(big.f, 4);
  EXPECT_EQ(big.beta, 4);
}

TEST(ResolveRule, ShrinksOnSmallRounds) {
  const auto r = resolve_rule(AggregationRule{.kind = DefenseKind::Krum}, 4, 0.5);
  EXPECT_EQ(r.f, 1);
  EXPECT_EQ(r.beta, 1);
  EXPECT_EQ(resolve_rule(AggregationRule{.kind = DefenseKind::Krum}, 2, 0.0).kind, DefenseKind::Median);
}

TEST(Aggregate, DispatchesByKind) {
  const std::vector<Vec> u{{1.0}, {2.0}, {9.0}};
  EXPECT_EQ(aggregate(u, AggregationRule{.kind = DefenseKind::Mean}), (Vec{4.0}));
  EXPECT_EQ(aggregate(u, AggregationRule{.kind = DefenseKind::Median}), (Vec{2.0}));
  EXPECT_EQ(aggregate(u, AggregationRule{.kind = DefenseKind::TrimmedMean, .beta = 1}), (Vec{2.0}));
}

TEST(DefenseKind, NamesRoundTrip) {
  for (auto k : {DefenseKind::Mean, DefenseKind::Median, DefenseKind::TrimmedMean, DefenseKind::Krum,
                 DefenseKind::MultiKrum, DefenseKind::NormBound}) {
    EXPECT_EQ(parse_defense_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_defense_kind("bogus"), ConfigError);
}

}  // namespace
}  // namespace fedattack
