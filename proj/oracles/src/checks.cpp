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

#include "fedattack/oracles/checks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedattack/attacks.hpp"
#include "fedattack/defenses.hpp"
#include "fedattack/eval.hpp"
#include "fedattack/model.hpp"
#include "fedattack/oracles/oracles.hpp"

namespace fedattack::oracles {

CheckResult check_gradients() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 0.5);
  int instances = 0;
  double worst = 0.0;
  for (auto user_kind : {UserModelKind::IdEmbedding, UserModelKind::SeqMean}) {
    for (auto predictor : {PredictorKind::DotProduct, PredictorKind::Mlp}) {
      for (int trial = 0; trial < 100; ++trial) {
        const auto users = std::uniform_int_distribution<int>(2, 6)(rng);
        const auto items = std::uniform_int_distribution<int>(6, 20)(rng);
        auto p = init_params(users, items, 4, predictor, rng());
        for (double& v : p.values) v = normal(rng);

        std::vector<ItemId> all(static_cast<std::size_t>(items));
        for (int i = 0; i < items; ++i) all[static_cast<std::size_t>(i)] = i;
        std::ranges::shuffle(all, rng);
        const auto profile_size = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
        ClientProfile c;
        c.user_id = std::uniform_int_distribution<UserId>(0, users - 1)(rng);
        c.train_items.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(profile_size));
        std::ranges::sort(c.train_items);
        c.k_positives = 1;

        std::vector<ItemPair> pairs;
        const auto pair_count = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
        for (std::size_t k = 0; k < pair_count; ++k) {
          const auto pos = c.train_items[k % c.train_items.size()];
          const auto neg = all[profile_size + k % (all.size() - profile_size)];
          pairs.push_back({pos, neg});
        }
        const Vec analytic = bpr_gradients(p, c, pairs, user_kind).densify(p.layout);
        const Vec numeric = central_difference(
            [&](const Vec& values) {
              const ModelParams q{p.layout, values};
              double s = 0.0;
              for (const auto& pr : pairs) s += pair_loss(q, c, pr, user_kind);
              return s / static_cast<double>(pairs.size());
            },
            p.values, 1e-5);
        for (std::size_t k = 0; k < numeric.size(); ++k) {
          const double scale = std::max({1e-6, std::abs(numeric[k]), std::abs(analytic[k])});
          worst = std::max(worst, std::abs(numeric[k] - analytic[k]) / scale);
        }
        ++instances;
      }
    }
  }
  std::ostringstream detail;
  detail << instances << " instances, max rel err " << std::scientific << worst;
  return {worst < 1e-4, detail.str()};
}

CheckResult check_aggregators() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> coarse(-2, 2);
  int mismatches = 0;
  long checks = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const auto d = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    std::vector<Vec> u(n, Vec(d));
    // Every fourth instance uses small integers so ties are common.
    for (auto& row : u)
      for (double& v : row) v = trial % 4 == 3 ? coarse(rng) : normal(rng);
    const Matrix m(u.begin(), u.end());

    mismatches += agg_median(u) != coordinate_median(m);
    ++checks;
    for (int beta = 0; 2 * beta < static_cast<int>(n); ++beta, ++checks) {
      mismatches += agg_trimmed_mean(u, beta) != coordinate_trimmed_mean(m, beta);
    }
    for (int f = 0; f <= static_cast<int>(n) - 3; ++f) {
      const std::size_t want = krum_index(m, f);
      mismatches += krum_select(u, f) != want;
      mismatches += agg_krum(u, f) != u[want];
      checks += 2;
      for (int sel = 1; sel <= static_cast<int>(n) - f - 2; ++sel, ++checks) {
        mismatches += multi_krum_select(u, f, sel) != multi_krum_indices(m, f, sel);
      }
    }
  }
  return {mismatches == 0, std::to_string(checks) + " comparisons over 500 instances, " +
                               std::to_string(mismatches) + " mismatches"};
}

CheckResult check_retrieval() {
  std::mt19937_64 rng(5150);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> coarse(-2, 2);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const bool ties = trial % 2 == 1;
    const auto items = std::uniform_int_distribution<int>(2, 500)(rng);
    const auto dim = std::uniform_int_distribution<int>(1, 16)(rng);
    auto p = init_params(1, items, dim, PredictorKind::DotProduct, 0);
    Matrix table(static_cast<std::size_t>(items), Vector(static_cast<std::size_t>(dim)));
    for (ItemId i = 0; i < items; ++i) {
      auto row = p.item_row(i);
      for (int k = 0; k < dim; ++k) {
        row[static_cast<std::size_t>(k)] = ties ? coarse(rng) : normal(rng);
        table[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = row[static_cast<std::size_t>(k)];
      }
    }
    const double fraction = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const auto pool =
        trial % 5 == 0 ? CandidatePool::full(items) : CandidatePool::sample(items, fraction, rng());
    const std::vector<std::int32_t> pool_ids(pool.item_ids.begin(), pool.item_ids.end());
    std::vector<ItemId> exclude;
    for (ItemId id : pool.item_ids)
      if (std::bernoulli_distribution(0.1)(rng)) exclude.push_back(id);
    if (exclude.size() == pool.item_ids.size()) exclude.pop_back();
    const std::size_t available = pool.item_ids.size() - exclude.size();
    const auto k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(50, available))(rng);
    Vec user(static_cast<std::size_t>(dim));
    for (double& v : user) v = ties ? coarse(rng) : normal(rng);
    mismatches += hardest_negatives(p, user, k, pool, exclude) !=
                  top_k_by_score(table, user, pool_ids, exclude, k);
    mismatches += hardest_pseudo_positives(p, user, k, pool, exclude) !=
                  bottom_k_by_score(table, user, pool_ids, exclude, k);
  }
  return {mismatches == 0, "1000 pools, " + std::to_string(mismatches) + " mismatches"};
}

CheckResult check_metrics() {
  int mismatches = 0;
  for (int rank = 1; rank <= 20; ++rank) {
    mismatches += hr_at_k(rank, 5) != hit_ratio(rank, 5);
    mismatches += ndcg_at_k(rank, 5) != ndcg(rank, 5);
  }
  mismatches += ndcg_at_k(3, 5) != 0.5;
  mismatches += ndcg_at_k(1, 5) != 1.0;
  mismatches += hr_at_k(6, 5) != 0.0;
  return {mismatches == 0, "ranks 1..20, " + std::to_string(mismatches) + " mismatches"};
}

CheckResult check_pca() {
  std::mt19937_64 rng(909);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix rows(50, Vector(8));
    std::vector<GradientFeatures> features(50);
    // Column scales spread the spectrum the way pooled features do.
    for (std::size_t i = 0; i < 50; ++i) {
      for (std::size_t k = 0; k < 8; ++k) rows[i][k] = normal(rng) * (1.0 + static_cast<double>(k));
      features[i].values = rows[i];
    }
    const auto want = covariance_eigenvalues(rows);
    const auto pca = pca_project(features);
    for (std::size_t k = 0; k < 2; ++k) worst = std::max(worst, std::abs(pca.eigenvalues[k] - want[k]) / want[k]);

    Vec cov(64, 0.0);
    Vec mean(8, 0.0);
    for (const auto& r : rows)
      for (std::size_t k = 0; k < 8; ++k) mean[k] += r[k] / 50.0;
    for (const auto& r : rows)
      for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b) cov[a * 8 + b] += (r[a] - mean[a]) * (r[b] - mean[b]) / 49.0;
    const auto pairs = top_eigenpairs(cov, 8, 8);
    const auto dense = symmetric_eigenvalues(cov, 8);
    for (std::size_t k = 0; k < 8; ++k) worst = std::max(worst, std::abs(pairs.values[k] - dense[k]) / dense[k]);
  }
  std::ostringstream detail;
  detail << "100 matrices 50x8, max rel err " << std::scientific << worst;
  return {worst < 1e-6, detail.str()};
}

std::vector<NamedCheck> all_checks() {
  return {
      {"gradient finite differences", check_gradients},
      {"aggregator oracles", check_aggregators},
      {"retrieval oracle", check_retrieval},
      {"metric oracle", check_metrics},
      {"pca eigenvalues", check_pca},
  };
}

}  // namespace fedattack::oracles
