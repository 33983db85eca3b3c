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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fedattack/attacks.hpp"
#include "fedattack/common.hpp"
#include "fedattack/dataset.hpp"
#include "fedattack/detection.hpp"
#include "fedattack/model.hpp"

namespace fedattack {

struct RankingResult {
  UserId client = 0;
  std::int32_t rank = 1;       // 1-based
  std::int32_t higher = 0;     // candidates scored strictly above the target
  std::int32_t ties = 0;       // other candidates with exactly the target's score
  std::int32_t candidates = 0; // ranked set size, target included
};

// rank = 1 + higher + floor(ties / 2); `excluded[i]` removes item i from the
// candidate set (the target itself is always ranked).
RankingResult rank_from_scores(std::span<const double> scores, ItemId target, std::span<const char> excluded);

enum class EvalTarget { Test, Validation };

struct EvalOptions {
  UserModelKind user_kind = UserModelKind::SeqMean;
  int k = 5;
  bool exclude_seen = true;
  EvalTarget target = EvalTarget::Test;
  int threads = 1;
};

// Ranks the client's test (or validation) item against the full item set,
// minus the client's training items and the other held-out item when
// exclude_seen is set.
RankingResult rank_test_item(const ModelParams& params, const ClientProfile& client, const EvalOptions& options);

double hr_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);

struct EpochEval {
  double hr = 0.0;
  double ndcg = 0.0;
  std::size_t clients = 0;
};

// Means over benign clients only; reduction runs in client-id order.
EpochEval evaluate_epoch(const ModelParams& params, const ClientRegistry& registry, const EvalOptions& options);

struct MomentStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  bool empty() const noexcept { return n == 0; }
};

struct HardnessBucket {
  std::int32_t lower = 0;  // inclusive profile length
  std::int32_t upper = 0;  // exclusive; -1 for unbounded
  // [role][polarity]: role 0 benign / 1 Byzantine, polarity 0 positive / 1 negative.
  std::array<std::array<MomentStats, 2>, 2> stats{};
};

struct HardnessProfile {
  std::vector<HardnessBucket> buckets;

  // Pooled over all buckets.
  MomentStats overall(Role role, bool negative) const;
};

std::vector<std::int32_t> default_hardness_edges();

// Accumulates <user, item> similarities of logged training pairs, bucketed
// by the client's profile length, across any number of rounds.
class HardnessAccumulator {
 public:
  explicit HardnessAccumulator(std::vector<std::int32_t> edges = default_hardness_edges());

  void add(const ModelParams& params, const ClientRegistry& registry, std::span<const SampleTrace> traces,
           UserModelKind user_kind);
  HardnessProfile finish() const;

 private:
  struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
  };
  std::size_t bucket_of(std::size_t length) const;

  std::vector<std::int32_t> edges_;
  std::vector<std::array<std::array<Moments, 2>, 2>> moments_;
};

HardnessProfile hardness_profile(const ModelParams& params, const ClientRegistry& registry,
                                 std::span<const SampleTrace> traces, UserModelKind user_kind,
                                 std::vector<std::int32_t> edges = default_hardness_edges());

struct PcaProjection {
  std::vector<std::array<double, 2>> coords;
  std::array<double, 2> eigenvalues{};
  std::array<double, 2> explained{};
  std::vector<Vec> components;  // unit eigenvectors, F entries each
};

struct PcaOptions {
  double tolerance = 1e-9;
  int max_iterations = 10000;
  std::uint64_t seed = 0x9ca;
};

// Covariance (n - 1 denominator) of mean-centred rows, top eigenpairs by
// power iteration with deflation.
PcaProjection pca_project(std::span<const GradientFeatures> rows, const PcaOptions& options = {});

// Power iteration on a symmetric matrix (row-major, size x size); returns
// the top `count` eigenvalues (descending) and their unit vectors.
struct EigenPairs {
  Vec values;
  std::vector<Vec> vectors;
};
EigenPairs top_eigenpairs(std::span<const double> matrix, std::size_t size, std::size_t count,
                          const PcaOptions& options = {});

}  // namespace fedattack
