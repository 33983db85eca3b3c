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
#include <functional>
#include <span>
#include <vector>

#include "fedattack/attacks.hpp"
#include "fedattack/dataset.hpp"
#include "fedattack/defenses.hpp"
#include "fedattack/detection.hpp"
#include "fedattack/model.hpp"
#include "fedattack/rng.hpp"

namespace fedattack {

struct SimulationConfig {
  // 0 runs every round of the epoch; a positive value truncates it.
  std::int32_t rounds_per_epoch = 0;
  std::int32_t max_epochs = 50;
  std::int32_t clients_per_round = 16;
  double byzantine_ratio = 0.0;
  AttackStrategy attack;
  AggregationRule defense;
  bool detector_enabled = false;
  double detector_threshold = 0.5;
  FeatureMode feature_mode = FeatureMode::Pooled;
  std::uint64_t seed = 0;
  std::int32_t dim = 64;
  double lr = 1e-3;
  std::int32_t k_eval = 5;
  std::int32_t k_positives = 10;
  PredictorKind predictor = PredictorKind::DotProduct;
  UserModelKind user_model = UserModelKind::SeqMean;
  bool exclude_seen = true;
  std::int32_t threads = 1;

  void validate() const;

  bool operator==(const SimulationConfig&) const = default;
};

struct EpochMetrics {
  std::int32_t epoch = 0;  // 1-based
  double hr = 0.0;
  double ndcg = 0.0;
  double val_hr = 0.0;
  double val_ndcg = 0.0;
};

struct MetricsTimeline {
  std::vector<EpochMetrics> epochs;
  // Index into `epochs` of the best validation HR@k (earliest on ties).
  std::int32_t best_epoch = -1;
  std::int64_t rounds = 0;
  std::int64_t degenerate_stat_rounds = 0;
  std::int64_t flagged_gradients = 0;
  std::int64_t flagged_byzantine = 0;

  const EpochMetrics& best() const;
};

// What the simulator saw in one round. Roles come from the registry's
// ground truth and are for logging only; the server path never reads them.
struct RoundRecord {
  std::int32_t epoch = 0;
  std::int64_t round_index = 0;
  std::vector<UserId> participants;  // ascending client id
  std::vector<Role> roles;
  std::vector<SparseGradient> gradients;  // filled when TrainingHooks::keep_gradients
  Vec round_avg;                          // ditto
  std::vector<SampleTrace> traces;        // filled when TrainingHooks::keep_traces
  std::vector<UserId> filtered;
  double update_norm = 0.0;
};

struct TrainingHooks {
  const DetectorModel* detector = nullptr;
  bool keep_gradients = false;
  bool keep_traces = false;
  // Called after aggregation, before the server step; `snapshot` is the
  // model the clients computed against.
  std::function<void(const RoundRecord&, const ModelParams& snapshot)> on_round;
  std::function<void(const EpochMetrics&, const ModelParams&)> on_epoch;
};

// One epoch: a seeded permutation of all clients cut into consecutive
// chunks of `clients_per_round`; the last chunk may be smaller.
std::vector<std::vector<UserId>> sample_rounds(const ClientRegistry& registry, std::int32_t clients_per_round,
                                               Rng& rng);

// Densifies every gradient and applies the (already resolved) rule.
Vec aggregate_round(std::span<const SparseGradient> gradients, const AggregationRule& rule,
                    const ParamLayout& layout);

MetricsTimeline run_training(const SimulationConfig& config, const ClientRegistry& registry,
                             const InteractionLog& log, const TrainingHooks& hooks = {});

}  // namespace fedattack
