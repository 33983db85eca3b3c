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
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedattack/common.hpp"
#include "fedattack/dataset.hpp"
#include "fedattack/model.hpp"
#include "fedattack/rng.hpp"

namespace fedattack {

enum class AttackKind { None, FedAttack, LabelFlip, Gaussian, Lie, StatOpt, DynOpt };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view text);

struct AttackStrategy {
  AttackKind kind = AttackKind::None;
  double pool_fraction = 1.0;
  double lambda = 1.0;
  double gamma_init = 10.0;
  double gamma_step = 0.01;
  std::optional<double> z_override;

  // Gaussian, LIE, STAT-OPT and DYN-OPT consume per-round statistics.
  bool needs_stats() const noexcept;
  void validate() const;

  bool operator==(const AttackStrategy&) const = default;
};

// Items the attacker knows about. Sorted, fixed for the whole run.
struct CandidatePool {
  std::vector<ItemId> item_ids;

  static CandidatePool full(std::int32_t num_items);
  // Seeded uniform subset of size round(fraction * num_items), at least 1.
  static CandidatePool sample(std::int32_t num_items, double fraction, std::uint64_t seed);
};

// Optional record of the (positive, negative) pairs a local update used.
struct SampleTrace {
  UserId client = 0;
  Role role = Role::Benign;
  std::vector<ItemPair> pairs;
};

// Inner-product retrieval over the candidate pool. Brute force is exact;
// an approximate index can be swapped in behind this interface.
class HardSampleIndex {
 public:
  virtual ~HardSampleIndex() = default;
  // Top-k pool items by <user, item> (most_similar) or bottom-k
  // (least_similar), skipping `exclude` (sorted). Ties go to the smaller id.
  virtual std::vector<ItemId> most_similar(std::span<const double> user, std::size_t k,
                                           std::span<const ItemId> exclude) const = 0;
  virtual std::vector<ItemId> least_similar(std::span<const double> user, std::size_t k,
                                            std::span<const ItemId> exclude) const = 0;
};

class BruteForceIndex final : public HardSampleIndex {
 public:
  BruteForceIndex(const ModelParams& params, const CandidatePool& pool) : params_(params), pool_(pool) {}

  std::vector<ItemId> most_similar(std::span<const double> user, std::size_t k,
                                   std::span<const ItemId> exclude) const override;
  std::vector<ItemId> least_similar(std::span<const double> user, std::size_t k,
                                    std::span<const ItemId> exclude) const override;

 private:
  std::vector<ItemId> select(std::span<const double> user, std::size_t k, std::span<const ItemId> exclude,
                             bool largest) const;

  const ModelParams& params_;
  const CandidatePool& pool_;
};

std::vector<ItemId> hardest_negatives(const ModelParams& params, std::span<const double> user, std::size_t k,
                                      const CandidatePool& pool, std::span<const ItemId> exclude);
std::vector<ItemId> hardest_pseudo_positives(const ModelParams& params, std::span<const double> user,
                                             std::size_t k, const CandidatePool& pool,
                                             std::span<const ItemId> exclude);

// Benign local step: K positives drawn without replacement from the
// profile, K negatives drawn uniformly from items outside the profile.
std::vector<ItemPair> sample_benign_pairs(const ClientProfile& client, std::int32_t num_items, Rng& rng);

SparseGradient local_update_benign(const ClientProfile& client, const ModelParams& params, UserModelKind user_kind,
                                   Rng& rng, SampleTrace* trace = nullptr);

SparseGradient fedattack_update(const ClientProfile& client, const ModelParams& params, const CandidatePool& pool,
                                UserModelKind user_kind, Rng& rng, SampleTrace* trace = nullptr);

SparseGradient label_flip_update(const ClientProfile& client, const ModelParams& params, UserModelKind user_kind,
                                 Rng& rng, SampleTrace* trace = nullptr);

// Attacker-side estimate of benign update statistics, built only from
// benign-style gradients that the Byzantine clients compute themselves.
struct BenignStatEstimate {
  Vec mean;
  Vec std;
  std::int32_t n_visible = 0;
  bool degenerate = false;  // fewer than 2 samples; std forced to 0
};

BenignStatEstimate estimate_from_updates(std::span<const Vec> dense_updates);

// `rngs[i]` drives the benign-style sampling for `byz_clients[i]`.
// Also returns the densified benign-style gradients for reuse by callers.
BenignStatEstimate estimate_benign_stats(std::span<const ClientProfile* const> byz_clients, const ModelParams& params,
                                         UserModelKind user_kind, std::span<Rng> rngs,
                                         std::vector<Vec>* benign_style = nullptr);

SparseGradient gaussian_update(const ClientProfile& client, const ModelParams& params,
                               const BenignStatEstimate& stats, UserModelKind user_kind, Rng& rng);

// Standard-normal quantile used by the LIE coefficient.
double normal_quantile(double p);

// z from the order-statistic rule of "a little is enough", clamped at 0.
double lie_coefficient(int round_size, int byzantine_in_round);

Vec lie_update(const BenignStatEstimate& stats, int round_size, int byzantine_in_round,
               std::optional<double> z_override);

Vec stat_opt_update(const BenignStatEstimate& stats, double lambda);

// Largest grid value in {init, init/2, ...} (>= step) accepted by the
// predicate; `step` when none is.
double halving_search(double gamma_init, double gamma_step, const std::function<bool(double)>& survives);

// `benign_style` are the attacker's own benign-style gradients; the probe
// runs Krum over them plus `byzantine_in_round` copies of the candidate.
Vec dyn_opt_update(const BenignStatEstimate& stats, std::span<const Vec> benign_style, int byzantine_in_round,
                   double gamma_init, double gamma_step);

}  // namespace fedattack
