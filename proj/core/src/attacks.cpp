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

#include "fedattack/attacks.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <string>

#include "fedattack/defenses.hpp"

namespace fedattack {

namespace {

bool excluded(std::span<const ItemId> exclude, ItemId item) {
  return std::binary_search(exclude.begin(), exclude.end(), item);
}

std::size_t exclusive_pool_size(const CandidatePool& pool, std::span<const ItemId> exclude) {
  return static_cast<std::size_t>(std::count_if(pool.item_ids.begin(), pool.item_ids.end(),
                                                [&](ItemId i) { return !excluded(exclude, i); }));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void record(SampleTrace* trace, const ClientProfile& client, const std::vector<ItemPair>& pairs) {
  if (trace == nullptr) return;
  trace->client = client.user_id;
  trace->role = client.role;
  trace->pairs = pairs;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::FedAttack: return "fedattack";
    case AttackKind::LabelFlip: return "label_flip";
    case AttackKind::Gaussian: return "gaussian";
    case AttackKind::Lie: return "lie";
    case AttackKind::StatOpt: return "stat_opt";
    case AttackKind::DynOpt: return "dyn_opt";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view text) {
  for (AttackKind k : {AttackKind::None, AttackKind::FedAttack, AttackKind::LabelFlip, AttackKind::Gaussian,
                       AttackKind::Lie, AttackKind::StatOpt, AttackKind::DynOpt}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown attack kind '" + std::string(text) + "'");
}

bool AttackStrategy::needs_stats() const noexcept {
  return kind == AttackKind::Gaussian || kind == AttackKind::Lie || kind == AttackKind::StatOpt ||
         kind == AttackKind::DynOpt;
}

void AttackStrategy::validate() const {
  if (!(pool_fraction > 0.0) || pool_fraction > 1.0) throw ConfigError("attack.pool_fraction must lie in (0, 1]");
  if (!(lambda > 0.0)) throw ConfigError("attack.lambda must be positive");
  if (!(gamma_init > 0.0) || !(gamma_step > 0.0) || gamma_step > gamma_init) {
    throw ConfigError("attack.gamma_init and attack.gamma_step must satisfy 0 < step <= init");
  }
}

CandidatePool CandidatePool::full(std::int32_t num_items) {
  CandidatePool pool;
  pool.item_ids.resize(static_cast<std::size_t>(num_items));
  std::iota(pool.item_ids.begin(), pool.item_ids.end(), 0);
  return pool;
}

CandidatePool CandidatePool::sample(std::int32_t num_items, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("pool fraction must lie in (0, 1]");
  CandidatePool pool = full(num_items);
  if (fraction >= 1.0) return pool;
  const auto size = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * num_items)));
  Rng rng(derive_seed(seed, {0x9001}));
  std::shuffle(pool.item_ids.begin(), pool.item_ids.end(), rng);
  pool.item_ids.resize(size);
  std::sort(pool.item_ids.begin(), pool.item_ids.end());
  return pool;
}

std::vector<ItemId> BruteForceIndex::select(std::span<const double> user, std::size_t k,
                                            std::span<const ItemId> exclude, bool largest) const {
  struct Scored {
    double score;
    ItemId item;
  };
  std::vector<Scored> candidates;
  candidates.reserve(pool_.item_ids.size());
  for (ItemId item : pool_.item_ids) {
    if (!excluded(exclude, item)) candidates.push_back({dot(user, params_.item_row(item)), item});
  }
  if (candidates.size() < k) {
    throw AttackSetupError("candidate pool has " + std::to_string(candidates.size()) +
                           " items after exclusion, need " + std::to_string(k));
  }
  auto before = [largest](const Scored& a, const Scored& b) {
    if (a.score != b.score) return largest ? a.score > b.score : a.score < b.score;
    return a.item < b.item;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                    before);
  std::vector<ItemId> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = candidates[i].item;
  return out;
}

std::vector<ItemId> BruteForceIndex::most_similar(std::span<const double> user, std::size_t k,
                                                  std::span<const ItemId> exclude) const {
  return select(user, k, exclude, true);
}

std::vector<ItemId> BruteForceIndex::least_similar(std::span<const double> user, std::size_t k,
                                                   std::span<const ItemId> exclude) const {
  return select(user, k, exclude, false);
}

std::vector<ItemId> hardest_negatives(const ModelParams& params, std::span<const double> user, std::size_t k,
                                      const CandidatePool& pool, std::span<const ItemId> exclude) {
  return BruteForceIndex(params, pool).most_similar(user, k, exclude);
}

std::vector<ItemId> hardest_pseudo_positives(const ModelParams& params, std::span<const double> user,
                                             std::size_t k, const CandidatePool& pool,
                                             std::span<const ItemId> exclude) {
  return BruteForceIndex(params, pool).least_similar(user, k, exclude);
}

std::vector<ItemPair> sample_benign_pairs(const ClientProfile& client, std::int32_t num_items, Rng& rng) {
  const std::size_t profile_size = client.train_items.size();
  if (profile_size == 0) throw PreconditionError("client has an empty profile");
  const std::size_t k = static_cast<std::size_t>(std::clamp<std::int32_t>(client.k_positives, 1,
                                                                          static_cast<std::int32_t>(profile_size)));

  // Partial Fisher-Yates over profile positions.
  std::vector<std::size_t> positions(profile_size);
  std::iota(positions.begin(), positions.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, profile_size - 1);
    std::swap(positions[i], positions[pick(rng)]);
  }
  std::vector<ItemId> positives;
  positives.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const ItemId item = client.train_items[positions[i]];
    if (std::find(positives.begin(), positives.end(), item) == positives.end()) positives.push_back(item);
  }

  std::vector<ItemId> profile(client.train_items);
  std::sort(profile.begin(), profile.end());
  profile.erase(std::unique(profile.begin(), profile.end()), profile.end());
  if (static_cast<std::size_t>(num_items) <= profile.size()) {
    throw SamplingError("no negative items left for client " + std::to_string(client.user_id));
  }
  std::uniform_int_distribution<ItemId> any_item(0, num_items - 1);
  std::vector<ItemPair> pairs;
  pairs.reserve(positives.size());
  for (ItemId pos : positives) {
    ItemId neg = 0;
    do {
      neg = any_item(rng);
    } while (std::binary_search(profile.begin(), profile.end(), neg));
    pairs.push_back({pos, neg});
  }
  return pairs;
}

SparseGradient local_update_benign(const ClientProfile& client, const ModelParams& params, UserModelKind user_kind,
                                   Rng& rng, SampleTrace* trace) {
  const auto pairs = sample_benign_pairs(client, params.layout.num_items, rng);
  record(trace, client, pairs);
  return bpr_gradients(params, client, pairs, user_kind);
}

SparseGradient fedattack_update(const ClientProfile& client, const ModelParams& params, const CandidatePool& pool,
                                UserModelKind user_kind, Rng& rng, SampleTrace* trace) {
  const std::size_t k = static_cast<std::size_t>(std::max(client.k_positives, 1));
  const std::vector<ItemId> exclude = client.known_items();
  if (exclusive_pool_size(pool, exclude) < 2 * k) {
    throw AttackSetupError("candidate pool too small for " + std::to_string(k) +
                           " disjoint hard negatives and pseudo-positives");
  }
  const Vec u = user_embed(params, client, user_kind);
  const BruteForceIndex index(params, pool);
  const std::vector<ItemId> negatives = index.most_similar(u, k, exclude);
  std::vector<ItemId> positives = index.least_similar(u, k, exclude);
  std::shuffle(positives.begin(), positives.end(), rng);

  std::vector<ItemPair> pairs(k);
  for (std::size_t i = 0; i < k; ++i) pairs[i] = {positives[i], negatives[i]};
  record(trace, client, pairs);
  return bpr_gradients(params, client, pairs, user_kind);
}

SparseGradient label_flip_update(const ClientProfile& client, const ModelParams& params, UserModelKind user_kind,
                                 Rng& rng, SampleTrace* trace) {
  auto pairs = sample_benign_pairs(client, params.layout.num_items, rng);
  for (ItemPair& p : pairs) std::swap(p.positive, p.negative);
  record(trace, client, pairs);
  return bpr_gradients(params, client, pairs, user_kind);
}

BenignStatEstimate estimate_from_updates(std::span<const Vec> dense_updates) {
  if (dense_updates.empty()) throw PreconditionError("benign statistics need at least one update");
  const std::size_t dim = dense_updates.front().size();
  const std::size_t n = dense_updates.size();
  BenignStatEstimate stats;
  stats.n_visible = static_cast<std::int32_t>(n);
  stats.mean.assign(dim, 0.0);
  stats.std.assign(dim, 0.0);
  for (const Vec& g : dense_updates)
    for (std::size_t k = 0; k < dim; ++k) stats.mean[k] += g[k];
  for (double& v : stats.mean) v /= static_cast<double>(n);
  if (n < 2) {
    stats.degenerate = true;
    return stats;
  }
  for (const Vec& g : dense_updates) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = g[k] - stats.mean[k];
      stats.std[k] += diff * diff;
    }
  }
  for (double& v : stats.std) v = std::sqrt(v / static_cast<double>(n - 1));
  return stats;
}

BenignStatEstimate estimate_benign_stats(std::span<const ClientProfile* const> byz_clients, const ModelParams& params,
                                         UserModelKind user_kind, std::span<Rng> rngs, std::vector<Vec>* benign_style) {
  if (rngs.size() != byz_clients.size()) throw PreconditionError("one rng per Byzantine client required");
  std::vector<Vec> dense;
  dense.reserve(byz_clients.size());
  for (std::size_t i = 0; i < byz_clients.size(); ++i) {
    dense.push_back(local_update_benign(*byz_clients[i], params, user_kind, rngs[i]).densify(params.layout));
  }
  BenignStatEstimate stats = estimate_from_updates(dense);
  if (benign_style != nullptr) *benign_style = std::move(dense);
  return stats;
}

SparseGradient gaussian_update(const ClientProfile& client, const ModelParams& params,
                               const BenignStatEstimate& stats, UserModelKind user_kind, Rng& rng) {
  const ParamLayout& layout = params.layout;
  if (stats.mean.size() != layout.total_size() || stats.std.size() != layout.total_size()) {
    throw PreconditionError("Gaussian attack: benign statistics unavailable");
  }
  SparseGradient g = local_update_benign(client, params, user_kind, rng);
  std::normal_distribution<double> unit(0.0, 1.0);
  auto redraw = [&](Vec& row, std::size_t offset) {
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = stats.mean[offset + k] + stats.std[offset + k] * unit(rng);
  };
  for (auto& [id, row] : g.user_rows) redraw(row, layout.user_offset(id));
  for (auto& [id, row] : g.item_rows) redraw(row, layout.item_offset(id));
  redraw(g.predictor_grad, layout.predictor_offset());
  return g;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw PreconditionError("normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double lie_coefficient(int round_size, int byzantine_in_round) {
  const int n = round_size;
  const int m = byzantine_in_round;
  if (m < 1 || n <= m) throw PreconditionError("LIE needs 1 <= m < n");
  const int s = n / 2 + 1 - m;
  const int numerator = n - m - s;
  if (numerator <= 0 || numerator >= n - m) {
    throw ConfigError("LIE coefficient undefined for n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                      "; set attack.z_override");
  }
  return std::max(0.0, normal_quantile(static_cast<double>(numerator) / static_cast<double>(n - m)));
}

Vec lie_update(const BenignStatEstimate& stats, int round_size, int byzantine_in_round,
               std::optional<double> z_override) {
  const double z = z_override ? *z_override : lie_coefficient(round_size, byzantine_in_round);
  Vec out(stats.mean.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = stats.mean[k] + z * stats.std[k];
  return out;
}

Vec stat_opt_update(const BenignStatEstimate& stats, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("STAT-OPT lambda must be positive");
  Vec out(stats.mean.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double m = stats.mean[k];
    const double sign = m > 0.0 ? 1.0 : (m < 0.0 ? -1.0 : 0.0);
    out[k] = m - lambda * sign;
  }
  return out;
}

double halving_search(double gamma_init, double gamma_step, const std::function<bool(double)>& survives) {
  for (double gamma = gamma_init; gamma >= gamma_step; gamma *= 0.5) {
    if (survives(gamma)) return gamma;
  }
  return gamma_step;
}

Vec dyn_opt_update(const BenignStatEstimate& stats, std::span<const Vec> benign_style, int byzantine_in_round,
                   double gamma_init, double gamma_step) {
  double norm_sq = 0.0;
  for (double v : stats.mean) norm_sq += v * v;
  if (norm_sq == 0.0) return stat_opt_update(stats, gamma_init);
  const double norm = std::sqrt(norm_sq);
  const std::size_t dim = stats.mean.size();

  auto candidate = [&](double gamma) {
    Vec out(dim);
    for (std::size_t k = 0; k < dim; ++k) out[k] = stats.mean[k] - gamma * stats.mean[k] / norm;
    return out;
  };

  const int copies = std::max(byzantine_in_round, 1);
  auto survives = [&](double gamma) {
    std::vector<Vec> probe(benign_style.begin(), benign_style.end());
    const Vec c = candidate(gamma);
    for (int i = 0; i < copies; ++i) probe.push_back(c);
    const int n = static_cast<int>(probe.size());
    if (n < 3) return false;
    const int f = std::min(copies, n - 3);
    return krum_select(probe, f) >= benign_style.size();
  };
  return candidate(halving_search(gamma_init, gamma_step, survives));
}

}  // namespace fedattack
