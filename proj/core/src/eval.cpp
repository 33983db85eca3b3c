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

#include "fedattack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedattack/parallel.hpp"
#include "fedattack/rng.hpp"

namespace fedattack {

RankingResult rank_from_scores(std::span<const double> scores, ItemId target, std::span<const char> excluded) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) throw PreconditionError("target out of range");
  RankingResult r;
  const double t = scores[static_cast<std::size_t>(target)];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (static_cast<ItemId>(i) == target) continue;
    if (!excluded.empty() && excluded[i]) continue;
    ++r.candidates;
    if (scores[i] > t) {
      ++r.higher;
    } else if (scores[i] == t) {
      ++r.ties;
    }
  }
  ++r.candidates;
  r.rank = 1 + r.higher + r.ties / 2;
  return r;
}

RankingResult rank_test_item(const ModelParams& params, const ClientProfile& client, const EvalOptions& options) {
  const Vec u = user_embed(params, client, options.user_kind);
  const Vec scores = score_all(params, u);
  const bool test = options.target == EvalTarget::Test;
  const ItemId target = test ? client.test_item : client.val_item;
  std::vector<char> excluded;
  if (options.exclude_seen) {
    excluded.assign(scores.size(), 0);
    for (ItemId i : client.train_items) excluded[static_cast<std::size_t>(i)] = 1;
    excluded[static_cast<std::size_t>(test ? client.val_item : client.test_item)] = 1;
  }
  RankingResult r = rank_from_scores(scores, target, excluded);
  r.client = client.user_id;
  return r;
}

double hr_at_k(int rank, int k) {
  if (rank < 1 || k < 1) throw PreconditionError("hr_at_k needs rank >= 1 and k >= 1");
  return rank <= k ? 1.0 : 0.0;
}

double ndcg_at_k(int rank, int k) {
  if (rank < 1 || k < 1) throw PreconditionError("ndcg_at_k needs rank >= 1 and k >= 1");
  return rank <= k ? static_cast<double>(1.0L / std::log2(static_cast<long double>(rank) + 1.0L)) : 0.0;
}

EpochEval evaluate_epoch(const ModelParams& params, const ClientRegistry& registry, const EvalOptions& options) {
  std::vector<const ClientProfile*> benign;
  for (const auto& c : registry.clients)
    if (!c.is_byzantine()) benign.push_back(&c);
  if (benign.empty()) throw PreconditionError("evaluation needs at least one benign client");

  std::vector<int> ranks(benign.size());
  parallel_for(benign.size(), options.threads,
               [&](std::size_t i) { ranks[i] = rank_test_item(params, *benign[i], options).rank; });

  EpochEval out;
  out.clients = benign.size();
  for (int r : ranks) {
    out.hr += hr_at_k(r, options.k);
    out.ndcg += ndcg_at_k(r, options.k);
  }
  out.hr /= static_cast<double>(benign.size());
  out.ndcg /= static_cast<double>(benign.size());
  return out;
}

MomentStats HardnessProfile::overall(Role role, bool negative) const {
  const auto r = static_cast<std::size_t>(role);
  const std::size_t pol = negative ? 1 : 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& b : buckets) {
    const MomentStats& s = b.stats[r][pol];
    sum += s.mean * static_cast<double>(s.n);
    sum_sq += (s.std * s.std + s.mean * s.mean) * static_cast<double>(s.n);
    n += s.n;
  }
  MomentStats out;
  out.n = n;
  if (n > 0) {
    out.mean = sum / static_cast<double>(n);
    out.std = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - out.mean * out.mean));
  }
  return out;
}

std::vector<std::int32_t> default_hardness_edges() { return {1, 5, 10, 20, 50, 100, 200}; }

HardnessAccumulator::HardnessAccumulator(std::vector<std::int32_t> edges) : edges_(std::move(edges)) {
  if (edges_.empty() || !std::is_sorted(edges_.begin(), edges_.end())) {
    throw ConfigError("hardness bucket edges must be non-empty and ascending");
  }
  moments_.resize(edges_.size());
}

std::size_t HardnessAccumulator::bucket_of(std::size_t length) const {
  std::size_t b = 0;
  while (b + 1 < edges_.size() && static_cast<std::int64_t>(length) >= edges_[b + 1]) ++b;
  return b;
}

void HardnessAccumulator::add(const ModelParams& params, const ClientRegistry& registry,
                              std::span<const SampleTrace> traces, UserModelKind user_kind) {
  for (const SampleTrace& trace : traces) {
    const ClientProfile& client = registry.clients.at(static_cast<std::size_t>(trace.client));
    const Vec u = user_embed(params, client, user_kind);
    auto& cell = moments_[bucket_of(client.train_items.size())][static_cast<std::size_t>(client.role)];
    auto add_sim = [&](Moments& m, ItemId item) {
      const auto row = params.item_row(item);
      double s = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) s += u[k] * row[k];
      m.sum += s;
      m.sum_sq += s * s;
      ++m.n;
    };
    for (const ItemPair& p : trace.pairs) {
      add_sim(cell[0], p.positive);
      add_sim(cell[1], p.negative);
    }
  }
}

HardnessProfile HardnessAccumulator::finish() const {
  HardnessProfile profile;
  for (std::size_t b = 0; b < edges_.size(); ++b) {
    HardnessBucket bucket;
    bucket.lower = edges_[b];
    bucket.upper = b + 1 < edges_.size() ? edges_[b + 1] : -1;
    for (std::size_t role = 0; role < 2; ++role) {
      for (std::size_t pol = 0; pol < 2; ++pol) {
        const Moments& m = moments_[b][role][pol];
        MomentStats& s = bucket.stats[role][pol];
        s.n = m.n;
        if (m.n == 0) continue;
        s.mean = m.sum / static_cast<double>(m.n);
        s.std = std::sqrt(std::max(0.0, m.sum_sq / static_cast<double>(m.n) - s.mean * s.mean));
      }
    }
    profile.buckets.push_back(bucket);
  }
  return profile;
}

HardnessProfile hardness_profile(const ModelParams& params, const ClientRegistry& registry,
                                 std::span<const SampleTrace> traces, UserModelKind user_kind,
                                 std::vector<std::int32_t> edges) {
  HardnessAccumulator acc(std::move(edges));
  acc.add(params, registry, traces, user_kind);
  return acc.finish();
}

namespace {

void mat_vec(std::span<const double> a, std::size_t n, const Vec& v, Vec& out) {
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += a[r * n + c] * v[c];
    out[r] = s;
  }
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

EigenPairs top_eigenpairs(std::span<const double> matrix, std::size_t size, std::size_t count,
                          const PcaOptions& options) {
  if (matrix.size() != size * size) throw PreconditionError("top_eigenpairs: matrix is not square");
  Vec a(matrix.begin(), matrix.end());
  EigenPairs out;
  Rng rng(derive_seed(options.seed, {0xe16e}));
  std::normal_distribution<double> unit(0.0, 1.0);
  Vec w(size);

  auto orthogonalize = [&](Vec& v) {
    for (const Vec& prev : out.vectors) {
      double proj = 0.0;
      for (std::size_t k = 0; k < size; ++k) proj += prev[k] * v[k];
      for (std::size_t k = 0; k < size; ++k) v[k] -= proj * prev[k];
    }
  };

  for (std::size_t e = 0; e < std::min(count, size); ++e) {
    Vec v(size);
    for (double& x : v) x = unit(rng);
    orthogonalize(v);
    double nv = norm(v);
    for (double& x : v) x /= nv;

    for (int it = 0; it < options.max_iterations; ++it) {
      mat_vec(a, size, v, w);
      orthogonalize(w);
      const double nw = norm(w);
      if (nw == 0.0) break;  // v spans the null space
      double diff = 0.0;
      double flipped = 0.0;
      for (std::size_t k = 0; k < size; ++k) {
        const double next = w[k] / nw;
        diff += (next - v[k]) * (next - v[k]);
        flipped += (next + v[k]) * (next + v[k]);
        v[k] = next;
      }
      if (std::sqrt(std::min(diff, flipped)) < options.tolerance) break;
    }

    mat_vec(a, size, v, w);
    double lambda = 0.0;
    for (std::size_t k = 0; k < size; ++k) lambda += v[k] * w[k];
    lambda = std::max(lambda, 0.0);
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) a[r * size + c] -= lambda * v[r] * v[c];
    out.values.push_back(lambda);
    out.vectors.push_back(std::move(v));
  }
  return out;
}

PcaProjection pca_project(std::span<const GradientFeatures> rows, const PcaOptions& options) {
  if (rows.size() < 3) throw PreconditionError("PCA needs at least 3 rows");
  const std::size_t f = rows.front().values.size();
  if (f < 2) throw PreconditionError("PCA needs at least 2 features");
  for (const auto& r : rows)
    if (r.values.size() != f) throw PreconditionError("PCA rows differ in dimension");

  const std::size_t n = rows.size();
  Vec mean(f, 0.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < f; ++k) mean[k] += r.values[k];
  for (double& m : mean) m /= static_cast<double>(n);

  Vec cov(f * f, 0.0);
  Vec centred(f);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < f; ++k) centred[k] = r.values[k] - mean[k];
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = i; j < f; ++j) cov[i * f + j] += centred[i] * centred[j];
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = i; j < f; ++j) {
      cov[i * f + j] /= static_cast<double>(n - 1);
      cov[j * f + i] = cov[i * f + j];
    }
    trace += cov[i * f + i];
  }

  EigenPairs eig = top_eigenpairs(cov, f, 2, options);
  PcaProjection out;
  for (std::size_t e = 0; e < 2; ++e) {
    out.eigenvalues[e] = eig.values[e];
    out.explained[e] = trace > 0.0 ? eig.values[e] / trace : 0.0;
  }
  out.components = std::move(eig.vectors);
  out.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < 2; ++e) {
      double s = 0.0;
      for (std::size_t k = 0; k < f; ++k) s += (rows[i].values[k] - mean[k]) * out.components[e][k];
      out.coords[i][e] = s;
    }
  }
  return out;
}

}  // namespace fedattack
