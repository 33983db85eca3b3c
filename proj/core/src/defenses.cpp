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

#include "fedattack/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fedattack {

namespace {

std::size_t check_shapes(UpdateSet updates, std::string_view op) {
  if (updates.empty()) throw PreconditionError(std::string(op) + ": no updates");
  const std::size_t dim = updates.front().size();
  for (const Vec& u : updates) {
    if (u.size() != dim) throw PreconditionError(std::string(op) + ": updates differ in length");
  }
  return dim;
}

double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

using DistanceMatrix = std::vector<std::vector<double>>;

DistanceMatrix pairwise(UpdateSet updates) {
  const std::size_t n = updates.size();
  DistanceMatrix dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = squared_distance(updates[i], updates[j]);
  }
  return dist;
}

// Krum over the subset `alive` (indices into the distance matrix).
std::size_t krum_on(const DistanceMatrix& dist, const std::vector<std::size_t>& alive, int f) {
  const long n = static_cast<long>(alive.size());
  const long neighbours = n - f - 2;
  if (f < 0 || neighbours < 1) {
    throw ConfigError("Krum needs n - f - 2 >= 1 (n=" + std::to_string(n) + ", f=" + std::to_string(f) + ")");
  }
  std::size_t best = alive.front();
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> row;
  for (std::size_t i : alive) {
    row.clear();
    for (std::size_t j : alive)
      if (j != i) row.push_back(dist[i][j]);
    std::partial_sort(row.begin(), row.begin() + neighbours, row.end());
    const double s = std::accumulate(row.begin(), row.begin() + neighbours, 0.0);
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::Mean: return "mean";
    case DefenseKind::Median: return "median";
    case DefenseKind::TrimmedMean: return "trimmed_mean";
    case DefenseKind::Krum: return "krum";
    case DefenseKind::MultiKrum: return "multi_krum";
    case DefenseKind::NormBound: return "norm_bound";
  }
  return "unknown";
}

DefenseKind parse_defense_kind(std::string_view text) {
  for (DefenseKind k : {DefenseKind::Mean, DefenseKind::Median, DefenseKind::TrimmedMean, DefenseKind::Krum,
                        DefenseKind::MultiKrum, DefenseKind::NormBound}) {
    if (text == to_string(k)) return k;
  }
  if (text == "none") return DefenseKind::Mean;
  throw ConfigError("unknown defense kind '" + std::string(text) + "'");
}

AggregationRule resolve_rule(const AggregationRule& rule, std::size_t n, double byzantine_ratio) {
  AggregationRule r = rule;
  const int count = static_cast<int>(n);
  if (r.f < 0) r.f = std::max(1, static_cast<int>(std::lround(byzantine_ratio * count)));
  if (r.beta < 0) r.beta = r.f;
  r.beta = std::max(0, std::min(r.beta, (count - 1) / 2));
  r.f = std::max(0, std::min(r.f, count - 3));
  if (r.m_select < 0) r.m_select = count - r.f;
  // Multi-Krum keeps at least 3 candidates alive for its last pick.
  r.m_select = std::max(1, std::min(r.m_select, count - r.f - 2));
  if ((r.kind == DefenseKind::Krum || r.kind == DefenseKind::MultiKrum) && count <= 2) r.kind = DefenseKind::Median;
  return r;
}

Vec agg_mean(UpdateSet updates) {
  const std::size_t dim = check_shapes(updates, "agg_mean");
  Vec out(dim, 0.0);
  for (const Vec& u : updates)
    for (std::size_t k = 0; k < dim; ++k) out[k] += u[k];
  const double inv = 1.0 / static_cast<double>(updates.size());
  for (double& v : out) v *= inv;
  return out;
}

Vec agg_median(UpdateSet updates) {
  const std::size_t dim = check_shapes(updates, "agg_median");
  const std::size_t n = updates.size();
  Vec out(dim);
  Vec column(n);
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = updates[i][k];
    std::sort(column.begin(), column.end());
    out[k] = n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return out;
}

Vec agg_trimmed_mean(UpdateSet updates, int beta) {
  const std::size_t dim = check_shapes(updates, "agg_trimmed_mean");
  const std::size_t n = updates.size();
  if (beta < 0 || 2 * static_cast<std::size_t>(beta) >= n) {
    throw ConfigError("trimmed mean needs n > 2*beta (n=" + std::to_string(n) + ", beta=" + std::to_string(beta) + ")");
  }
  const std::size_t b = static_cast<std::size_t>(beta);
  const auto kept = static_cast<double>(n - 2 * b);
  Vec out(dim);
  Vec column(n);
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = updates[i][k];
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (std::size_t i = b; i < n - b; ++i) s += column[i];
    out[k] = s / kept;
  }
  return out;
}

std::size_t krum_select(UpdateSet updates, int f) {
  check_shapes(updates, "krum");
  std::vector<std::size_t> alive(updates.size());
  std::iota(alive.begin(), alive.end(), 0);
  return krum_on(pairwise(updates), alive, f);
}

Vec agg_krum(UpdateSet updates, int f) { return updates[krum_select(updates, f)]; }

std::vector<std::size_t> multi_krum_select(UpdateSet updates, int f, int m_select) {
  check_shapes(updates, "multi_krum");
  if (m_select < 1 || static_cast<std::size_t>(m_select) > updates.size()) {
    throw ConfigError("multi-Krum needs 1 <= m_select <= n");
  }
  const DistanceMatrix dist = pairwise(updates);
  std::vector<std::size_t> alive(updates.size());
  std::iota(alive.begin(), alive.end(), 0);
  std::vector<std::size_t> picked;
  for (int iteration = 0; iteration < m_select; ++iteration) {
    std::size_t winner = 0;
    try {
      winner = krum_on(dist, alive, f);
    } catch (const ConfigError& e) {
      // The last survivor needs no scoring: select-all degenerates to the mean.
      if (alive.size() + picked.size() == updates.size() && static_cast<std::size_t>(m_select) == updates.size()) {
        picked.insert(picked.end(), alive.begin(), alive.end());
        return picked;
      }
      throw ConfigError("multi-Krum iteration " + std::to_string(iteration) + ": " + e.what());
    }
    picked.push_back(winner);
    alive.erase(std::find(alive.begin(), alive.end(), winner));
  }
  return picked;
}

Vec agg_multi_krum(UpdateSet updates, int f, int m_select) {
  const auto picked = multi_krum_select(updates, f, m_select);
  std::vector<Vec> chosen;
  chosen.reserve(picked.size());
  for (std::size_t i : picked) chosen.push_back(updates[i]);
  return agg_mean(chosen);
}

Vec agg_norm_bound(UpdateSet updates, double tau) {
  const std::size_t dim = check_shapes(updates, "agg_norm_bound");
  if (!(tau > 0.0)) throw ConfigError("norm bound tau must be positive");
  Vec out(dim, 0.0);
  for (const Vec& u : updates) {
    double sq = 0.0;
    for (double v : u) sq += v * v;
    const double norm = std::sqrt(sq);
    const double scale = norm > tau ? tau / norm : 1.0;
    for (std::size_t k = 0; k < dim; ++k) out[k] += scale * u[k];
  }
  const double inv = 1.0 / static_cast<double>(updates.size());
  for (double& v : out) v *= inv;
  return out;
}

Vec aggregate(UpdateSet updates, const AggregationRule& rule) {
  switch (rule.kind) {
    case DefenseKind::Mean: return agg_mean(updates);
    case DefenseKind::Median: return agg_median(updates);
    case DefenseKind::TrimmedMean: return agg_trimmed_mean(updates, rule.beta);
    case DefenseKind::Krum: return agg_krum(updates, rule.f);
    case DefenseKind::MultiKrum: return agg_multi_krum(updates, rule.f, rule.m_select);
    case DefenseKind::NormBound: return agg_norm_bound(updates, rule.tau);
  }
  throw ConfigError("unhandled defense kind");
}

}  // namespace fedattack
