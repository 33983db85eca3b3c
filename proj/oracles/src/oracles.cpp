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

#include "fedattack/oracles/oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedattack::oracles {

namespace {

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Vector column(const Matrix& rows, std::size_t c) {
  Vector out;
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

std::vector<std::int32_t> ranked_candidates(const Matrix& item_rows, const Vector& user,
                                            const std::vector<std::int32_t>& pool,
                                            const std::vector<std::int32_t>& excluded, bool descending) {
  std::vector<std::pair<double, std::int32_t>> scored;
  for (std::int32_t id : pool) {
    if (std::find(excluded.begin(), excluded.end(), id) != excluded.end()) continue;
    scored.emplace_back(dot(item_rows[static_cast<std::size_t>(id)], user), id);
  }
  std::sort(scored.begin(), scored.end(), [descending](const auto& a, const auto& b) {
    if (a.first != b.first) return descending ? a.first > b.first : a.first < b.first;
    return a.second < b.second;
  });
  std::vector<std::int32_t> ids;
  for (const auto& s : scored) ids.push_back(s.second);
  return ids;
}

}  // namespace

std::vector<std::size_t> argsort_desc(const Vector& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

std::vector<std::int32_t> top_k_by_score(const Matrix& item_rows, const Vector& user,
                                         const std::vector<std::int32_t>& pool,
                                         const std::vector<std::int32_t>& excluded, std::size_t k) {
  auto ids = ranked_candidates(item_rows, user, pool, excluded, true);
  if (ids.size() > k) ids.resize(k);
  return ids;
}

std::vector<std::int32_t> bottom_k_by_score(const Matrix& item_rows, const Vector& user,
                                            const std::vector<std::int32_t>& pool,
                                            const std::vector<std::int32_t>& excluded, std::size_t k) {
  auto ids = ranked_candidates(item_rows, user, pool, excluded, false);
  if (ids.size() > k) ids.resize(k);
  return ids;
}

int rank_by_sort(const Vector& scores, std::size_t target, const std::vector<bool>& excluded) {
  std::vector<double> others;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i != target && !excluded[i]) others.push_back(scores[i]);
  }
  std::sort(others.begin(), others.end(), std::greater<>());
  const double t = scores[target];
  const auto at_least = std::upper_bound(others.begin(), others.end(), t, std::greater<>()) - others.begin();
  const auto strictly_higher = std::lower_bound(others.begin(), others.end(), t, std::greater<>()) - others.begin();
  const auto ties = at_least - strictly_higher;
  return 1 + static_cast<int>(strictly_higher) + static_cast<int>(ties / 2);
}

double hit_ratio(int rank, int k) { return rank <= k ? 1.0 : 0.0; }

// Change of base in long double, rounded once.
double ndcg(int rank, int k) {
  return rank <= k ? static_cast<double>(std::log(2.0L) / std::log(static_cast<long double>(rank) + 1.0L)) : 0.0;
}

Vector coordinate_median(const Matrix& updates) {
  const std::size_t d = updates.front().size();
  Vector out(d);
  for (std::size_t c = 0; c < d; ++c) {
    auto col = column(updates, c);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out[c] = n % 2 == 1 ? col[n / 2] : (col[n / 2 - 1] + col[n / 2]) / 2.0;
  }
  return out;
}

Vector coordinate_trimmed_mean(const Matrix& updates, int beta) {
  const std::size_t d = updates.front().size();
  const auto b = static_cast<std::size_t>(beta);
  if (updates.size() <= 2 * b) throw std::invalid_argument("n <= 2 beta");
  Vector out(d);
  for (std::size_t c = 0; c < d; ++c) {
    auto col = column(updates, c);
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (std::size_t i = b; i < col.size() - b; ++i) s += col[i];
    out[c] = s / static_cast<double>(col.size() - 2 * b);
  }
  return out;
}

Vector coordinate_mean(const Matrix& updates) {
  Vector out(updates.front().size(), 0.0);
  for (const auto& u : updates) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += u[c];
  }
  for (double& x : out) x /= static_cast<double>(updates.size());
  return out;
}

Vector norm_clipped_mean(const Matrix& updates, double tau) {
  Matrix clipped;
  for (const auto& u : updates) {
    const double norm = std::sqrt(dot(u, u));
    const double scale = norm > tau ? tau / norm : 1.0;
    Vector c = u;
    for (double& x : c) x *= scale;
    clipped.push_back(c);
  }
  return coordinate_mean(clipped);
}

std::vector<double> krum_scores(const Matrix& updates, int f) {
  const std::size_t n = updates.size();
  const int keep = static_cast<int>(n) - f - 2;
  if (keep < 1) throw std::invalid_argument("n - f - 2 < 1");
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> dists;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dists.push_back(squared_distance(updates[i], updates[j]));
    }
    std::sort(dists.begin(), dists.end());
    scores[i] = std::accumulate(dists.begin(), dists.begin() + keep, 0.0);
  }
  return scores;
}

std::size_t krum_index(const Matrix& updates, int f) {
  const auto scores = krum_scores(updates, f);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> multi_krum_indices(const Matrix& updates, int f, int m_select) {
  std::vector<std::size_t> remaining(updates.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<std::size_t> chosen;
  while (static_cast<int>(chosen.size()) < m_select) {
    Matrix subset;
    for (std::size_t i : remaining) subset.push_back(updates[i]);
    const std::size_t pick = krum_index(subset, f);
    chosen.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return chosen;
}

Vector central_difference(const std::function<double(const Vector&)>& fn, const Vector& x, double h) {
  Vector grad(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = fn(probe);
    probe[i] = x[i] - h;
    const double down = fn(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

long double softplus(long double x) { return std::log1p(std::exp(x)); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p outside (0, 1)");
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

MeanStd two_pass_mean_std(const Matrix& rows, int ddof) {
  const std::size_t d = rows.front().size();
  MeanStd out{Vector(d, 0.0), Vector(d, 0.0)};
  for (std::size_t c = 0; c < d; ++c) {
    const auto col = column(rows, c);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    double ss = 0.0;
    for (double x : col) ss += (x - mean) * (x - mean);
    out.mean[c] = mean;
    const auto denom = static_cast<double>(col.size()) - ddof;
    out.std[c] = denom > 0 ? std::sqrt(ss / denom) : 0.0;
  }
  return out;
}

Vector symmetric_eigenvalues(const Vector& row_major, std::size_t size) {
  Eigen::MatrixXd m(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row_major[r * size + c];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  Vector values(solver.eigenvalues().data(), solver.eigenvalues().data() + size);
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

Vector covariance_eigenvalues(const Matrix& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto f = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd x(n, f);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < f; ++c) x(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
  Vector flat(static_cast<std::size_t>(f * f));
  for (Eigen::Index r = 0; r < f; ++r) {
    for (Eigen::Index c = 0; c < f; ++c) flat[static_cast<std::size_t>(r * f + c)] = cov(r, c);
  }
  return symmetric_eigenvalues(flat, static_cast<std::size_t>(f));
}

AdamTrace adam_steps(Vector params, const Vector& grad, int steps, double lr, double beta1, double beta2,
                     double eps) {
  AdamTrace t{std::move(params), Vector(grad.size(), 0.0), Vector(grad.size(), 0.0)};
  for (int step = 1; step <= steps; ++step) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      t.m[i] = beta1 * t.m[i] + (1.0 - beta1) * grad[i];
      t.v[i] = beta2 * t.v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double m_hat = t.m[i] / (1.0 - std::pow(beta1, step));
      const double v_hat = t.v[i] / (1.0 - std::pow(beta2, step));
      t.params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
  return t;
}

}  // namespace fedattack::oracles
