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

// Slow reference implementations used to freeze expected values in tests.
// Nothing here calls into fedattack::core.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace fedattack::oracles {

using Vector = std::vector<double>;
using Matrix = std::vector<Vector>;

// Stable descending argsort; equal scores keep ascending index order.
std::vector<std::size_t> argsort_desc(const Vector& scores);

// Top-k / bottom-k ids from `pool` by inner product with `user`, smaller id
// first on ties, skipping anything in `excluded`.
std::vector<std::int32_t> top_k_by_score(const Matrix& item_rows, const Vector& user,
                                         const std::vector<std::int32_t>& pool,
                                         const std::vector<std::int32_t>& excluded, std::size_t k);
std::vector<std::int32_t> bottom_k_by_score(const Matrix& item_rows, const Vector& user,
                                            const std::vector<std::int32_t>& pool,
                                            const std::vector<std::int32_t>& excluded, std::size_t k);

// 1 + #strictly higher + floor(#ties / 2), found by sorting.
int rank_by_sort(const Vector& scores, std::size_t target, const std::vector<bool>& excluded);

double hit_ratio(int rank, int k);
double ndcg(int rank, int k);

Vector coordinate_median(const Matrix& updates);
Vector coordinate_trimmed_mean(const Matrix& updates, int beta);
Vector coordinate_mean(const Matrix& updates);
Vector norm_clipped_mean(const Matrix& updates, double tau);

// Explicit pairwise squared distances, per-row sort, sum of the n - f - 2
// smallest. Lowest index wins ties.
std::vector<double> krum_scores(const Matrix& updates, int f);
std::size_t krum_index(const Matrix& updates, int f);
// Repeats Krum on the shrinking remainder; returns original indices.
std::vector<std::size_t> multi_krum_indices(const Matrix& updates, int f, int m_select);

// Central differences of a scalar function.
Vector central_difference(const std::function<double(const Vector&)>& fn, const Vector& x, double h);

// softplus in long double.
long double softplus(long double x);

// Bisection on 0.5 * erfc(-x / sqrt(2)).
double inverse_normal_cdf(double p);

struct MeanStd {
  Vector mean;
  Vector std;
};
// Two passes; `ddof` 1 for the sample estimate.
MeanStd two_pass_mean_std(const Matrix& rows, int ddof);

// Covariance (n - 1) followed by a dense self-adjoint eigensolver; values
// descending.
Vector covariance_eigenvalues(const Matrix& rows);
Vector symmetric_eigenvalues(const Vector& row_major, std::size_t size);

struct AdamTrace {
  Vector params;
  Vector m;
  Vector v;
};
// Textbook bias-corrected Adam for `steps` applications of the same gradient.
AdamTrace adam_steps(Vector params, const Vector& grad, int steps, double lr, double beta1, double beta2,
                     double eps);

}  // namespace fedattack::oracles
