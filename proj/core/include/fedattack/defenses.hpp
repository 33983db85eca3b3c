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

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "fedattack/common.hpp"

namespace fedattack {

enum class DefenseKind { Mean, Median, TrimmedMean, Krum, MultiKrum, NormBound };

std::string_view to_string(DefenseKind kind);
DefenseKind parse_defense_kind(std::string_view text);

// Negative counts mean "derive from the round": see resolve_rule.
struct AggregationRule {
  DefenseKind kind = DefenseKind::Mean;
  int beta = -1;
  int f = -1;
  int m_select = -1;
  double tau = 2.0;

  bool operator==(const AggregationRule&) const = default;
};

// Fills unset parameters for a round of n updates:
//   f = max(1, round(ratio * n)), beta = f, m_select = n - f,
// then shrinks them so the rule's precondition holds on this n. Rounds
// too small for Krum scoring (n <= 2) fall back to the coordinate median.
AggregationRule resolve_rule(const AggregationRule& rule, std::size_t n, double byzantine_ratio);

using UpdateSet = std::span<const Vec>;

Vec agg_mean(UpdateSet updates);
Vec agg_median(UpdateSet updates);
Vec agg_trimmed_mean(UpdateSet updates, int beta);

// Index of the update with the smallest sum of squared distances to its
// n - f - 2 nearest neighbours. Ties go to the lowest index.
std::size_t krum_select(UpdateSet updates, int f);
Vec agg_krum(UpdateSet updates, int f);

// Indices picked by repeated Krum on the shrinking set, in pick order.
std::vector<std::size_t> multi_krum_select(UpdateSet updates, int f, int m_select);
Vec agg_multi_krum(UpdateSet updates, int f, int m_select);

Vec agg_norm_bound(UpdateSet updates, double tau);

Vec aggregate(UpdateSet updates, const AggregationRule& rule);

}  // namespace fedattack
