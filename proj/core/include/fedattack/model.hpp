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
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "fedattack/common.hpp"
#include "fedattack/dataset.hpp"

namespace fedattack {

// Shape of the flat parameter vector shared by the server and clients:
//   [ user table (U x d) | item table (I x d) | predictor block ]
// The MLP predictor block is W1 (d x 2d, row-major) | b1 (d) | w2 (d) | b2.
struct ParamLayout {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::int32_t dim = 0;
  PredictorKind predictor = PredictorKind::DotProduct;

  std::size_t predictor_size() const noexcept;
  std::size_t user_offset(UserId u) const noexcept { return static_cast<std::size_t>(u) * dim_u(); }
  std::size_t item_offset(ItemId i) const noexcept { return item_block() + static_cast<std::size_t>(i) * dim_u(); }
  std::size_t item_block() const noexcept { return static_cast<std::size_t>(num_users) * dim_u(); }
  std::size_t predictor_offset() const noexcept { return item_block() + static_cast<std::size_t>(num_items) * dim_u(); }
  std::size_t total_size() const noexcept { return predictor_offset() + predictor_size(); }
  std::size_t total_rows() const noexcept { return static_cast<std::size_t>(num_users) + num_items; }
  std::size_t dim_u() const noexcept { return static_cast<std::size_t>(dim); }

  bool operator==(const ParamLayout&) const = default;
};

struct ModelParams {
  ParamLayout layout;
  Vec values;

  std::span<double> user_row(UserId u) { return {values.data() + layout.user_offset(u), layout.dim_u()}; }
  std::span<const double> user_row(UserId u) const { return {values.data() + layout.user_offset(u), layout.dim_u()}; }
  std::span<double> item_row(ItemId i) { return {values.data() + layout.item_offset(i), layout.dim_u()}; }
  std::span<const double> item_row(ItemId i) const { return {values.data() + layout.item_offset(i), layout.dim_u()}; }
  std::span<double> predictor() { return {values.data() + layout.predictor_offset(), layout.predictor_size()}; }
  std::span<const double> predictor() const {
    return {values.data() + layout.predictor_offset(), layout.predictor_size()};
  }
};

// Per-client update. Only rows the client touched are present.
struct SparseGradient {
  std::map<UserId, Vec> user_rows;
  std::map<ItemId, Vec> item_rows;
  Vec predictor_grad;
  std::int32_t sample_count = 0;

  std::size_t touched_rows() const noexcept { return user_rows.size() + item_rows.size(); }

  // Adds `scale * g` into the row for `id`, creating it when absent.
  void add_user_row(UserId id, std::span<const double> g, double scale = 1.0);
  void add_item_row(ItemId id, std::span<const double> g, double scale = 1.0);
  void scale(double factor);

  void densify_into(const ParamLayout& layout, std::span<double> out) const;
  Vec densify(const ParamLayout& layout) const;

  // Keeps every embedding row with at least one nonzero entry plus the
  // whole predictor block.
  static SparseGradient sparsify(const ParamLayout& layout, std::span<const double> dense);
};

ModelParams init_params(std::int32_t num_users, std::int32_t num_items, std::int32_t dim,
                        PredictorKind predictor, std::uint64_t seed);

Vec user_embed(const ModelParams& params, const ClientProfile& profile, UserModelKind kind);

double score(const ModelParams& params, std::span<const double> user, ItemId item);

// Scores of every item for one user embedding.
Vec score_all(const ModelParams& params, std::span<const double> user);

// -log(sigmoid(yp - yn)), evaluated as softplus(yn - yp).
double bpr_loss(double positive_score, double negative_score);

double sigmoid(double x);

struct ItemPair {
  ItemId positive = 0;
  ItemId negative = 0;
};

// Loss of one pair through the full forward pass; used by gradient checks.
double pair_loss(const ModelParams& params, const ClientProfile& profile, ItemPair pair, UserModelKind kind);

// Mean of the per-pair BPR gradients over `pairs`. For SeqMean the user
// embedding gradient is spread as 1/|profile| onto each profile item row.
SparseGradient bpr_gradients(const ModelParams& params, const ClientProfile& profile,
                             std::span<const ItemPair> pairs, UserModelKind kind);

SparseGradient bpr_gradients(const ModelParams& params, const ClientProfile& profile, ItemPair pair,
                             UserModelKind kind);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  std::int64_t step_count = 0;
  AdamHyper hyper;

  static AdamState zeros(std::size_t size, AdamHyper hyper = {});
};

// One bias-corrected Adam step: params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_apply(AdamState& state, ModelParams& params, std::span<const double> update);

}  // namespace fedattack
