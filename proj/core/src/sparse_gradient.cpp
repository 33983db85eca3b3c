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

#include <algorithm>

#include "fedattack/model.hpp"

namespace fedattack {

namespace {
template <typename Map, typename Key>
void add_row(Map& rows, Key id, std::span<const double> g, double scale) {
  auto [it, inserted] = rows.try_emplace(id);
  Vec& row = it->second;
  if (inserted) row.assign(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) row[k] += scale * g[k];
}
}  // namespace

void SparseGradient::add_user_row(UserId id, std::span<const double> g, double scale) {
  add_row(user_rows, id, g, scale);
}

void SparseGradient::add_item_row(ItemId id, std::span<const double> g, double scale) {
  add_row(item_rows, id, g, scale);
}

void SparseGradient::scale(double factor) {
  for (auto& [id, row] : user_rows)
    for (double& v : row) v *= factor;
  for (auto& [id, row] : item_rows)
    for (double& v : row) v *= factor;
  for (double& v : predictor_grad) v *= factor;
}

void SparseGradient::densify_into(const ParamLayout& layout, std::span<double> out) const {
  if (out.size() != layout.total_size()) throw PreconditionError("densify: output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& [id, row] : user_rows) {
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(layout.user_offset(id)));
  }
  for (const auto& [id, row] : item_rows) {
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(layout.item_offset(id)));
  }
  if (!predictor_grad.empty()) {
    if (predictor_grad.size() != layout.predictor_size()) {
      throw PreconditionError("densify: predictor gradient size mismatch");
    }
    std::copy(predictor_grad.begin(), predictor_grad.end(),
              out.begin() + static_cast<std::ptrdiff_t>(layout.predictor_offset()));
  }
}

Vec SparseGradient::densify(const ParamLayout& layout) const {
  Vec out(layout.total_size(), 0.0);
  densify_into(layout, out);
  return out;
}

SparseGradient SparseGradient::sparsify(const ParamLayout& layout, std::span<const double> dense) {
  if (dense.size() != layout.total_size()) throw PreconditionError("sparsify: size mismatch");
  SparseGradient g;
  const std::size_t d = layout.dim_u();
  auto nonzero = [](std::span<const double> row) {
    return std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; });
  };
  for (UserId u = 0; u < layout.num_users; ++u) {
    const auto row = dense.subspan(layout.user_offset(u), d);
    if (nonzero(row)) g.user_rows.emplace(u, Vec(row.begin(), row.end()));
  }
  for (ItemId i = 0; i < layout.num_items; ++i) {
    const auto row = dense.subspan(layout.item_offset(i), d);
    if (nonzero(row)) g.item_rows.emplace(i, Vec(row.begin(), row.end()));
  }
  const auto pred = dense.subspan(layout.predictor_offset(), layout.predictor_size());
  g.predictor_grad.assign(pred.begin(), pred.end());
  return g;
}

}  // namespace fedattack
