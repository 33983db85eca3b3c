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

#include "fedattack/model.hpp"

#include <cmath>
#include <random>

#include "fedattack/rng.hpp"

namespace fedattack {

namespace {

// Views into the MLP predictor block for embedding size d.
struct MlpView {
  std::span<const double> block;
  std::size_t d;

  double w1(std::size_t row, std::size_t col) const { return block[row * 2 * d + col]; }
  double b1(std::size_t row) const { return block[2 * d * d + row]; }
  double w2(std::size_t row) const { return block[2 * d * d + d + row]; }
  double b2() const { return block[2 * d * d + 2 * d]; }
};

struct MlpTrace {
  Vec hidden;  // pre-activation
  double output = 0.0;
};

MlpTrace mlp_forward(const MlpView& mlp, std::span<const double> user, std::span<const double> item) {
  MlpTrace t;
  t.hidden.resize(mlp.d);
  t.output = mlp.b2();
  for (std::size_t r = 0; r < mlp.d; ++r) {
    double h = mlp.b1(r);
    for (std::size_t c = 0; c < mlp.d; ++c) h += mlp.w1(r, c) * user[c] + mlp.w1(r, mlp.d + c) * item[c];
    t.hidden[r] = h;
    if (h > 0.0) t.output += mlp.w2(r) * h;
  }
  return t;
}

// Accumulates dy * d(output)/d(everything) into the given buffers.
void mlp_backward(const MlpView& mlp, const MlpTrace& trace, std::span<const double> user,
                  std::span<const double> item, double dy, std::span<double> d_user, std::span<double> d_item,
                  std::span<double> d_block) {
  const std::size_t d = mlp.d;
  for (std::size_t r = 0; r < d; ++r) {
    const double h = trace.hidden[r];
    if (h <= 0.0) continue;
    d_block[2 * d * d + d + r] += dy * h;  // w2
    const double dh = dy * mlp.w2(r);
    d_block[2 * d * d + r] += dh;  // b1
    for (std::size_t c = 0; c < d; ++c) {
      d_block[r * 2 * d + c] += dh * user[c];
      d_block[r * 2 * d + d + c] += dh * item[c];
      d_user[c] += dh * mlp.w1(r, c);
      d_item[c] += dh * mlp.w1(r, d + c);
    }
  }
  d_block[2 * d * d + 2 * d] += dy;  // b2
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

std::size_t ParamLayout::predictor_size() const noexcept {
  if (predictor == PredictorKind::DotProduct) return 0;
  const std::size_t d = dim_u();
  return 2 * d * d + 2 * d + 1;
}

ModelParams init_params(std::int32_t num_users, std::int32_t num_items, std::int32_t dim, PredictorKind predictor,
                        std::uint64_t seed) {
  if (num_users <= 0 || num_items <= 0 || dim <= 0) {
    throw PreconditionError("init_params needs positive user/item counts and dimension");
  }
  ModelParams params;
  params.layout = {num_users, num_items, dim, predictor};
  params.values.assign(params.layout.total_size(), 0.0);

  Rng rng(derive_seed(seed, {0x1417}));
  std::normal_distribution<double> embed(0.0, 0.01);
  for (std::size_t k = 0; k < params.layout.predictor_offset(); ++k) params.values[k] = embed(rng);

  if (predictor == PredictorKind::Mlp) {
    const std::size_t d = params.layout.dim_u();
    auto block = params.predictor();
    const double limit1 = std::sqrt(6.0 / static_cast<double>(2 * d + d));
    std::uniform_real_distribution<double> w1(-limit1, limit1);
    for (std::size_t k = 0; k < 2 * d * d; ++k) block[k] = w1(rng);
    const double limit2 = std::sqrt(6.0 / static_cast<double>(d + 1));
    std::uniform_real_distribution<double> w2(-limit2, limit2);
    for (std::size_t k = 0; k < d; ++k) block[2 * d * d + d + k] = w2(rng);
  }
  return params;
}

Vec user_embed(const ModelParams& params, const ClientProfile& profile, UserModelKind kind) {
  if (kind == UserModelKind::IdEmbedding) {
    if (profile.user_id < 0 || profile.user_id >= params.layout.num_users) {
      throw PreconditionError("user id " + std::to_string(profile.user_id) + " out of range");
    }
    const auto row = params.user_row(profile.user_id);
    return Vec(row.begin(), row.end());
  }
  if (profile.train_items.empty()) throw PreconditionError("SeqMean user model needs a non-empty profile");
  Vec u(params.layout.dim_u(), 0.0);
  for (ItemId item : profile.train_items) {
    const auto row = params.item_row(item);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(profile.train_items.size());
  for (double& v : u) v *= inv;
  return u;
}

double score(const ModelParams& params, std::span<const double> user, ItemId item) {
  const auto row = params.item_row(item);
  if (params.layout.predictor == PredictorKind::DotProduct) return dot(user, row);
  return mlp_forward(MlpView{params.predictor(), params.layout.dim_u()}, user, row).output;
}

Vec score_all(const ModelParams& params, std::span<const double> user) {
  const std::size_t items = static_cast<std::size_t>(params.layout.num_items);
  Vec scores(items);
  if (params.layout.predictor == PredictorKind::DotProduct) {
    for (std::size_t i = 0; i < items; ++i) scores[i] = dot(user, params.item_row(static_cast<ItemId>(i)));
    return scores;
  }
  // hidden = W1u * u + b1 + W1i * item; the user half is shared by all items.
  const MlpView mlp{params.predictor(), params.layout.dim_u()};
  const std::size_t d = mlp.d;
  Vec user_part(d);
  for (std::size_t r = 0; r < d; ++r) {
    double h = mlp.b1(r);
    for (std::size_t c = 0; c < d; ++c) h += mlp.w1(r, c) * user[c];
    user_part[r] = h;
  }
  for (std::size_t i = 0; i < items; ++i) {
    const auto row = params.item_row(static_cast<ItemId>(i));
    double y = mlp.b2();
    for (std::size_t r = 0; r < d; ++r) {
      double h = user_part[r];
      for (std::size_t c = 0; c < d; ++c) h += mlp.w1(r, d + c) * row[c];
      if (h > 0.0) y += mlp.w2(r) * h;
    }
    scores[i] = y;
  }
  return scores;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bpr_loss(double positive_score, double negative_score) {
  if (std::isnan(positive_score) || std::isnan(negative_score)) throw PreconditionError("bpr_loss: NaN score");
  return softplus(negative_score - positive_score);
}

double pair_loss(const ModelParams& params, const ClientProfile& profile, ItemPair pair, UserModelKind kind) {
  const Vec u = user_embed(params, profile, kind);
  return bpr_loss(score(params, u, pair.positive), score(params, u, pair.negative));
}

SparseGradient bpr_gradients(const ModelParams& params, const ClientProfile& profile,
                             std::span<const ItemPair> pairs, UserModelKind kind) {
  if (pairs.empty()) throw PreconditionError("bpr_gradients: no sample pairs");
  const ParamLayout& layout = params.layout;
  const std::size_t d = layout.dim_u();
  const bool mlp = layout.predictor == PredictorKind::Mlp;
  const MlpView view{params.predictor(), d};

  SparseGradient grad;
  grad.sample_count = static_cast<std::int32_t>(pairs.size());
  if (mlp) grad.predictor_grad.assign(layout.predictor_size(), 0.0);

  const Vec u = user_embed(params, profile, kind);
  Vec d_user(d, 0.0);
  Vec d_pos(d);
  Vec d_neg(d);
  for (const ItemPair& pair : pairs) {
    const auto pos_row = params.item_row(pair.positive);
    const auto neg_row = params.item_row(pair.negative);
    std::fill(d_pos.begin(), d_pos.end(), 0.0);
    std::fill(d_neg.begin(), d_neg.end(), 0.0);
    if (!mlp) {
      const double g_neg = sigmoid(dot(u, neg_row) - dot(u, pos_row));
      const double g_pos = -g_neg;
      for (std::size_t k = 0; k < d; ++k) {
        d_user[k] += g_pos * pos_row[k] + g_neg * neg_row[k];
        d_pos[k] = g_pos * u[k];
        d_neg[k] = g_neg * u[k];
      }
    } else {
      const MlpTrace tp = mlp_forward(view, u, pos_row);
      const MlpTrace tn = mlp_forward(view, u, neg_row);
      const double g_neg = sigmoid(tn.output - tp.output);
      mlp_backward(view, tp, u, pos_row, -g_neg, d_user, d_pos, grad.predictor_grad);
      mlp_backward(view, tn, u, neg_row, g_neg, d_user, d_neg, grad.predictor_grad);
    }
    grad.add_item_row(pair.positive, d_pos);
    grad.add_item_row(pair.negative, d_neg);
  }

  if (kind == UserModelKind::IdEmbedding) {
    grad.add_user_row(profile.user_id, d_user);
  } else {
    const double share = 1.0 / static_cast<double>(profile.train_items.size());
    for (ItemId item : profile.train_items) grad.add_item_row(item, d_user, share);
  }
  grad.scale(1.0 / static_cast<double>(pairs.size()));
  return grad;
}

SparseGradient bpr_gradients(const ModelParams& params, const ClientProfile& profile, ItemPair pair,
                             UserModelKind kind) {
  return bpr_gradients(params, profile, std::span<const ItemPair>(&pair, 1), kind);
}

AdamState AdamState::zeros(std::size_t size, AdamHyper hyper) {
  AdamState s;
  s.first_moment.assign(size, 0.0);
  s.second_moment.assign(size, 0.0);
  s.hyper = hyper;
  return s;
}

void adam_apply(AdamState& state, ModelParams& params, std::span<const double> update) {
  const std::size_t n = params.values.size();
  if (update.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw PreconditionError("adam_apply: shape mismatch (params " + std::to_string(n) + ", update " +
                            std::to_string(update.size()) + ")");
  }
  const AdamHyper& h = state.hyper;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  double* m = state.first_moment.data();
  double* v = state.second_moment.data();
  double* p = params.values.data();
  for (std::size_t k = 0; k < n; ++k) {
    const double g = update[k];
    m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g;
    v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g * g;
    p[k] -= h.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + h.epsilon);
  }
}

}  // namespace fedattack
