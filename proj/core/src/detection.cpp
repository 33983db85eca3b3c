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

#include "fedattack/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>

#include "fedattack/rng.hpp"

namespace fedattack {

namespace {

constexpr std::size_t kPooledStats = 6;

struct EntryStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  double max_abs = 0.0;
  std::size_t count = 0;
  std::size_t rows = 0;

  void add_row(std::span<const double> row) {
    ++rows;
    for (double v : row) {
      sum += v;
      sum_sq += v * v;
      max_abs = std::max(max_abs, std::abs(v));
    }
    count += row.size();
  }

  void write(double* out, std::size_t total_rows, double cosine) const {
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    const double var = count ? std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean) : 0.0;
    out[0] = std::sqrt(sum_sq);
    out[1] = mean;
    out[2] = std::sqrt(var);
    out[3] = max_abs;
    out[4] = total_rows ? static_cast<double>(rows) / static_cast<double>(total_rows) : 0.0;
    out[5] = cosine;
  }
};

double forward(const DetectorModel& m, std::span<const double> x, Vec* standardized, Vec* hidden) {
  const auto f = static_cast<std::size_t>(m.input_dim);
  const auto h = static_cast<std::size_t>(m.hidden);
  Vec z(f);
  for (std::size_t k = 0; k < f; ++k) z[k] = (x[k] - m.feature_mean[k]) / m.feature_scale[k];
  Vec pre(h);
  const double* w = m.weights.data();
  double out = w[h * f + 2 * h];
  for (std::size_t r = 0; r < h; ++r) {
    double s = w[h * f + r];
    for (std::size_t c = 0; c < f; ++c) s += w[r * f + c] * z[c];
    pre[r] = s;
    if (s > 0.0) out += w[h * f + h + r] * s;
  }
  if (standardized) *standardized = std::move(z);
  if (hidden) *hidden = std::move(pre);
  return out;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void fit_standardizer(DetectorModel& model, std::span<const LabeledFeatures> train) {
  const auto f = static_cast<std::size_t>(model.input_dim);
  model.feature_mean.assign(f, 0.0);
  model.feature_scale.assign(f, 1.0);
  if (train.empty()) return;
  for (const auto& r : train)
    for (std::size_t k = 0; k < f; ++k) model.feature_mean[k] += r.features.values[k];
  for (double& v : model.feature_mean) v /= static_cast<double>(train.size());
  Vec var(f, 0.0);
  for (const auto& r : train) {
    for (std::size_t k = 0; k < f; ++k) {
      const double d = r.features.values[k] - model.feature_mean[k];
      var[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < f; ++k) {
    const double s = std::sqrt(var[k] / static_cast<double>(train.size()));
    model.feature_scale[k] = s > 1e-12 ? s : 1.0;
  }
}

}  // namespace

std::size_t feature_dim(const ParamLayout& layout, FeatureMode mode) {
  if (mode == FeatureMode::RawConcat) return 2 * layout.total_size();
  return 2 * (layout.predictor_size() + kPooledStats);
}

GradientFeatures featurize(const SparseGradient& grad, std::span<const double> round_avg, const ParamLayout& layout,
                           FeatureMode mode) {
  if (round_avg.size() != layout.total_size()) throw PreconditionError("featurize: round average size mismatch");
  GradientFeatures out;
  if (mode == FeatureMode::RawConcat) {
    out.values = grad.densify(layout);
    out.values.insert(out.values.end(), round_avg.begin(), round_avg.end());
    return out;
  }

  const std::size_t p = layout.predictor_size();
  const std::size_t half = p + kPooledStats;
  const std::size_t d = layout.dim_u();
  out.values.assign(2 * half, 0.0);

  if (!grad.predictor_grad.empty()) {
    if (grad.predictor_grad.size() != p) throw PreconditionError("featurize: predictor gradient size mismatch");
    std::copy(grad.predictor_grad.begin(), grad.predictor_grad.end(), out.values.begin());
  }
  const auto avg_pred = round_avg.subspan(layout.predictor_offset(), p);
  std::copy(avg_pred.begin(), avg_pred.end(), out.values.begin() + static_cast<std::ptrdiff_t>(half));

  EntryStats client;
  double cross = 0.0;
  auto visit_client = [&](std::span<const double> row, std::size_t offset) {
    client.add_row(row);
    for (std::size_t k = 0; k < d; ++k) cross += row[k] * round_avg[offset + k];
  };
  for (const auto& [id, row] : grad.user_rows) visit_client(row, layout.user_offset(id));
  for (const auto& [id, row] : grad.item_rows) visit_client(row, layout.item_offset(id));

  EntryStats average;
  const std::size_t rows = layout.total_rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = round_avg.subspan(r * d, d);
    if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) average.add_row(row);
  }

  const double denom = std::sqrt(client.sum_sq) * std::sqrt(average.sum_sq);
  const double cosine = denom > 0.0 ? cross / denom : 0.0;
  client.write(out.values.data() + p, rows, cosine);
  average.write(out.values.data() + half + p, rows, 0.0);
  return out;
}

std::size_t DetectorDataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const LabeledFeatures& r) { return r.malicious; }));
}

DetectorDataset balance_dataset(std::vector<LabeledFeatures> records, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0xba1a}));
  std::vector<LabeledFeatures> pos;
  std::vector<LabeledFeatures> neg;
  for (auto& r : records) (r.malicious ? pos : neg).push_back(std::move(r));
  auto& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(keep);

  DetectorDataset out;
  out.records = std::move(pos);
  out.records.insert(out.records.end(), std::make_move_iterator(neg.begin()), std::make_move_iterator(neg.end()));
  std::shuffle(out.records.begin(), out.records.end(), rng);
  return out;
}

std::size_t DetectorModel::weight_count(std::int32_t input_dim, std::int32_t hidden) {
  const auto f = static_cast<std::size_t>(input_dim);
  const auto h = static_cast<std::size_t>(hidden);
  return h * f + 2 * h + 1;
}

DetectorModel DetectorModel::initialize(std::int32_t input_dim, std::int32_t hidden, std::uint64_t seed) {
  if (input_dim <= 0 || hidden <= 0) throw PreconditionError("detector needs positive input and hidden sizes");
  DetectorModel m;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.feature_mean.assign(static_cast<std::size_t>(input_dim), 0.0);
  m.feature_scale.assign(static_cast<std::size_t>(input_dim), 1.0);
  m.weights.assign(weight_count(input_dim, hidden), 0.0);

  Rng rng(derive_seed(seed, {0xde7e}));
  const auto f = static_cast<std::size_t>(input_dim);
  const auto h = static_cast<std::size_t>(hidden);
  std::uniform_real_distribution<double> w1(-std::sqrt(6.0 / static_cast<double>(f + h)),
                                            std::sqrt(6.0 / static_cast<double>(f + h)));
  for (std::size_t k = 0; k < h * f; ++k) m.weights[k] = w1(rng);
  std::uniform_real_distribution<double> w2(-std::sqrt(6.0 / static_cast<double>(h + 1)),
                                            std::sqrt(6.0 / static_cast<double>(h + 1)));
  for (std::size_t k = 0; k < h; ++k) m.weights[h * f + h + k] = w2(rng);
  return m;
}

double DetectorModel::predict(std::span<const double> features) const {
  if (features.size() != static_cast<std::size_t>(input_dim)) {
    throw PreconditionError("detector input has " + std::to_string(features.size()) + " features, model expects " +
                            std::to_string(input_dim));
  }
  return sigmoid(forward(*this, features, nullptr, nullptr));
}

double detector_loss(const DetectorModel& model, std::span<const LabeledFeatures> batch) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : batch) {
    const double logit = forward(model, r.features.values, nullptr, nullptr);
    total += softplus(logit) - (r.malicious ? logit : 0.0);
  }
  return total / static_cast<double>(batch.size());
}

Vec detector_gradient(const DetectorModel& model, std::span<const LabeledFeatures> batch) {
  const auto f = static_cast<std::size_t>(model.input_dim);
  const auto h = static_cast<std::size_t>(model.hidden);
  Vec grad(model.weights.size(), 0.0);
  if (batch.empty()) return grad;
  const double* w = model.weights.data();
  Vec z;
  Vec pre;
  for (const auto& r : batch) {
    const double logit = forward(model, r.features.values, &z, &pre);
    const double dlogit = sigmoid(logit) - (r.malicious ? 1.0 : 0.0);
    grad[h * f + 2 * h] += dlogit;
    for (std::size_t row = 0; row < h; ++row) {
      if (pre[row] <= 0.0) continue;
      grad[h * f + h + row] += dlogit * pre[row];
      const double dpre = dlogit * w[h * f + h + row];
      grad[h * f + row] += dpre;
      for (std::size_t c = 0; c < f; ++c) grad[row * f + c] += dpre * z[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  return grad;
}

double accuracy(const DetectorModel& model, std::span<const LabeledFeatures> records) {
  if (records.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& r : records) {
    const bool flagged = model.predict(r.features.values) >= model.threshold;
    if (flagged == r.malicious) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

DetectorTraining train_detector(const DetectorDataset& dataset, int epochs, double lr, std::uint64_t seed,
                                std::int32_t hidden) {
  const std::size_t pos = dataset.positives();
  if (pos == 0 || pos == dataset.records.size()) {
    throw PreconditionError("detector training needs both malicious and normal gradients");
  }
  if (epochs < 0 || !(lr > 0.0)) throw ConfigError("detector training needs epochs >= 0 and lr > 0");
  const auto input_dim = static_cast<std::int32_t>(dataset.records.front().features.values.size());
  for (const auto& r : dataset.records) {
    if (r.features.values.size() != static_cast<std::size_t>(input_dim)) {
      throw PreconditionError("detector records differ in feature dimension");
    }
  }

  const std::size_t n = dataset.records.size();
  const std::size_t train_n = std::max<std::size_t>(1, n - n / 5);
  const std::span<const LabeledFeatures> all(dataset.records);
  const auto train = all.first(train_n);
  const auto heldout = all.subspan(train_n);

  DetectorTraining result;
  result.model = DetectorModel::initialize(input_dim, hidden, seed);
  fit_standardizer(result.model, train);
  result.train_size = train.size();
  result.heldout_size = heldout.size();
  result.initial_accuracy = accuracy(result.model, heldout);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Vec g = detector_gradient(result.model, train);
    for (std::size_t k = 0; k < g.size(); ++k) result.model.weights[k] -= lr * g[k];
  }
  result.heldout_accuracy = accuracy(result.model, heldout);
  result.train_accuracy = accuracy(result.model, train);
  return result;
}

FilterResult detect_and_filter(std::span<const SparseGradient> gradients, std::span<const UserId> client_ids,
                               std::span<const double> round_avg, const ParamLayout& layout,
                               const DetectorModel& model, double threshold, FeatureMode mode) {
  if (gradients.size() != client_ids.size()) throw PreconditionError("one client id per gradient required");
  if (feature_dim(layout, mode) != static_cast<std::size_t>(model.input_dim)) {
    throw PreconditionError("detector input dimension does not match the featurizer");
  }
  FilterResult result;
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    const GradientFeatures x = featurize(gradients[i], round_avg, layout, mode);
    if (model.predict(x.values) >= threshold) {
      result.flagged.push_back(client_ids[i]);
    } else {
      result.kept.push_back(i);
    }
  }
  if (result.kept.empty() && !gradients.empty()) {
    spdlog::warn("detector flagged all {} gradients in a round; keeping all", gradients.size());
    result.keep_all_fallback = true;
    result.kept.resize(gradients.size());
    std::iota(result.kept.begin(), result.kept.end(), 0);
  }
  return result;
}

}  // namespace fedattack
