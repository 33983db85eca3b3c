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

#include <cstdint>
#include <span>
#include <vector>

#include "fedattack/common.hpp"
#include "fedattack/model.hpp"

namespace fedattack {

enum class FeatureMode {
  // 2 * (p + 6) values: per half, the predictor gradient plus pooled
  // statistics of the embedding part (see featurize).
  Pooled,
  // Full densified client gradient followed by the full round average.
  // Only practical for small models.
  RawConcat,
};

struct GradientFeatures {
  Vec values;
};

std::size_t feature_dim(const ParamLayout& layout, FeatureMode mode = FeatureMode::Pooled);

// Pooled layout, client half then average half:
//   predictor gradient (p), L2 norm, mean, std, max |.| of the touched
//   embedding entries, touched rows / total rows, cosine between the
//   client and average embedding parts (client half only, 0 otherwise).
GradientFeatures featurize(const SparseGradient& grad, std::span<const double> round_avg, const ParamLayout& layout,
                           FeatureMode mode = FeatureMode::Pooled);

struct LabeledFeatures {
  GradientFeatures features;
  bool malicious = false;
};

struct DetectorDataset {
  std::vector<LabeledFeatures> records;

  std::size_t positives() const;
  std::size_t negatives() const { return records.size() - positives(); }
};

// Downsamples the majority class (seeded) until both classes have the
// same count, then shuffles.
DetectorDataset balance_dataset(std::vector<LabeledFeatures> records, std::uint64_t seed);

// F -> hidden (ReLU) -> 1 (sigmoid) with inputs standardized by the
// training-split statistics. Weights are one flat vector:
//   W1 (hidden x F) | b1 (hidden) | w2 (hidden) | b2
struct DetectorModel {
  std::int32_t input_dim = 0;
  std::int32_t hidden = 32;
  Vec feature_mean;
  Vec feature_scale;
  Vec weights;
  double threshold = 0.5;

  static std::size_t weight_count(std::int32_t input_dim, std::int32_t hidden);
  static DetectorModel initialize(std::int32_t input_dim, std::int32_t hidden, std::uint64_t seed);

  double predict(std::span<const double> features) const;
};

// Mean binary cross-entropy over (x, y) pairs and its gradient w.r.t.
// `weights`. Inputs are standardized with the model's statistics.
double detector_loss(const DetectorModel& model, std::span<const LabeledFeatures> batch);
Vec detector_gradient(const DetectorModel& model, std::span<const LabeledFeatures> batch);

struct DetectorTraining {
  DetectorModel model;
  double initial_accuracy = 0.0;  // held-out, before any update
  double heldout_accuracy = 0.0;
  double train_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
};

double accuracy(const DetectorModel& model, std::span<const LabeledFeatures> records);

// Full-batch gradient descent on the first 80% of the records; accuracy
// is reported on the remaining 20%.
DetectorTraining train_detector(const DetectorDataset& dataset, int epochs, double lr, std::uint64_t seed,
                                std::int32_t hidden = 32);

struct FilterResult {
  std::vector<std::size_t> kept;        // indices into the input
  std::vector<UserId> flagged;          // client ids scored >= threshold
  bool keep_all_fallback = false;
};

FilterResult detect_and_filter(std::span<const SparseGradient> gradients, std::span<const UserId> client_ids,
                               std::span<const double> round_avg, const ParamLayout& layout,
                               const DetectorModel& model, double threshold,
                               FeatureMode mode = FeatureMode::Pooled);

}  // namespace fedattack
