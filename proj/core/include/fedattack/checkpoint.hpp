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
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

#include "fedattack/common.hpp"
#include "fedattack/detection.hpp"
#include "fedattack/model.hpp"

namespace fedattack {

// Binary files, all integers and doubles little-endian.
//
// Model checkpoint:
//   "FAMC" | u32 version | u64 num_users | u64 num_items | u64 dim |
//   u32 predictor kind | f64 x (user table, item table, predictor) row-major
//
// Detector checkpoint:
//   "FADT" | u32 version | u64 input_dim | u64 hidden | f64 threshold |
//   f64 x input_dim feature mean | f64 x input_dim feature scale | f64 weights
//
// Gradient log (one record per round and client, no labels):
//   "FAGL" | u32 version | u64 num_users | u64 num_items | u64 dim | u32 predictor
//   then records: u64 round | u64 client | u64 user rows | u64 item rows |
//   per row (u64 id, f64 x dim) | u64 predictor length | f64 values
// Role labels live in a TSV sidecar: `round<TAB>client<TAB>role`.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);
void write_model(std::ostream& out, const ModelParams& params);
ModelParams read_model(std::istream& in);

void save_detector(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_detector(const std::filesystem::path& path);

struct GradientLogRecord {
  std::int64_t round = 0;
  UserId client = 0;
  SparseGradient gradient;
};

class GradientLogWriter {
 public:
  GradientLogWriter(const std::filesystem::path& log_path, const std::filesystem::path& label_path,
                    const ParamLayout& layout);
  ~GradientLogWriter();
  GradientLogWriter(const GradientLogWriter&) = delete;
  GradientLogWriter& operator=(const GradientLogWriter&) = delete;

  void append(std::int64_t round, UserId client, Role role, const SparseGradient& gradient);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct GradientLog {
  ParamLayout layout;
  std::vector<GradientLogRecord> records;
};

GradientLog read_gradient_log(const std::filesystem::path& log_path);

struct RoleLabel {
  std::int64_t round = 0;
  UserId client = 0;
  Role role = Role::Benign;
};
std::vector<RoleLabel> read_role_labels(const std::filesystem::path& label_path);

}  // namespace fedattack
