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

#include "fedattack/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace fedattack {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_f64s(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("truncated file reading ") + what);
  return v;
}

void read_f64s(std::istream& in, std::span<double> out, const char* what) {
  if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(double)))) {
    throw FormatError(std::string("truncated file reading ") + what);
  }
}

void expect_magic(std::istream& in, const char (&magic)[5]) {
  std::array<char, 4> got{};
  if (!in.read(got.data(), 4) || std::memcmp(got.data(), magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw FormatError("unsupported format version " + std::to_string(version));
}

void write_layout(std::ostream& out, const ParamLayout& layout) {
  write_u64(out, static_cast<std::uint64_t>(layout.num_users));
  write_u64(out, static_cast<std::uint64_t>(layout.num_items));
  write_u64(out, static_cast<std::uint64_t>(layout.dim));
  write_u32(out, static_cast<std::uint32_t>(layout.predictor));
}

ParamLayout read_layout(std::istream& in) {
  ParamLayout layout;
  layout.num_users = static_cast<std::int32_t>(read_pod<std::uint64_t>(in, "num_users"));
  layout.num_items = static_cast<std::int32_t>(read_pod<std::uint64_t>(in, "num_items"));
  layout.dim = static_cast<std::int32_t>(read_pod<std::uint64_t>(in, "dim"));
  const auto kind = read_pod<std::uint32_t>(in, "predictor kind");
  if (kind > 1) throw FormatError("unknown predictor kind " + std::to_string(kind));
  layout.predictor = static_cast<PredictorKind>(kind);
  if (layout.num_users <= 0 || layout.num_items <= 0 || layout.dim <= 0) throw FormatError("invalid shape header");
  return layout;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

void write_model(std::ostream& out, const ModelParams& params) {
  out.write("FAMC", 4);
  write_u32(out, kCheckpointVersion);
  write_layout(out, params.layout);
  write_f64s(out, params.values);
}

ModelParams read_model(std::istream& in) {
  expect_magic(in, "FAMC");
  ModelParams params;
  params.layout = read_layout(in);
  params.values.resize(params.layout.total_size());
  read_f64s(in, params.values, "model tables");
  return params;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  auto out = open_out(path);
  write_model(out, params);
}

ModelParams load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_model(in);
}

void save_detector(const std::filesystem::path& path, const DetectorModel& model) {
  auto out = open_out(path);
  out.write("FADT", 4);
  write_u32(out, kCheckpointVersion);
  write_u64(out, static_cast<std::uint64_t>(model.input_dim));
  write_u64(out, static_cast<std::uint64_t>(model.hidden));
  write_f64(out, model.threshold);
  write_f64s(out, model.feature_mean);
  write_f64s(out, model.feature_scale);
  write_f64s(out, model.weights);
}

DetectorModel load_detector(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_magic(in, "FADT");
  DetectorModel m;
  m.input_dim = static_cast<std::int32_t>(read_pod<std::uint64_t>(in, "input_dim"));
  m.hidden = static_cast<std::int32_t>(read_pod<std::uint64_t>(in, "hidden"));
  if (m.input_dim <= 0 || m.hidden <= 0) throw FormatError("invalid detector shape");
  m.threshold = read_pod<double>(in, "threshold");
  m.feature_mean.resize(static_cast<std::size_t>(m.input_dim));
  m.feature_scale.resize(static_cast<std::size_t>(m.input_dim));
  m.weights.resize(DetectorModel::weight_count(m.input_dim, m.hidden));
  read_f64s(in, m.feature_mean, "feature mean");
  read_f64s(in, m.feature_scale, "feature scale");
  read_f64s(in, m.weights, "weights");
  return m;
}

struct GradientLogWriter::Impl {
  std::ofstream log;
  std::ofstream labels;
  ParamLayout layout;
};

GradientLogWriter::GradientLogWriter(const std::filesystem::path& log_path, const std::filesystem::path& label_path,
                                     const ParamLayout& layout)
    : impl_(std::make_unique<Impl>(Impl{open_out(log_path), std::ofstream(label_path, std::ios::trunc), layout})) {
  if (!impl_->labels) throw Error("cannot write " + label_path.string());
  impl_->log.write("FAGL", 4);
  write_u32(impl_->log, kCheckpointVersion);
  write_layout(impl_->log, layout);
}

GradientLogWriter::~GradientLogWriter() {
  if (impl_) close();
}

void GradientLogWriter::append(std::int64_t round, UserId client, Role role, const SparseGradient& gradient) {
  std::ostream& out = impl_->log;
  write_u64(out, static_cast<std::uint64_t>(round));
  write_u64(out, static_cast<std::uint64_t>(client));
  write_u64(out, gradient.user_rows.size());
  write_u64(out, gradient.item_rows.size());
  for (const auto& [id, row] : gradient.user_rows) {
    write_u64(out, static_cast<std::uint64_t>(id));
    write_f64s(out, row);
  }
  for (const auto& [id, row] : gradient.item_rows) {
    write_u64(out, static_cast<std::uint64_t>(id));
    write_f64s(out, row);
  }
  write_u64(out, gradient.predictor_grad.size());
  write_f64s(out, gradient.predictor_grad);
  impl_->labels << round << '\t' << client << '\t' << to_string(role) << '\n';
}

void GradientLogWriter::close() {
  impl_->log.flush();
  impl_->labels.flush();
}

GradientLog read_gradient_log(const std::filesystem::path& log_path) {
  auto in = open_in(log_path);
  expect_magic(in, "FAGL");
  GradientLog log;
  log.layout = read_layout(in);
  const std::size_t d = log.layout.dim_u();
  while (in.peek() != std::char_traits<char>::eof()) {
    GradientLogRecord rec;
    rec.round = static_cast<std::int64_t>(read_pod<std::uint64_t>(in, "round"));
    rec.client = static_cast<UserId>(read_pod<std::uint64_t>(in, "client"));
    const auto users = read_pod<std::uint64_t>(in, "user row count");
    const auto items = read_pod<std::uint64_t>(in, "item row count");
    for (std::uint64_t r = 0; r < users + items; ++r) {
      const auto id = static_cast<std::int32_t>(read_pod<std::uint64_t>(in, "row id"));
      Vec row(d);
      read_f64s(in, row, "row values");
      (r < users ? rec.gradient.user_rows : rec.gradient.item_rows).emplace(id, std::move(row));
    }
    const auto pred = read_pod<std::uint64_t>(in, "predictor length");
    rec.gradient.predictor_grad.resize(pred);
    read_f64s(in, rec.gradient.predictor_grad, "predictor values");
    log.records.push_back(std::move(rec));
  }
  return log;
}

std::vector<RoleLabel> read_role_labels(const std::filesystem::path& label_path) {
  std::ifstream in(label_path);
  if (!in) throw Error("cannot open " + label_path.string());
  std::vector<RoleLabel> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    RoleLabel l;
    std::string role;
    if (!(fields >> l.round >> l.client >> role)) throw ParseError("expected round<TAB>client<TAB>role", line_no);
    if (role == "benign") {
      l.role = Role::Benign;
    } else if (role == "byzantine") {
      l.role = Role::Byzantine;
    } else {
      throw ParseError("unknown role '" + role + "'", line_no);
    }
    labels.push_back(l);
  }
  return labels;
}

}  // namespace fedattack
