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

#include "fedattack/rng.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "fedattack/common.hpp"

namespace fedattack {

std::uint64_t mix_seed(std::uint64_t value) {
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t state = mix_seed(base);
  for (std::uint64_t c : coords) state = mix_seed(state ^ mix_seed(c + 0x632be59bd9b4e019ULL));
  return state;
}

std::string_view to_string(Role role) {
  return role == Role::Benign ? "benign" : "byzantine";
}

std::string_view to_string(PredictorKind kind) {
  return kind == PredictorKind::DotProduct ? "dot" : "mlp";
}

std::string_view to_string(UserModelKind kind) {
  return kind == UserModelKind::IdEmbedding ? "id" : "seq_mean";
}

namespace {
std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}
}  // namespace

PredictorKind parse_predictor_kind(std::string_view text) {
  const std::string t = lower(text);
  if (t == "dot" || t == "dotproduct") return PredictorKind::DotProduct;
  if (t == "mlp" || t == "ncf") return PredictorKind::Mlp;
  throw ConfigError("unknown predictor kind '" + std::string(text) + "'");
}

UserModelKind parse_user_model_kind(std::string_view text) {
  const std::string t = lower(text);
  if (t == "id" || t == "idembedding") return UserModelKind::IdEmbedding;
  if (t == "seqmean" || t == "seq_mean") return UserModelKind::SeqMean;
  throw ConfigError("unknown user model kind '" + std::string(text) + "'");
}

}  // namespace fedattack
