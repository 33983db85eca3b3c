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
#include <istream>
#include <span>
#include <unordered_map>
#include <vector>

#include "fedattack/common.hpp"

namespace fedattack {

enum class LogFormat { MovieLensDat, Tsv };

LogFormat parse_log_format(std::string_view text);

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;
};

// Bidirectional mapping between raw file ids and contiguous 0-based ids.
// Remapped ids follow ascending order of the original ids.
class IdMapping {
 public:
  IdMapping() = default;
  explicit IdMapping(std::vector<std::int64_t> originals);

  std::int32_t encode(std::int64_t original) const;
  std::int64_t decode(std::int32_t remapped) const { return originals_.at(static_cast<std::size_t>(remapped)); }
  bool contains(std::int64_t original) const { return index_.contains(original); }
  std::size_t size() const noexcept { return originals_.size(); }
  const std::vector<std::int64_t>& originals() const noexcept { return originals_; }

 private:
  std::vector<std::int64_t> originals_;
  std::unordered_map<std::int64_t, std::int32_t> index_;
};

// Remapped interaction records grouped by user (ascending user id) and,
// within a user, sorted by timestamp with file order breaking ties.
struct InteractionLog {
  std::vector<Interaction> records;
  std::int32_t user_count = 0;
  std::int32_t item_count = 0;
  IdMapping users;
  IdMapping items;

  // Per-user item sequences in time order, indexed by remapped user id.
  std::vector<std::vector<ItemId>> sequences() const;
};

struct LoadOptions {
  std::size_t min_user_interactions = 3;
  // Items with fewer interactions are removed before the user filter runs.
  std::size_t min_item_interactions = 1;
};

InteractionLog parse_interactions(std::istream& in, LogFormat format, const LoadOptions& options = {});
InteractionLog load_interactions(const std::filesystem::path& path, LogFormat format,
                                 const LoadOptions& options = {});

// Writes `original<TAB>remapped` rows, one per id.
void write_id_mapping(const std::filesystem::path& path, const IdMapping& mapping);
IdMapping read_id_mapping(const std::filesystem::path& path);

struct SyntheticSpec {
  std::int32_t users = 1000;
  std::int32_t items = 500;
  std::int32_t clusters = 10;
  std::int32_t min_length = 12;
  std::int32_t max_length = 40;
  // Logit bonus for items in the user's own cluster.
  double cluster_strength = 3.0;
  // Within-cluster taste: standard-normal latent vectors, dot product
  // scaled by strength / sqrt(taste_dim).
  std::int32_t taste_dim = 4;
  double taste_strength = 1.5;
  // Zipf exponent over a random popularity order of the items.
  double popularity_exponent = 0.5;
  std::uint64_t seed = 7;

  bool operator==(const SyntheticSpec&) const = default;
};

// Implicit-feedback log with planted structure: items are split into
// equal clusters and every user belongs to one. A user's distinct items
// are drawn without replacement with logits
//   cluster_strength * [same cluster] + taste term + popularity term,
// then put in random time order.
InteractionLog generate_synthetic(const SyntheticSpec& spec);

struct Split {
  std::vector<ItemId> train_items;
  ItemId val_item = 0;
  ItemId test_item = 0;
};

// Last interaction -> test, second to last -> validation, rest -> train.
std::vector<Split> leave_one_out_split(const InteractionLog& log);
Split split_sequence(std::span<const ItemId> sequence);

struct ClientProfile {
  UserId user_id = 0;
  std::vector<ItemId> train_items;
  ItemId val_item = 0;
  ItemId test_item = 0;
  Role role = Role::Benign;
  std::int32_t k_positives = 1;

  bool is_byzantine() const noexcept { return role == Role::Byzantine; }
  // train ∪ {val, test}, sorted and unique.
  std::vector<ItemId> known_items() const;
};

struct ClientRegistry {
  std::vector<ClientProfile> clients;
  double byzantine_ratio = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return clients.size(); }
  std::size_t byzantine_count() const;
  std::size_t benign_count() const { return size() - byzantine_count(); }
};

ClientRegistry build_client_registry(std::span<const Split> splits, double byzantine_ratio,
                                     std::int32_t k_positives, std::uint64_t seed);

}  // namespace fedattack
