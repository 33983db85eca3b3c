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

#include "fedattack/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "fedattack/rng.hpp"

namespace fedattack {

namespace {

struct RawRecord {
  std::int64_t user;
  std::int64_t item;
  std::int64_t timestamp;
};

std::int64_t parse_int(std::string_view field, std::size_t line, std::string_view name) {
  while (!field.empty() && (field.front() == ' ')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("malformed " + std::string(name) + " field '" + std::string(field) + "'", line);
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view text, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(text.substr(start));
      return fields;
    }
    fields.push_back(text.substr(start, pos - start));
    start = pos + sep.size();
  }
}

RawRecord parse_row(std::string_view text, LogFormat format, std::size_t line) {
  if (format == LogFormat::MovieLensDat) {
    const auto fields = split_fields(text, "::");
    if (fields.size() != 4) throw ParseError("expected user::item::rating::timestamp", line);
    // Rating is validated but otherwise ignored; every row is a positive.
    (void)parse_int(fields[2], line, "rating");
    return {parse_int(fields[0], line, "user"), parse_int(fields[1], line, "item"),
            parse_int(fields[3], line, "timestamp")};
  }
  const auto fields = split_fields(text, "\t");
  if (fields.size() != 3) throw ParseError("expected user<TAB>item<TAB>timestamp", line);
  return {parse_int(fields[0], line, "user"), parse_int(fields[1], line, "item"),
          parse_int(fields[2], line, "timestamp")};
}

InteractionLog assemble(std::vector<RawRecord> raw, const LoadOptions& options) {
  if (options.min_item_interactions > 1) {
    std::map<std::int64_t, std::size_t> item_counts;
    for (const auto& r : raw) ++item_counts[r.item];
    std::erase_if(raw, [&](const RawRecord& r) { return item_counts[r.item] < options.min_item_interactions; });
  }
  std::map<std::int64_t, std::size_t> user_counts;
  for (const auto& r : raw) ++user_counts[r.user];
  std::erase_if(raw, [&](const RawRecord& r) { return user_counts[r.user] < options.min_user_interactions; });
  if (raw.empty()) throw EmptyDatasetError("no users left after filtering");

  std::vector<std::int64_t> user_ids;
  std::vector<std::int64_t> item_ids;
  for (const auto& r : raw) {
    user_ids.push_back(r.user);
    item_ids.push_back(r.item);
  }
  for (auto* ids : {&user_ids, &item_ids}) {
    std::sort(ids->begin(), ids->end());
    ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
  }

  InteractionLog log;
  log.users = IdMapping(std::move(user_ids));
  log.items = IdMapping(std::move(item_ids));
  log.user_count = static_cast<std::int32_t>(log.users.size());
  log.item_count = static_cast<std::int32_t>(log.items.size());
  log.records.reserve(raw.size());
  for (const auto& r : raw) {
    log.records.push_back({log.users.encode(r.user), log.items.encode(r.item), r.timestamp});
  }
  std::stable_sort(log.records.begin(), log.records.end(), [](const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.timestamp < b.timestamp;
  });
  return log;
}

}  // namespace

LogFormat parse_log_format(std::string_view text) {
  if (text == "movielens" || text == "dat" || text == "MovieLensDat") return LogFormat::MovieLensDat;
  if (text == "tsv" || text == "TSV") return LogFormat::Tsv;
  throw ConfigError("unknown dataset format '" + std::string(text) + "'");
}

IdMapping::IdMapping(std::vector<std::int64_t> originals) : originals_(std::move(originals)) {
  index_.reserve(originals_.size());
  for (std::size_t i = 0; i < originals_.size(); ++i) {
    if (!index_.emplace(originals_[i], static_cast<std::int32_t>(i)).second) {
      throw FormatError("duplicate id " + std::to_string(originals_[i]) + " in mapping");
    }
  }
}

std::int32_t IdMapping::encode(std::int64_t original) const {
  const auto it = index_.find(original);
  if (it == index_.end()) throw PreconditionError("unknown id " + std::to_string(original));
  return it->second;
}

std::vector<std::vector<ItemId>> InteractionLog::sequences() const {
  std::vector<std::vector<ItemId>> out(static_cast<std::size_t>(user_count));
  for (const auto& r : records) out[static_cast<std::size_t>(r.user)].push_back(r.item);
  return out;
}

InteractionLog parse_interactions(std::istream& in, LogFormat format, const LoadOptions& options) {
  std::vector<RawRecord> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty()) continue;
    raw.push_back(parse_row(view, format, line_no));
  }
  return assemble(std::move(raw), options);
}

InteractionLog load_interactions(const std::filesystem::path& path, LogFormat format, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interaction file " + path.string());
  return parse_interactions(in, format, options);
}

void write_id_mapping(const std::filesystem::path& path, const IdMapping& mapping) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write id mapping " + path.string());
  for (std::size_t i = 0; i < mapping.size(); ++i) out << mapping.originals()[i] << '\t' << i << '\n';
}

IdMapping read_id_mapping(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open id mapping " + path.string());
  std::vector<std::int64_t> originals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line, "\t");
    if (fields.size() != 2) throw ParseError("expected original<TAB>remapped", line_no);
    const auto remapped = parse_int(fields[1], line_no, "remapped");
    if (remapped != static_cast<std::int64_t>(originals.size())) {
      throw ParseError("remapped ids must be contiguous and ascending", line_no);
    }
    originals.push_back(parse_int(fields[0], line_no, "original"));
  }
  return IdMapping(std::move(originals));
}

InteractionLog generate_synthetic(const SyntheticSpec& spec) {
  if (spec.users <= 0 || spec.items <= 0 || spec.clusters <= 0 || spec.clusters > spec.items) {
    throw ConfigError("synthetic dataset needs positive users/items and 1 <= clusters <= items");
  }
  if (spec.min_length < 3 || spec.max_length < spec.min_length || spec.max_length > spec.items) {
    throw ConfigError("synthetic sequence lengths must satisfy 3 <= min <= max <= items");
  }
  if (spec.taste_dim < 1) throw ConfigError("synthetic taste_dim must be >= 1");
  Rng rng(derive_seed(spec.seed, {0x5157}));
  const auto num_items = static_cast<std::size_t>(spec.items);
  const auto taste_dim = static_cast<std::size_t>(spec.taste_dim);
  const std::int32_t per_cluster = spec.items / spec.clusters;
  auto cluster_of = [&](std::int32_t item) { return std::min(item / per_cluster, spec.clusters - 1); };

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> item_taste(num_items * taste_dim);
  for (double& v : item_taste) v = normal(rng);
  std::vector<std::int32_t> popularity_rank(num_items);
  std::iota(popularity_rank.begin(), popularity_rank.end(), 0);
  std::shuffle(popularity_rank.begin(), popularity_rank.end(), rng);
  std::vector<double> base_logit(num_items);
  for (std::size_t i = 0; i < num_items; ++i) {
    base_logit[i] = -spec.popularity_exponent * std::log(static_cast<double>(popularity_rank[i]) + 1.0);
  }

  std::uniform_int_distribution<std::int32_t> cluster_dist(0, spec.clusters - 1);
  std::uniform_int_distribution<std::int32_t> length_dist(spec.min_length, spec.max_length);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double taste_scale = spec.taste_strength / std::sqrt(static_cast<double>(taste_dim));

  std::vector<RawRecord> raw;
  std::vector<double> user_taste(taste_dim);
  std::vector<std::pair<double, std::int32_t>> keyed(num_items);
  for (std::int32_t u = 0; u < spec.users; ++u) {
    const std::int32_t cluster = cluster_dist(rng);
    const auto length = static_cast<std::size_t>(length_dist(rng));
    for (double& v : user_taste) v = normal(rng);
    // Gumbel top-k samples `length` distinct items from the softmax.
    for (std::int32_t i = 0; i < spec.items; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      double taste = 0.0;
      for (std::size_t k = 0; k < taste_dim; ++k) taste += user_taste[k] * item_taste[idx * taste_dim + k];
      const double logit =
          base_logit[idx] + taste_scale * taste + (cluster_of(i) == cluster ? spec.cluster_strength : 0.0);
      const double gumbel = -std::log(-std::log(std::max(unit(rng), 1e-300)));
      keyed[idx] = {logit + gumbel, i};
    }
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(length), keyed.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<std::int32_t> chosen;
    for (std::size_t n = 0; n < length; ++n) chosen.push_back(keyed[n].second);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    std::int64_t t = 0;
    for (std::int32_t item : chosen) raw.push_back({u, item, t++});
  }
  return assemble(std::move(raw), LoadOptions{});
}

Split split_sequence(std::span<const ItemId> sequence) {
  if (sequence.size() < 3) {
    throw PreconditionError("leave-one-out split needs at least 3 interactions, got " +
                            std::to_string(sequence.size()));
  }
  Split split;
  split.train_items.assign(sequence.begin(), sequence.end() - 2);
  split.val_item = sequence[sequence.size() - 2];
  split.test_item = sequence.back();
  return split;
}

std::vector<Split> leave_one_out_split(const InteractionLog& log) {
  std::vector<Split> splits;
  const auto seqs = log.sequences();
  splits.reserve(seqs.size());
  for (const auto& seq : seqs) splits.push_back(split_sequence(seq));
  return splits;
}

std::vector<ItemId> ClientProfile::known_items() const {
  std::vector<ItemId> items = train_items;
  items.push_back(val_item);
  items.push_back(test_item);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

std::size_t ClientRegistry::byzantine_count() const {
  return static_cast<std::size_t>(
      std::count_if(clients.begin(), clients.end(), [](const ClientProfile& c) { return c.is_byzantine(); }));
}

ClientRegistry build_client_registry(std::span<const Split> splits, double byzantine_ratio,
                                     std::int32_t k_positives, std::uint64_t seed) {
  if (!(byzantine_ratio >= 0.0) || byzantine_ratio >= 1.0) {
    throw ConfigError("byzantine_ratio must lie in [0, 1), got " + std::to_string(byzantine_ratio));
  }
  if (k_positives < 1) throw ConfigError("k_positives must be >= 1");

  ClientRegistry registry;
  registry.byzantine_ratio = byzantine_ratio;
  registry.seed = seed;
  registry.clients.reserve(splits.size());
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const Split& s = splits[i];
    if (s.train_items.empty()) throw PreconditionError("client " + std::to_string(i) + " has no train items");
    ClientProfile c;
    c.user_id = static_cast<UserId>(i);
    c.train_items = s.train_items;
    c.val_item = s.val_item;
    c.test_item = s.test_item;
    c.k_positives = std::min<std::int32_t>(k_positives, static_cast<std::int32_t>(s.train_items.size()));
    registry.clients.push_back(std::move(c));
  }

  const auto count = static_cast<std::size_t>(std::llround(byzantine_ratio * static_cast<double>(splits.size())));
  std::vector<std::size_t> order(splits.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0xb12a}));
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < count; ++i) registry.clients[order[i]].role = Role::Byzantine;
  return registry;
}

}  // namespace fedattack
