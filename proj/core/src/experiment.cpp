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

#include "fedattack/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <spdlog/spdlog.h>
#include <sstream>

#include "fedattack/rng.hpp"

#ifndef FEDATTACK_BUILD_ID
#define FEDATTACK_BUILD_ID "unknown"
#endif

namespace fedattack {

namespace {

enum ProtocolTag : std::uint64_t {
  kDetectorBalance = 101,
  kDetectorInit = 102,
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = text.find(',');
    const auto piece = trim(text.substr(0, comma));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("key '" + std::string(key) + "': cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("key '" + std::string(key) + "': expected true or false, got '" + std::string(text) + "'");
}

// "auto" (or any negative value) leaves the parameter to resolve_rule.
int parse_auto_int(std::string_view key, std::string_view text) {
  if (text == "auto") return -1;
  return std::max(-1, parse_number<int>(key, text));
}

std::string auto_int(int v) { return v < 0 ? "auto" : std::to_string(v); }

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "synthetic") return DatasetKind::Synthetic;
  if (text == "movielens" || text == "ml-1m" || text == "dat") return DatasetKind::MovieLens;
  if (text == "tsv") return DatasetKind::Tsv;
  throw ConfigError("unknown dataset.format '" + std::string(text) + "' (synthetic, movielens, tsv)");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Synthetic: return "synthetic";
    case DatasetKind::MovieLens: return "movielens";
    case DatasetKind::Tsv: return "tsv";
  }
  return "?";
}

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "pooled") return FeatureMode::Pooled;
  if (text == "raw") return FeatureMode::RawConcat;
  throw ConfigError("unknown detector.features '" + std::string(text) + "' (pooled, raw)");
}

std::string_view to_string(FeatureMode mode) { return mode == FeatureMode::Pooled ? "pooled" : "raw"; }

template <typename T, typename Fmt>
std::string join(const std::vector<T>& values, Fmt&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += fmt(values[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::optional<std::string>(const ExperimentSpec&)> get;
  std::function<void(ExperimentSpec&, std::string_view key, std::string_view value)> set;
};

template <typename T>
Field int_field(std::string key, T ExperimentSpec::*outer, std::int32_t T::*member) {
  return {std::move(key), [=](const ExperimentSpec& s) { return std::optional(std::to_string(s.*outer.*member)); },
          [=](ExperimentSpec& s, std::string_view k, std::string_view v) {
            s.*outer.*member = parse_number<std::int32_t>(k, v);
          }};
}

template <typename T>
Field double_field(std::string key, T ExperimentSpec::*outer, double T::*member) {
  return {std::move(key), [=](const ExperimentSpec& s) { return std::optional(format_double(s.*outer.*member)); },
          [=](ExperimentSpec& s, std::string_view k, std::string_view v) {
            s.*outer.*member = parse_number<double>(k, v);
          }};
}

// One entry per config key, in canonical order. Parsing and serialization
// both walk this table.
const std::vector<Field>& fields() {
  using S = ExperimentSpec;
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    t.push_back({"dataset.format", [](const S& s) { return std::optional(std::string(to_string(s.dataset.kind))); },
                 [](S& s, std::string_view, std::string_view v) { s.dataset.kind = parse_dataset_kind(v); }});
    t.push_back({"dataset.path",
                 [](const S& s) -> std::optional<std::string> {
                   if (s.dataset.kind == DatasetKind::Synthetic && s.dataset.path.empty()) return std::nullopt;
                   return s.dataset.path;
                 },
                 [](S& s, std::string_view, std::string_view v) { s.dataset.path = std::string(v); }});
    t.push_back({"dataset.min_item_interactions",
                 [](const S& s) { return std::optional(std::to_string(s.dataset.min_item_interactions)); },
                 [](S& s, std::string_view k, std::string_view v) {
                   s.dataset.min_item_interactions = parse_number<std::size_t>(k, v);
                 }});
    auto syn_int = [&t](std::string key, std::int32_t SyntheticSpec::*m) {
      t.push_back({std::move(key), [=](const S& s) { return std::optional(std::to_string(s.dataset.synthetic.*m)); },
                   [=](S& s, std::string_view k, std::string_view v) {
                     s.dataset.synthetic.*m = parse_number<std::int32_t>(k, v);
                   }});
    };
    syn_int("dataset.users", &SyntheticSpec::users);
    syn_int("dataset.items", &SyntheticSpec::items);
    syn_int("dataset.clusters", &SyntheticSpec::clusters);
    syn_int("dataset.min_length", &SyntheticSpec::min_length);
    syn_int("dataset.max_length", &SyntheticSpec::max_length);
    auto syn_double = [&t](std::string key, double SyntheticSpec::*m) {
      t.push_back({std::move(key), [=](const S& s) { return std::optional(format_double(s.dataset.synthetic.*m)); },
                   [=](S& s, std::string_view k, std::string_view v) {
                     s.dataset.synthetic.*m = parse_number<double>(k, v);
                   }});
    };
    syn_double("dataset.cluster_strength", &SyntheticSpec::cluster_strength);
    syn_int("dataset.taste_dim", &SyntheticSpec::taste_dim);
    syn_double("dataset.taste_strength", &SyntheticSpec::taste_strength);
    syn_double("dataset.popularity_exponent", &SyntheticSpec::popularity_exponent);
    t.push_back({"dataset.seed", [](const S& s) { return std::optional(std::to_string(s.dataset.synthetic.seed)); },
                 [](S& s, std::string_view k, std::string_view v) {
                   s.dataset.synthetic.seed = parse_number<std::uint64_t>(k, v);
                 }});

    t.push_back(int_field("train.epochs", &S::base, &SimulationConfig::max_epochs));
    t.push_back(int_field("train.batch", &S::base, &SimulationConfig::clients_per_round));
    t.push_back(int_field("train.rounds_per_epoch", &S::base, &SimulationConfig::rounds_per_epoch));
    t.push_back(int_field("train.dim", &S::base, &SimulationConfig::dim));
    t.push_back(double_field("train.lr", &S::base, &SimulationConfig::lr));
    t.push_back(int_field("train.k_positives", &S::base, &SimulationConfig::k_positives));
    t.push_back({"train.predictor", [](const S& s) { return std::optional(std::string(to_string(s.base.predictor))); },
                 [](S& s, std::string_view, std::string_view v) { s.base.predictor = parse_predictor_kind(v); }});
    t.push_back({"train.user_model",
                 [](const S& s) { return std::optional(std::string(to_string(s.base.user_model))); },
                 [](S& s, std::string_view, std::string_view v) { s.base.user_model = parse_user_model_kind(v); }});
    t.push_back({"train.seed", [](const S& s) { return std::optional(std::to_string(s.base.seed)); },
                 [](S& s, std::string_view k, std::string_view v) { s.base.seed = parse_number<std::uint64_t>(k, v); }});
    t.push_back(double_field("train.byzantine_ratio", &S::base, &SimulationConfig::byzantine_ratio));

    t.push_back({"attack.kind", [](const S& s) { return std::optional(std::string(to_string(s.base.attack.kind))); },
                 [](S& s, std::string_view, std::string_view v) { s.base.attack.kind = parse_attack_kind(v); }});
    auto attack_double = [&t](std::string key, double AttackStrategy::*m) {
      t.push_back({std::move(key), [=](const S& s) { return std::optional(format_double(s.base.attack.*m)); },
                   [=](S& s, std::string_view k, std::string_view v) { s.base.attack.*m = parse_number<double>(k, v); }});
    };
    attack_double("attack.pool_fraction", &AttackStrategy::pool_fraction);
    attack_double("attack.lambda", &AttackStrategy::lambda);
    attack_double("attack.gamma_init", &AttackStrategy::gamma_init);
    attack_double("attack.gamma_step", &AttackStrategy::gamma_step);
    t.push_back({"attack.z_override",
                 [](const S& s) -> std::optional<std::string> {
                   if (!s.base.attack.z_override) return std::nullopt;
                   return format_double(*s.base.attack.z_override);
                 },
                 [](S& s, std::string_view k, std::string_view v) { s.base.attack.z_override = parse_number<double>(k, v); }});

    t.push_back({"defense.kind", [](const S& s) { return std::optional(std::string(to_string(s.base.defense.kind))); },
                 [](S& s, std::string_view, std::string_view v) { s.base.defense.kind = parse_defense_kind(v); }});
    auto defense_int = [&t](std::string key, int AggregationRule::*m) {
      t.push_back({std::move(key), [=](const S& s) { return std::optional(auto_int(s.base.defense.*m)); },
                   [=](S& s, std::string_view k, std::string_view v) { s.base.defense.*m = parse_auto_int(k, v); }});
    };
    defense_int("defense.beta", &AggregationRule::beta);
    defense_int("defense.f", &AggregationRule::f);
    defense_int("defense.m_select", &AggregationRule::m_select);
    t.push_back({"defense.tau", [](const S& s) { return std::optional(format_double(s.base.defense.tau)); },
                 [](S& s, std::string_view k, std::string_view v) { s.base.defense.tau = parse_number<double>(k, v); }});

    t.push_back(double_field("detector.threshold", &S::base, &SimulationConfig::detector_threshold));
    t.push_back({"detector.features",
                 [](const S& s) { return std::optional(std::string(to_string(s.base.feature_mode))); },
                 [](S& s, std::string_view, std::string_view v) { s.base.feature_mode = parse_feature_mode(v); }});
    t.push_back(int_field("detector.epochs", &S::detector, &DetectorSettings::epochs));
    t.push_back(double_field("detector.lr", &S::detector, &DetectorSettings::lr));
    t.push_back(int_field("detector.hidden", &S::detector, &DetectorSettings::hidden));

    t.push_back(int_field("eval.k", &S::base, &SimulationConfig::k_eval));
    t.push_back({"eval.exclude_seen", [](const S& s) { return std::optional(std::string(s.base.exclude_seen ? "true" : "false")); },
                 [](S& s, std::string_view k, std::string_view v) { s.base.exclude_seen = parse_bool(k, v); }});

    auto list_field = [&t](std::string key, auto member, auto parse, auto format) {
      t.push_back({std::move(key),
                   [=](const S& s) -> std::optional<std::string> {
                     if ((s.*member).empty()) return std::nullopt;
                     return join(s.*member, format);
                   },
                   [=](S& s, std::string_view k, std::string_view v) {
                     auto& out = s.*member;
                     out.clear();
                     for (auto piece : split_list(v)) out.push_back(parse(k, piece));
                     if (out.empty()) throw ConfigError("key '" + std::string(k) + "': empty list");
                   }});
    };
    list_field("sweep.attacks", &S::attacks, [](std::string_view, std::string_view v) { return parse_attack_kind(v); },
               [](AttackKind a) { return std::string(to_string(a)); });
    list_field("sweep.defenses", &S::defenses,
               [](std::string_view, std::string_view v) { return parse_defense_kind(v); },
               [](DefenseKind d) { return std::string(to_string(d)); });
    list_field("sweep.byzantine_ratios", &S::byzantine_ratios, &parse_number<double>, &format_double);
    list_field("sweep.pool_fractions", &S::pool_fractions, &parse_number<double>, &format_double);
    list_field("sweep.seeds", &S::seeds, &parse_number<std::uint64_t>,
               [](std::uint64_t v) { return std::to_string(v); });
    return t;
  }();
  return table;
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

std::string bucket_label(const HardnessBucket& b) {
  if (b.upper < 0) return std::to_string(b.lower) + "+";
  return std::to_string(b.lower) + "-" + std::to_string(b.upper - 1);
}

}  // namespace

void ExperimentSpec::validate() const {
  base.validate();
  if (dataset.kind != DatasetKind::Synthetic && dataset.path.empty()) {
    throw ConfigError("missing required key 'dataset.path'");
  }
  if (detector.epochs < 1) throw ConfigError("detector.epochs must be >= 1");
  if (!(detector.lr > 0.0)) throw ConfigError("detector.lr must be positive");
  if (detector.hidden < 1) throw ConfigError("detector.hidden must be >= 1");
  for (double r : byzantine_ratios) {
    if (!(r >= 0.0) || r >= 1.0) throw ConfigError("sweep.byzantine_ratios entries must lie in [0, 1)");
  }
  for (double p : pool_fractions) {
    if (!(p > 0.0) || p > 1.0) throw ConfigError("sweep.pool_fractions entries must lie in (0, 1]");
  }
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError("sweep.seeds must be distinct");
}

ExperimentSpec parse_config_text(std::string_view text) {
  std::map<std::string, const Field*, std::less<>> by_key;
  for (const auto& f : fields()) by_key.emplace(f.key, &f);

  ExperimentSpec spec;
  std::set<std::string, std::less<>> seen;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    std::string key(trim(line.substr(0, eq)));
    if (!section.empty()) key = section + "." + key;
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);

    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError("unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
    if (!seen.insert(key).second) {
      throw ConfigError("duplicate key '" + key + "' (line " + std::to_string(line_no) + ")");
    }
    it->second->set(spec, key, value);
  }
  if (!seen.contains("dataset.format")) throw ConfigError("missing required key 'dataset.format'");
  spec.validate();
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string serialize_config(const ExperimentSpec& spec) {
  std::string out;
  for (const auto& f : fields()) {
    if (auto v = f.get(spec)) out += f.key + " = " + *v + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(spec)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

InteractionLog load_dataset(const DatasetSource& source) {
  switch (source.kind) {
    case DatasetKind::Synthetic: return generate_synthetic(source.synthetic);
    case DatasetKind::MovieLens:
    case DatasetKind::Tsv: {
      LoadOptions opts;
      opts.min_item_interactions = source.min_item_interactions;
      const auto format = source.kind == DatasetKind::MovieLens ? LogFormat::MovieLensDat : LogFormat::Tsv;
      return load_interactions(source.path, format, opts);
    }
  }
  throw ConfigError("unhandled dataset kind");
}

ClientRegistry make_registry(const SimulationConfig& config, const InteractionLog& log) {
  const auto splits = leave_one_out_split(log);
  return build_client_registry(splits, config.byzantine_ratio, config.k_positives, config.seed);
}

MetricsTimeline run_single(const SimulationConfig& config, const InteractionLog& log, const TrainingHooks& hooks) {
  const ClientRegistry registry = make_registry(config, log);
  return run_training(config, registry, log, hooks);
}

bool SweepResult::all_succeeded() const {
  return std::none_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.error.has_value(); });
}

std::vector<SweepCell> sweep_cells(const ExperimentSpec& spec) {
  const auto attacks = spec.attacks.empty() ? std::vector{spec.base.attack.kind} : spec.attacks;
  const auto defenses = spec.defenses.empty() ? std::vector{spec.base.defense.kind} : spec.defenses;
  const auto ratios = spec.byzantine_ratios.empty() ? std::vector{spec.base.byzantine_ratio} : spec.byzantine_ratios;
  const auto pools = spec.pool_fractions.empty() ? std::vector{spec.base.attack.pool_fraction} : spec.pool_fractions;
  std::vector<SweepCell> cells;
  for (auto a : attacks) {
    for (auto d : defenses) {
      for (double r : ratios) {
        for (double p : pools) cells.push_back({a, d, r, p});
      }
    }
  }
  return cells;
}

std::vector<std::uint64_t> sweep_seeds(const ExperimentSpec& spec) {
  if (!spec.seeds.empty()) return spec.seeds;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 5; ++i) seeds.push_back(spec.base.seed + i);
  return seeds;
}

SimulationConfig cell_config(const ExperimentSpec& spec, const SweepCell& cell, std::uint64_t seed) {
  SimulationConfig c = spec.base;
  c.attack.kind = cell.attack;
  c.attack.pool_fraction = cell.pool_fraction;
  c.defense.kind = cell.defense;
  c.byzantine_ratio = cell.byzantine_ratio;
  c.seed = seed;
  return c;
}

SweepResult run_sweep(const ExperimentSpec& spec, const InteractionLog& log) {
  SweepResult result;
  const auto seeds = sweep_seeds(spec);
  for (const SweepCell& cell : sweep_cells(spec)) {
    SweepRow row;
    row.cell = cell;
    try {
      std::vector<double> hr, ndcg;
      for (std::uint64_t seed : seeds) {
        const SimulationConfig config = cell_config(spec, cell, seed);
        const MetricsTimeline timeline = run_single(config, log);
        row.runs.push_back({seed, timeline.best()});
        hr.push_back(timeline.best().hr);
        ndcg.push_back(timeline.best().ndcg);
        spdlog::info("{} / {} / ratio {} / pool {} / seed {}: HR {:.4f} nDCG {:.4f}", to_string(cell.attack),
                     to_string(cell.defense), cell.byzantine_ratio, cell.pool_fraction, seed, hr.back(),
                     ndcg.back());
      }
      row.hr_mean = mean_of(hr);
      row.hr_std = sample_std(hr);
      row.ndcg_mean = mean_of(ndcg);
      row.ndcg_std = sample_std(ndcg);
    } catch (const Error& e) {
      row.error = e.what();
      spdlog::error("{} / {} / ratio {} failed: {}", to_string(cell.attack), to_string(cell.defense),
                    cell.byzantine_ratio, e.what());
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

DetectionReport run_detection_protocol(const SimulationConfig& config, const DetectorSettings& settings,
                                       const InteractionLog& log, GradientLogWriter* gradient_log) {
  const ClientRegistry registry = make_registry(config, log);
  DetectionReport report;
  report.attack = config.attack.kind;
  report.seed = config.seed;

  SimulationConfig collect = config;
  collect.detector_enabled = false;
  std::vector<LabeledFeatures> records;
  TrainingHooks phase1;
  phase1.keep_gradients = true;
  phase1.on_round = [&](const RoundRecord& round, const ModelParams& snapshot) {
    for (std::size_t i = 0; i < round.gradients.size(); ++i) {
      // Byzantine clients running no attack send benign gradients.
      const bool malicious = round.roles[i] == Role::Byzantine && config.attack.kind != AttackKind::None;
      records.push_back({featurize(round.gradients[i], round.round_avg, snapshot.layout, config.feature_mode), malicious});
      if (gradient_log != nullptr) {
        gradient_log->append(round.round_index, round.participants[i], round.roles[i], round.gradients[i]);
      }
    }
  };
  report.phase1 = run_training(collect, registry, log, phase1);
  if (gradient_log != nullptr) gradient_log->close();

  for (const auto& r : records) (r.malicious ? report.collected_malicious : report.collected_normal) += 1;
  if (report.collected_malicious == 0 || report.collected_normal == 0) {
    throw PreconditionError("detection needs both malicious and normal gradients; phase 1 collected " +
                            std::to_string(report.collected_malicious) + " malicious and " +
                            std::to_string(report.collected_normal) + " normal");
  }
  const DetectorDataset balanced = balance_dataset(std::move(records), derive_seed(config.seed, {kDetectorBalance}));
  report.training = train_detector(balanced, settings.epochs, settings.lr, derive_seed(config.seed, {kDetectorInit}),
                                   settings.hidden);
  report.training.model.threshold = config.detector_threshold;
  spdlog::info("{}: detector held-out accuracy {:.3f} ({} train / {} held out)", to_string(config.attack.kind),
               report.training.heldout_accuracy, report.training.train_size, report.training.heldout_size);

  SimulationConfig filtered = config;
  filtered.detector_enabled = true;
  TrainingHooks phase2;
  phase2.detector = &report.training.model;
  report.phase2 = run_training(filtered, registry, log, phase2);
  return report;
}

AnalysisResult run_analysis(const SimulationConfig& config, const InteractionLog& log) {
  const ClientRegistry registry = make_registry(config, log);
  AnalysisResult result;
  HardnessAccumulator hardness;
  std::vector<GradientFeatures> rows;
  TrainingHooks hooks;
  hooks.keep_gradients = true;
  hooks.keep_traces = true;
  hooks.on_round = [&](const RoundRecord& round, const ModelParams& snapshot) {
    if (round.epoch != config.max_epochs) return;
    hardness.add(snapshot, registry, round.traces, config.user_model);
    for (std::size_t i = 0; i < round.gradients.size(); ++i) {
      rows.push_back(featurize(round.gradients[i], round.round_avg, snapshot.layout, config.feature_mode));
      result.pca_clients.push_back(round.participants[i]);
      result.pca_roles.push_back(round.roles[i]);
    }
  };
  result.timeline = run_training(config, registry, log, hooks);
  result.hardness = hardness.finish();
  result.pca = pca_project(rows, PcaOptions{.seed = derive_seed(config.seed, {0x9ca})});
  return result;
}

std::string metrics_csv(const MetricsTimeline& timeline, const SimulationConfig& config) {
  std::string out = "epoch,hr5,ndcg5,defense,attack,byz_ratio,seed\n";
  for (const auto& e : timeline.epochs) {
    out += std::to_string(e.epoch) + "," + fixed(e.hr, 6) + "," + fixed(e.ndcg, 6) + "," +
           std::string(to_string(config.defense.kind)) + "," + std::string(to_string(config.attack.kind)) + "," +
           format_double(config.byzantine_ratio) + "," + std::to_string(config.seed) + "\n";
  }
  return out;
}

std::string sweep_table_csv(const SweepResult& result) {
  std::string out = "attack,defense,byz_ratio,hr5_mean,hr5_std,ndcg5_mean,ndcg5_std,pool_fraction\n";
  for (const auto& row : result.rows) {
    if (row.error) continue;
    out += std::string(to_string(row.cell.attack)) + "," + std::string(to_string(row.cell.defense)) + "," +
           format_double(row.cell.byzantine_ratio) + "," + fixed(row.hr_mean, 6) + "," + fixed(row.hr_std, 6) + "," +
           fixed(row.ndcg_mean, 6) + "," + fixed(row.ndcg_std, 6) + "," + format_double(row.cell.pool_fraction) +
           "\n";
  }
  return out;
}

std::string sweep_runs_csv(const SweepResult& result) {
  std::string out = "attack,defense,byz_ratio,pool_fraction,seed,best_epoch,hr5,ndcg5\n";
  for (const auto& row : result.rows) {
    for (const auto& run : row.runs) {
      out += std::string(to_string(row.cell.attack)) + "," + std::string(to_string(row.cell.defense)) + "," +
             format_double(row.cell.byzantine_ratio) + "," + format_double(row.cell.pool_fraction) + "," +
             std::to_string(run.seed) + "," + std::to_string(run.reported.epoch) + "," + fixed(run.reported.hr, 6) +
             "," + fixed(run.reported.ndcg, 6) + "\n";
    }
  }
  return out;
}

std::string hardness_csv(const HardnessProfile& profile) {
  std::string out = "bucket,role,polarity,mean,std,n\n";
  for (const auto& b : profile.buckets) {
    for (int role = 0; role < 2; ++role) {
      for (int polarity = 0; polarity < 2; ++polarity) {
        const MomentStats& s = b.stats[static_cast<std::size_t>(role)][static_cast<std::size_t>(polarity)];
        out += bucket_label(b) + "," + std::string(to_string(static_cast<Role>(role))) + "," +
               (polarity == 0 ? "positive" : "negative") + "," + fixed(s.mean, 6) + "," + fixed(s.std, 6) + "," +
               std::to_string(s.n) + "\n";
      }
    }
  }
  return out;
}

std::string pca_csv(const AnalysisResult& analysis) {
  std::string out = "client,role,x,y\n";
  for (std::size_t i = 0; i < analysis.pca.coords.size(); ++i) {
    out += std::to_string(analysis.pca_clients[i]) + "," + std::string(to_string(analysis.pca_roles[i])) + "," +
           fixed(analysis.pca.coords[i][0], 6) + "," + fixed(analysis.pca.coords[i][1], 6) + "\n";
  }
  return out;
}

std::string detector_accuracy_csv(const std::vector<DetectionReport>& reports) {
  std::string out = "attack,accuracy\n";
  for (const auto& r : reports) {
    out += std::string(to_string(r.attack)) + "," + fixed(r.training.heldout_accuracy, 3) + "\n";
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string manifest_json(std::string_view command, std::string_view config_hash,
                          const std::vector<ManifestEntry>& outputs, double wall_time_seconds) {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["build_id"] = build_id();
  j["wall_time_seconds"] = wall_time_seconds;
  auto& files = j["outputs"] = nlohmann::json::array();
  for (const auto& o : outputs) {
    files.push_back({{"file", o.file}, {"config_hash", o.config_hash}, {"seeds", o.seeds}});
  }
  return j.dump(2) + "\n";
}

std::string_view build_id() { return FEDATTACK_BUILD_ID; }

}  // namespace fedattack
