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

#include "fedattack/fedcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <spdlog/spdlog.h>
#include <string>

#include "fedattack/eval.hpp"
#include "fedattack/parallel.hpp"

namespace fedattack {

namespace {

enum StreamTag : std::uint64_t {
  kEpochOrder = 1,
  kClientStep = 2,
  kAttackerStats = 3,
  kModelInit = 4,
  kPool = 5,
};

class RoundError : public Error {
 public:
  using Error::Error;
};

// Everything a Byzantine client may use this round: its own profile, the
// model snapshot, the candidate pool and the shared per-round statistics.
struct AttackerRound {
  const AttackStrategy* strategy = nullptr;
  const CandidatePool* pool = nullptr;
  const BenignStatEstimate* stats = nullptr;
  const SparseGradient* shared_update = nullptr;
};

SparseGradient byzantine_update(const ClientProfile& client, const ModelParams& params, const AttackerRound& round,
                                UserModelKind user_kind, Rng& rng, SampleTrace* trace) {
  switch (round.strategy->kind) {
    case AttackKind::None: return local_update_benign(client, params, user_kind, rng, trace);
    case AttackKind::FedAttack: return fedattack_update(client, params, *round.pool, user_kind, rng, trace);
    case AttackKind::LabelFlip: return label_flip_update(client, params, user_kind, rng, trace);
    case AttackKind::Gaussian: return gaussian_update(client, params, *round.stats, user_kind, rng);
    case AttackKind::Lie:
    case AttackKind::StatOpt:
    case AttackKind::DynOpt: return *round.shared_update;
  }
  throw ConfigError("unhandled attack kind");
}

double l2_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool better_validation(const EpochMetrics& a, const EpochMetrics& b) {
  if (a.val_hr != b.val_hr) return a.val_hr > b.val_hr;
  return a.val_ndcg > b.val_ndcg;
}

}  // namespace

void SimulationConfig::validate() const {
  if (clients_per_round < 1) throw ConfigError("clients_per_round must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (rounds_per_epoch < 0) throw ConfigError("rounds_per_epoch must be >= 0");
  if (!(byzantine_ratio >= 0.0) || byzantine_ratio >= 1.0) throw ConfigError("byzantine_ratio must lie in [0, 1)");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (k_eval < 1) throw ConfigError("k_eval must be >= 1");
  if (k_positives < 1) throw ConfigError("k_positives must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(detector_threshold >= 0.0)) throw ConfigError("detector.threshold must be >= 0");
  if (!(defense.tau > 0.0)) throw ConfigError("defense.tau must be positive");
  attack.validate();
}

const EpochMetrics& MetricsTimeline::best() const {
  if (best_epoch < 0 || static_cast<std::size_t>(best_epoch) >= epochs.size()) {
    throw PreconditionError("timeline has no evaluated epoch");
  }
  return epochs[static_cast<std::size_t>(best_epoch)];
}

std::vector<std::vector<UserId>> sample_rounds(const ClientRegistry& registry, std::int32_t clients_per_round,
                                               Rng& rng) {
  if (registry.clients.empty()) throw PreconditionError("cannot sample rounds from an empty registry");
  if (clients_per_round < 1) throw ConfigError("clients_per_round must be >= 1");
  std::vector<UserId> order(registry.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<UserId>> rounds;
  const auto batch = static_cast<std::size_t>(clients_per_round);
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    rounds.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return rounds;
}

Vec aggregate_round(std::span<const SparseGradient> gradients, const AggregationRule& rule, const ParamLayout& layout) {
  if (gradients.empty()) throw PreconditionError("aggregate_round: no gradients");
  if (rule.kind == DefenseKind::Mean || rule.kind == DefenseKind::NormBound) {
    if (rule.kind == DefenseKind::NormBound && !(rule.tau > 0.0)) throw ConfigError("norm bound tau must be positive");
    // Coordinate-wise sums only touch stored rows; untouched coordinates
    // would add exact zeros, so this matches the dense aggregators.
    Vec out(layout.total_size(), 0.0);
    for (const auto& g : gradients) {
      double scale = 1.0;
      if (rule.kind == DefenseKind::NormBound) {
        double sq = 0.0;
        for (const auto& [id, row] : g.user_rows)
          for (double v : row) sq += v * v;
        for (const auto& [id, row] : g.item_rows)
          for (double v : row) sq += v * v;
        for (double v : g.predictor_grad) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > rule.tau) scale = rule.tau / norm;
      }
      auto add = [&](std::size_t offset, const Vec& row) {
        for (std::size_t k = 0; k < row.size(); ++k) out[offset + k] += scale * row[k];
      };
      for (const auto& [id, row] : g.user_rows) add(layout.user_offset(id), row);
      for (const auto& [id, row] : g.item_rows) add(layout.item_offset(id), row);
      if (!g.predictor_grad.empty()) {
        if (g.predictor_grad.size() != layout.predictor_size()) {
          throw PreconditionError("aggregate_round: predictor gradient size mismatch");
        }
        add(layout.predictor_offset(), g.predictor_grad);
      }
    }
    const double inv = 1.0 / static_cast<double>(gradients.size());
    for (double& v : out) v *= inv;
    return out;
  }
  std::vector<Vec> dense;
  dense.reserve(gradients.size());
  for (const auto& g : gradients) dense.push_back(g.densify(layout));
  return aggregate(dense, rule);
}

MetricsTimeline run_training(const SimulationConfig& config, const ClientRegistry& registry,
                             const InteractionLog& log, const TrainingHooks& hooks) {
  config.validate();
  if (registry.clients.empty()) throw PreconditionError("run_training: empty client registry");
  if (config.detector_enabled && hooks.detector == nullptr) {
    throw ConfigError("detector enabled but no detector model supplied");
  }
  const auto num_users = static_cast<std::int32_t>(registry.size());
  ModelParams params = init_params(num_users, log.item_count, config.dim, config.predictor,
                                   derive_seed(config.seed, {kModelInit}));
  const ParamLayout layout = params.layout;
  AdamState adam = AdamState::zeros(layout.total_size(), AdamHyper{config.lr});
  const CandidatePool pool =
      CandidatePool::sample(log.item_count, config.attack.pool_fraction, derive_seed(config.seed, {kPool}));

  EvalOptions eval{config.user_model, config.k_eval, config.exclude_seen, EvalTarget::Test, config.threads};
  EvalOptions val_eval = eval;
  val_eval.target = EvalTarget::Validation;

  MetricsTimeline timeline;
  std::int64_t round_index = 0;
  for (std::int32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng order_rng = make_rng(config.seed, {kEpochOrder, static_cast<std::uint64_t>(epoch)});
    auto rounds = sample_rounds(registry, config.clients_per_round, order_rng);
    if (config.rounds_per_epoch > 0 && rounds.size() > static_cast<std::size_t>(config.rounds_per_epoch)) {
      rounds.resize(static_cast<std::size_t>(config.rounds_per_epoch));
    }

    for (auto& participants : rounds) {
      try {
        std::sort(participants.begin(), participants.end());
        const std::size_t n = participants.size();
        auto client_rng = [&](UserId id, StreamTag tag) {
          return make_rng(config.seed, {tag, static_cast<std::uint64_t>(round_index), static_cast<std::uint64_t>(id)});
        };

        std::vector<const ClientProfile*> byz;
        for (UserId id : participants) {
          const ClientProfile& c = registry.clients[static_cast<std::size_t>(id)];
          if (c.is_byzantine()) byz.push_back(&c);
        }

        AttackerRound attacker{&config.attack, &pool, nullptr, nullptr};
        BenignStatEstimate stats;
        SparseGradient shared;
        if (!byz.empty() && config.attack.needs_stats()) {
          std::vector<Rng> rngs;
          for (const auto* c : byz) rngs.push_back(client_rng(c->user_id, kAttackerStats));
          std::vector<Vec> benign_style;
          stats = estimate_benign_stats(byz, params, config.user_model, rngs, &benign_style);
          if (stats.degenerate) {
            ++timeline.degenerate_stat_rounds;
            spdlog::debug("round {}: one Byzantine client, attacker std set to 0", round_index);
          }
          attacker.stats = &stats;
          const int m = static_cast<int>(byz.size());
          const int round_size = static_cast<int>(n);
          switch (config.attack.kind) {
            case AttackKind::Lie:
              shared = SparseGradient::sparsify(layout, lie_update(stats, round_size, m, config.attack.z_override));
              break;
            case AttackKind::StatOpt:
              shared = SparseGradient::sparsify(layout, stat_opt_update(stats, config.attack.lambda));
              break;
            case AttackKind::DynOpt:
              shared = SparseGradient::sparsify(
                  layout, dyn_opt_update(stats, benign_style, m, config.attack.gamma_init, config.attack.gamma_step));
              break;
            default: break;
          }
          shared.sample_count = 1;
          attacker.shared_update = &shared;
        }

        RoundRecord record;
        record.epoch = epoch;
        record.round_index = round_index;
        record.participants = participants;
        std::vector<SparseGradient> gradients(n);
        std::vector<SampleTrace> traces(hooks.keep_traces ? n : 0);
        parallel_for(n, config.threads, [&](std::size_t i) {
          const ClientProfile& c = registry.clients[static_cast<std::size_t>(participants[i])];
          Rng rng = client_rng(c.user_id, kClientStep);
          SampleTrace* trace = hooks.keep_traces ? &traces[i] : nullptr;
          gradients[i] = c.is_byzantine() ? byzantine_update(c, params, attacker, config.user_model, rng, trace)
                                          : local_update_benign(c, params, config.user_model, rng, trace);
        });
        for (UserId id : participants) record.roles.push_back(registry.clients[static_cast<std::size_t>(id)].role);

        Vec round_avg;
        if (config.detector_enabled || hooks.keep_gradients) {
          round_avg = aggregate_round(gradients, AggregationRule{DefenseKind::Mean}, layout);
        }

        std::vector<SparseGradient> accepted;
        if (config.detector_enabled) {
          const FilterResult filter = detect_and_filter(gradients, participants, round_avg, layout, *hooks.detector,
                                                        config.detector_threshold, config.feature_mode);
          record.filtered = filter.flagged;
          timeline.flagged_gradients += static_cast<std::int64_t>(filter.flagged.size());
          for (UserId id : filter.flagged) {
            if (registry.clients[static_cast<std::size_t>(id)].is_byzantine()) ++timeline.flagged_byzantine;
          }
          if (filter.kept.size() == n) {
            accepted = gradients;
          } else {
            for (std::size_t i : filter.kept) accepted.push_back(gradients[i]);
          }
        } else {
          accepted = gradients;
        }

        const AggregationRule rule = resolve_rule(config.defense, accepted.size(), config.byzantine_ratio);
        const Vec update = aggregate_round(accepted, rule, layout);
        record.update_norm = l2_norm(update);

        if (hooks.on_round) {
          if (hooks.keep_gradients) {
            record.gradients = std::move(gradients);
            record.round_avg = std::move(round_avg);
          }
          if (hooks.keep_traces) record.traces = std::move(traces);
          hooks.on_round(record, params);
        }
        adam_apply(adam, params, update);
        ++round_index;
      } catch (const Error& e) {
        throw RoundError("epoch " + std::to_string(epoch) + ", round " + std::to_string(round_index) + ": " +
                         e.what());
      }
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    const EpochEval test = evaluate_epoch(params, registry, eval);
    const EpochEval val = evaluate_epoch(params, registry, val_eval);
    metrics.hr = test.hr;
    metrics.ndcg = test.ndcg;
    metrics.val_hr = val.hr;
    metrics.val_ndcg = val.ndcg;
    timeline.epochs.push_back(metrics);
    if (timeline.best_epoch < 0 || better_validation(metrics, timeline.best())) {
      timeline.best_epoch = static_cast<std::int32_t>(timeline.epochs.size() - 1);
    }
    if (hooks.on_epoch) hooks.on_epoch(metrics, params);
  }
  timeline.rounds = round_index;
  if (timeline.degenerate_stat_rounds > 0) {
    spdlog::warn("{} rounds had a single Byzantine client; attacker std fell back to 0",
                 timeline.degenerate_stat_rounds);
  }
  return timeline;
}

}  // namespace fedattack
