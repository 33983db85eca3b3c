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

#include <benchmark/benchmark.h>

#include <random>

#include "fedattack/attacks.hpp"
#include "fedattack/defenses.hpp"
#include "fedattack/experiment.hpp"
#include "fedattack/fedcore.hpp"

namespace fedattack {
namespace {

std::vector<Vec> random_updates(std::size_t n, std::size_t d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<Vec> out(n, Vec(d));
  for (auto& u : out)
    for (double& v : u) v = normal(rng);
  return out;
}

void BM_Aggregate(benchmark::State& state, DefenseKind kind) {
  const auto updates = random_updates(16, static_cast<std::size_t>(state.range(0)));
  const auto rule = resolve_rule(AggregationRule{.kind = kind}, updates.size(), 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(updates, rule));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 16);
}
BENCHMARK_CAPTURE(BM_Aggregate, mean, DefenseKind::Mean)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK_CAPTURE(BM_Aggregate, median, DefenseKind::Median)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK_CAPTURE(BM_Aggregate, trimmed_mean, DefenseKind::TrimmedMean)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK_CAPTURE(BM_Aggregate, krum, DefenseKind::Krum)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK_CAPTURE(BM_Aggregate, multi_krum, DefenseKind::MultiKrum)->Arg(1 << 12)->Arg(1 << 15);

void BM_HardestNegatives(benchmark::State& state) {
  const auto items = static_cast<std::int32_t>(state.range(0));
  const auto params = init_params(1, items, 32, PredictorKind::DotProduct, 3);
  const auto pool = CandidatePool::full(items);
  const Vec user(32, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(hardest_negatives(params, user, 10, pool, {}));
}
BENCHMARK(BM_HardestNegatives)->Arg(500)->Arg(4000);

void BM_TrainingEpoch(benchmark::State& state, AttackKind attack) {
  DatasetSource source;
  const auto log = load_dataset(source);
  SimulationConfig config;
  config.max_epochs = 1;
  config.dim = 32;
  config.byzantine_ratio = 0.05;
  config.attack.kind = attack;
  const auto registry = make_registry(config, log);
  for (auto _ : state) benchmark::DoNotOptimize(run_training(config, registry, log));
}
BENCHMARK_CAPTURE(BM_TrainingEpoch, none, AttackKind::None)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainingEpoch, fedattack, AttackKind::FedAttack)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainingEpoch, lie, AttackKind::Lie)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace fedattack

BENCHMARK_MAIN();
