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

// Randomized comparisons of the core implementations against the reference
// implementations in oracles.hpp. Shared by the acceptance suite and the
// `fedattack oracle` command.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fedattack::oracles {

struct CheckResult {
  bool pass = false;
  std::string detail;
};

// BPR gradients vs central differences (h = 1e-5), 100 d=4 instances per
// user-model x predictor pair; relative error below 1e-4.
CheckResult check_gradients();
// Median, trimmed mean, Krum and Multi-Krum on 500 instances, n <= 8, d <= 16.
CheckResult check_aggregators();
// Hard-sample retrieval vs a stable argsort on 1,000 pools of at most 500 items.
CheckResult check_retrieval();
// HR@5 and nDCG@5 for ranks 1..20.
CheckResult check_metrics();
// Power-iteration eigenvalues vs a dense solver on 100 random 50x8 matrices.
CheckResult check_pca();

struct NamedCheck {
  std::string_view name;
  std::function<CheckResult()> run;
};
std::vector<NamedCheck> all_checks();

}  // namespace fedattack::oracles
