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
#include <initializer_list>
#include <random>

namespace fedattack {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent streams from a base seed.
std::uint64_t mix_seed(std::uint64_t value);

// Derives a seed from a base seed and a list of coordinates (epoch, round,
// client, stream tag, ...). Same inputs always give the same stream, which
// keeps per-client randomness independent of thread scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> coords) {
  return Rng(derive_seed(base, coords));
}

}  // namespace fedattack
