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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedattack {

using UserId = std::int32_t;
using ItemId = std::int32_t;
using Vec = std::vector<double>;

enum class Role : std::uint8_t { Benign = 0, Byzantine = 1 };

enum class PredictorKind : std::uint8_t { DotProduct = 0, Mlp = 1 };

enum class UserModelKind : std::uint8_t { IdEmbedding = 0, SeqMean = 1 };

// Base for every error raised by the library. Subclasses name the failure
// category so callers (and the CLI exit path) can tell them apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string_view what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + std::string(what)), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class AttackSetupError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

std::string_view to_string(Role role);
std::string_view to_string(PredictorKind kind);
std::string_view to_string(UserModelKind kind);

PredictorKind parse_predictor_kind(std::string_view text);
UserModelKind parse_user_model_kind(std::string_view text);

}  // namespace fedattack
