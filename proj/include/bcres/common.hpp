// Copyright 2026  The bcres Authors
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

#ifndef BCRES_COMMON_HPP_
#define BCRES_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace bcres {

// Raised for invalid shapes, hyperparameters, or flag combinations.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for unreadable, corrupt, or mismatched files. CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a training run must abort (e.g. NaN loss). CLI exit code 1.
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from up to three components.
// Used to give every utterance / step / subsystem its own RNG so that
// results do not depend on evaluation order or worker count.
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t s = splitmix64(a);
  s = splitmix64(s ^ (b + 0x9e3779b97f4a7c15ull));
  s = splitmix64(s ^ (c + 0x7f4a7c159e3779b9ull));
  return s;
}

inline Rng make_rng(uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  return Rng(mix_seed(a, b, c));
}

}  // namespace bcres

#endif  // BCRES_COMMON_HPP_
