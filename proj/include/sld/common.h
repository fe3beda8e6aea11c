// Copyright 2026 The sld Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SLD_COMMON_H_
#define SLD_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sld {

/// Base class of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented contract (bad config, bad manifest content,
/// wrong label mix, ...). The CLI maps this to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(int line, const std::string &what)
      : ValidationError("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// A model, file or external resource could not be loaded.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Deterministic random stream.
///
/// Wraps mt19937_64 and draws uniforms/normals from raw 64-bit words so that
/// the sequence does not depend on the standard library's distribution
/// implementations. `split(k)` is a pure function of (seed, k), never of how
/// much of the parent stream has been consumed.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0);

  uint64_t seed() const { return seed_; }
  Rng split(uint64_t stream) const;

  uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);
  /// Standard normal (Box-Muller, no cached second value).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T> &v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }
  /// First n entries of a uniformly random permutation of [0, size).
  std::vector<size_t> sample_without_replacement(size_t size, size_t n);

  std::string state() const;
  void set_state(const std::string &state);

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

uint64_t splitmix64(uint64_t x);

/// 64-bit FNV-1a; stable across platforms, used for config fingerprints.
uint64_t fnv1a64(const std::string &data);
std::string hex64(uint64_t v);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace sld

#endif  // SLD_COMMON_H_
