//
// Copyright 2026 The userdp-sco Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef USERDP_RNG_HPP
#define USERDP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace userdp {

/// SplitMix64 finalizer; used to hash (seed, path) tuples into stream keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream. A stream is identified by (master_seed, path);
/// `derive` appends path elements and returns an independent child stream.
/// Derivation depends only on the identity, never on how many draws the
/// parent has consumed, so (seed, path) reproduces draws bit-for-bit and
/// sibling streams can be consumed in any order or in parallel.
///
/// All transforms (uniform, normal, Laplace, bounded ints) are implemented
/// here on top of std::mt19937_64, whose output sequence is pinned by the
/// standard; std::*_distribution is avoided because its mapping is
/// implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed)
      : key_(mix64(master_seed ^ 0x75736572647053ULL)), engine_(key_) {}

  RngStream derive(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t k = key_;
    for (std::uint64_t p : path) k = mix64(k ^ mix64(p));
    return RngStream(k, FromKey{});
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log argument.
  double uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Laplace with scale b via inverse CDF.
  double laplace(double b) {
    const double u = uniform01();
    if (u < 0.5) return b * std::log(std::max(2.0 * u, 0x1.0p-1000));
    return -b * std::log(std::max(2.0 * (1.0 - u), 0x1.0p-1000));
  }

  /// Uniform integer in [0, n); masked rejection keeps it unbiased and
  /// platform-stable.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    if (n == 1) return 0;
    std::uint64_t mask = ~0ULL >> __builtin_clzll(n - 1);
    for (;;) {
      const std::uint64_t v = next_u64() & mask;
      if (v < n) return v;
    }
  }

  /// Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(idx[i - 1], idx[j]);
    }
    return idx;
  }

 private:
  struct FromKey {};
  RngStream(std::uint64_t key, FromKey) : key_(key), engine_(key) {}

  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace userdp

#endif  // USERDP_RNG_HPP
