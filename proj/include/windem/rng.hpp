// Copyright 2026 The Windem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace windem {

// All randomness in the library is counter-based: a draw is a pure function
// of (key, counter). This keeps results identical across thread counts and
// lets every node of a simulated network regenerate shared randomness from a
// seed instead of shipping it.

namespace detail {

inline constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives an independent stream key from a root seed, a purpose tag and up
/// to two integer qualifiers.
inline uint64_t derive_key(uint64_t root, std::string_view purpose,
                           uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  uint64_t k = detail::splitmix64(root ^ h);
  k = detail::splitmix64(k ^ detail::splitmix64(a));
  return detail::splitmix64(k ^ detail::splitmix64(b ^ 0x5851f42d4c957f2dull));
}

/// Stateless counter-based generator. Random access by counter; thread-safe.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}

  uint64_t bits(uint64_t counter) const {
    return detail::splitmix64(key_ ^ detail::splitmix64(counter + 1));
  }

  /// Uniform in the open interval (0, 1).
  double uniform01(uint64_t counter) const {
    // 53 mantissa bits, offset by half an ulp so 0 is never produced.
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform01(counter);
  }

  /// Standard normal via Box-Muller; consumes counters 2c and 2c+1.
  double normal(uint64_t counter) const {
    const double u1 = uniform01(2 * counter);
    const double u2 = uniform01(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Index in [0, n) without modulo bias worth worrying about for n << 2^64.
  uint64_t index(uint64_t counter, uint64_t n) const {
    return bits(counter) % n;
  }

  uint64_t key() const { return key_; }

 private:
  uint64_t key_;
};

/// Sequential convenience wrapper for call sites that do not need random
/// access (key generation, ad hoc draws).
class SeqRng {
 public:
  explicit SeqRng(uint64_t key) : rng_(key) {}

  uint64_t next_bits() { return rng_.bits(counter_++); }
  double next_uniform01() { return rng_.uniform01(counter_++); }
  double next_normal() {
    const double z = rng_.normal(counter_);
    ++counter_;
    return z;
  }

 private:
  CounterRng rng_;
  uint64_t counter_ = 0;
};

}  // namespace windem
