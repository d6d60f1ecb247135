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

#include <cstdint>
#include <vector>

#include "windem/common.hpp"

namespace windem {

// Random-hyperplane signatures: an L-bit hash of a private vector whose
// Hamming distance to another hash estimates the angle between the vectors.
// The projection directions are standard normal, regenerated from a shared
// seed, and never transmitted.

struct ProjectionSet {
  uint64_t seed = 0;
  int length = 0;  // vector dimension N
  int bits = 0;    // signature length L

  /// The l-th projection direction (bit-identical on every node).
  VecXd column(int l) const;
};

struct SignHash {
  int owner = -1;  // index of the hashed vector, if meaningful
  int bits = 0;
  std::vector<uint32_t> words;  // ceil(bits/32), little-endian bit packing

  bool bit(int l) const { return (words[l / 32] >> (l % 32)) & 1u; }
};

/// Signature of `v`: bit l is 1 iff the projection onto direction l is
/// nonnegative (ties map to 1).
SignHash sign_hash(const VecXd& v, const ProjectionSet& projections,
                   int owner = -1);

int hamming_distance(const SignHash& a, const SignHash& b);

/// Angle estimate in [0, pi]: pi * Hamming / L.
double angle_from_hashes(const SignHash& a, const SignHash& b);

/// Inner product from the angle and the two norms.
double inner_product_from(double beta, double norm_a, double norm_b);

/// Hash words as consensus payload entries and back (lossless: 32-bit
/// integers are exact doubles).
VecXd words_to_reals(const std::vector<uint32_t>& words);
std::vector<uint32_t> reals_to_words(const VecXd& reals);

}  // namespace windem
