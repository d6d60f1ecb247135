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

#include "windem/sign_hash.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "windem/kernels.hpp"
#include "windem/rng.hpp"

namespace windem {

VecXd ProjectionSet::column(int l) const {
  const CounterRng rng(derive_key(seed, "gamma", uint64_t(l)));
  VecXd out(length);
  for (int i = 0; i < length; ++i) out[i] = rng.normal(i);
  return out;
}

SignHash sign_hash(const VecXd& v, const ProjectionSet& projections,
                   int owner) {
  if (v.size() != projections.length)
    throw DimensionError("sign_hash: vector length does not match the "
                         "projection set");
  SignHash h;
  h.owner = owner;
  h.bits = projections.bits;
  h.words = kernels::sign_hash_words(v, projections.seed, projections.bits);
  return h;
}

int hamming_distance(const SignHash& a, const SignHash& b) {
  if (a.bits != b.bits || a.words.size() != b.words.size())
    throw DimensionError("hamming_distance: signature lengths differ");
  int count = 0;
  for (size_t w = 0; w < a.words.size(); ++w)
    count += std::popcount(a.words[w] ^ b.words[w]);
  return count;
}

double angle_from_hashes(const SignHash& a, const SignHash& b) {
  return std::numbers::pi * hamming_distance(a, b) / a.bits;
}

double inner_product_from(double beta, double norm_a, double norm_b) {
  return norm_a * norm_b * std::cos(beta);
}

VecXd words_to_reals(const std::vector<uint32_t>& words) {
  VecXd out(words.size());
  for (size_t w = 0; w < words.size(); ++w) out[w] = double(words[w]);
  return out;
}

std::vector<uint32_t> reals_to_words(const VecXd& reals) {
  std::vector<uint32_t> out(reals.size());
  for (int w = 0; w < reals.size(); ++w) {
    const double v = reals[w];
    if (v < 0.0 || v > 4294967295.0 || v != std::floor(v))
      throw Error("hash payload entry is not a 32-bit word");
    out[w] = uint32_t(v);
  }
  return out;
}

}  // namespace windem
