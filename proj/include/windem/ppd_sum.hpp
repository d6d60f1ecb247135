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

#include <span>
#include <vector>

#include "windem/consensus.hpp"
#include "windem/paillier.hpp"
#include "windem/protocol_phases.hpp"
#include "windem/topology.hpp"

namespace windem {

// Privacy-preserving distributed summation: a ciphertext-protected first
// averaging iteration (no node ever sees a neighbor's initial value in
// plaintext), plain consensus afterwards, and a final scaling by M.

struct PpdSumConfig {
  ConsensusConfig consensus;
  int key_bits = 512;
  int fractional_bits = 40;
  int integer_bits = 24;
  uint64_t seed = 1;
};

struct PpdSumResult {
  std::vector<VecXd> per_node;  // each node's total, identical after finalize
  int rounds = 0;
};

/// Module-level operation: every node contributes a (vector) value; all
/// nodes obtain the elementwise total.
PpdSumResult ppd_sum(const std::vector<VecXd>& locals,
                     const Topology& topology, const MatXd& weights,
                     const PpdSumConfig& config);

/// Scalar convenience overload.
PpdSumResult ppd_sum(const VecXd& locals, const Topology& topology,
                     const MatXd& weights, const PpdSumConfig& config);

/// The node-level first-iteration exchange: multiply the neighbors'
/// ciphertexts with an encryption of a random mask, have the key holder
/// decrypt the aggregate, and remove the mask. Returns the weighted
/// neighbor sum. The caller provides the neighbors' encrypted values.
double secure_local_sum(std::span<const paillier::Ciphertext> neighbor_cts,
                        const paillier::Keypair& designated_keypair,
                        const paillier::FixedPointCodec& codec,
                        uint64_t mask_seed);

}  // namespace windem
