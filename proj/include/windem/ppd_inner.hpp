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

#include <vector>

#include "windem/consensus.hpp"
#include "windem/protocol_phases.hpp"
#include "windem/sign_hash.hpp"
#include "windem/topology.hpp"

namespace windem {

/// Estimated pairwise inner products of the 2M private vectors. The
/// diagonal is exact (norms are shared); off-diagonal entries come from the
/// hash-based angle estimates.
struct GramEstimate {
  MatXd values;  // 2M x 2M, symmetric
};

struct InnerProductConfig {
  uint64_t projection_seed = 0;
  int bits = 2048;  // signature length L
};

/// Local assembly step every node runs on the disseminated hashes and
/// norms; bit-identical inputs give bit-identical estimates.
GramEstimate gram_from_hashes(const std::vector<SignHash>& hashes,
                              const VecXd& norms);

/// Full exchange: node m hashes its two private vectors (indices m and
/// M+m), hash chunks and norms are disseminated via consensus broadcast,
/// and every node assembles the same Gram estimate. `vectors` holds all 2M
/// private vectors indexed by owner; locality is preserved because each
/// vector is only read to form its owner's hash and norm.
GramEstimate ppd_inner_products(const std::vector<VecXd>& vectors,
                                const Topology& topology,
                                const InnerProductConfig& config,
                                const ConsensusConfig& consensus,
                                PhaseExecutor* executor = nullptr);

}  // namespace windem
