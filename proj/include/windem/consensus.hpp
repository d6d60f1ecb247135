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

#include "windem/common.hpp"
#include "windem/topology.hpp"

namespace windem {

// Synchronous average consensus with Metropolis weights. Node values are
// rows of an M x D matrix; every round replaces a node's value with the
// weighted average of its own and its active neighbors' values. When an edge
// is cut, both endpoints fold the lost weight back into their own
// self-coefficient, which conserves the network total.

struct ConsensusConfig {
  double tolerance = 1e-10;  // max componentwise spread across nodes
  int max_rounds = 0;        // 0 picks 10 * nodes * diameter
  // After the spread drops below tolerance, run nodes-1 rounds of
  // componentwise max exchange. That leaves every node with bit-identical
  // values, which downstream phases rely on.
  bool finalize_max = true;
};

struct ConsensusRun {
  MatXd values;            // row per node
  int rounds = 0;          // averaging rounds performed
  int finalize_rounds = 0; // max-exchange rounds performed
  double spread = 0.0;     // spread when averaging stopped
};

/// One node's averaging update. `neighbor_values` is aligned with
/// `neighbors` (ascending ids); a null pointer marks an edge inactive this
/// round. Shared by the direct driver and the network simulator so both
/// produce identical floating-point results.
VecXd consensus_update(int m, const VecXd& own, const MatXd& weights,
                       const std::vector<int>& neighbors,
                       const std::vector<const VecXd*>& neighbor_values);

/// Componentwise max over own and active neighbor values.
VecXd max_update(const VecXd& own,
                 const std::vector<const VecXd*>& neighbor_values);

/// Largest componentwise spread (max minus min over nodes).
double max_spread(const MatXd& values);

/// One synchronous round over all nodes.
MatXd consensus_round(const MatXd& values, const MatXd& weights,
                      const Topology& topology, const CutSet& cuts = {});

/// Runs rounds until the spread is below tolerance, then the optional
/// max-exchange finalization. Every node's value ends within tolerance of
/// the average of the initial rows. Throws ConvergenceError if the round
/// budget is exhausted.
ConsensusRun run_consensus(const MatXd& init, const MatXd& weights,
                           const Topology& topology,
                           const ConsensusConfig& config = {},
                           const CutSet& cuts = {});

/// Disseminates per-node entries of a shared vector: component d of `init`
/// is nonzero only in the owner's row. Consensus plus max finalization and a
/// multiply by M recover the full vector identically at every node.
/// Integer-valued payloads are rounded, with a guard on the residual.
struct BroadcastResult {
  VecXd recovered;
  int rounds = 0;
};
BroadcastResult consensus_broadcast(const MatXd& init, const MatXd& weights,
                                    const Topology& topology,
                                    const ConsensusConfig& config,
                                    bool integer_valued,
                                    const CutSet& cuts = {});

}  // namespace windem
