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
#include <optional>
#include <vector>

#include "windem/em.hpp"
#include "windem/ppd_inner.hpp"
#include "windem/protocol_phases.hpp"
#include "windem/simnet.hpp"
#include "windem/topology.hpp"

namespace windem {

// Distributed EM over vertically partitioned data: every node owns two
// columns (its power and forecast) of the shared sample rows. The E-step
// decomposes into two nested privacy-preserving summations; the M-step into
// local moments, consensus broadcasts, and hash-based inner products for the
// covariance off-diagonals.

/// One node's private columns.
struct VerticalSlice {
  int node = -1;
  MatXd columns;  // N x 2: (power, forecast), rows aligned across nodes

  int samples() const { return int(columns.rows()); }
};

enum class PpdMode {
  kExactOracle,    // transport replaced by exact sums/gathers, exact Gram
  kFullProtocol,   // ciphertexts, consensus and hashes on the simulator
};

struct PpdEmConfig {
  EmConfig em;  // components, tolerance, floor, seed; init is pooled-jitter
  PpdMode mode = PpdMode::kFullProtocol;
  int hash_bits = 2048;  // signature length L for the M-step inner products
  ConsensusConfig consensus;
  int key_bits = 512;
  int fractional_bits = 40;
  int integer_bits = 24;
  /// Exact inner products while keeping protocol transport (test hook).
  bool exact_gram = false;
};

struct PpdEmResult {
  std::vector<GmmParams> theta_per_node;
  EmTrace trace;
  Accounting accounting;  // zeros in exact-oracle mode
  PrivacyLog privacy;     // empty in exact-oracle mode
};

/// Scalar local term of the first E-step summation: row i of the
/// precision-weighted deviation contributed by this node's two columns.
double local_first_sum_term(const VerticalSlice& slice, const MatXd& precision,
                            const VecXd& mean, int n, int i);

/// All first-summation terms of one node, flattened as [n * 2M + i].
VecXd local_first_sum_terms(const VerticalSlice& slice, const MatXd& precision,
                            const VecXd& mean);

/// Second-summation terms e_n of one node given the recovered first sums.
VecXd local_second_sum_terms(const VerticalSlice& slice, const VecXd& tau,
                             const VecXd& mean);

/// Distributed E-step: responsibilities as computed by every node (given
/// identical public parameters). Uses exact or in-process protocol
/// transport per config.mode.
std::vector<Responsibilities> distributed_e_step(
    const std::vector<VerticalSlice>& slices, const GmmParams& theta,
    const Topology& topology, const PpdEmConfig& config);

/// Distributed M-step: updated parameters at every node given identical
/// responsibilities.
std::vector<GmmParams> distributed_m_step(
    const std::vector<VerticalSlice>& slices, const Responsibilities& resp,
    const Topology& topology, const PpdEmConfig& config);

/// Full distributed fit. In full-protocol mode the run is hosted on the
/// message simulator (with optional link failures) and returns its
/// accounting and privacy log.
PpdEmResult ppd_em_fit(const std::vector<VerticalSlice>& slices,
                       const Topology& topology, const PpdEmConfig& config,
                       const FailurePlan& failures = {});

}  // namespace windem
