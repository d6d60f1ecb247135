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
#include <utility>
#include <vector>

#include "windem/common.hpp"
#include "windem/gmm.hpp"

namespace windem {

/// J x N posterior component probabilities; every column sums to 1.
using Responsibilities = MatXd;

enum class InitStrategy {
  /// Means seeded from data rows, k-means++ style; pooled full covariance.
  kKmeansPlusPlus,
  /// Means at the pooled per-dimension mean plus seeded jitter; diagonal
  /// pooled covariance. Computable from per-column aggregates only, which is
  /// what the distributed fit can share, so comparison runs use this one.
  kPooledJitter,
};

struct EmConfig {
  int components = 1;
  int max_iterations = 500;
  double tolerance = 1e-6;  // relative log-likelihood change
  double cov_floor = 1e-8;  // eigenvalue floor for covariances
  uint64_t seed = 1;
  InitStrategy init = InitStrategy::kKmeansPlusPlus;
  bool record_params = false;  // keep the parameter iterates in the trace
};

struct EmTrace {
  std::vector<double> log_likelihood;  // one entry per E-step
  int iterations = 0;
  bool converged = false;
  // Iterations whose log-likelihood dropped by more than the slack; EM
  // guarantees monotonicity, so entries here indicate a numerical problem.
  std::vector<int> monotonicity_violations;
  std::vector<GmmParams> params_per_iteration;  // filled if record_params
};

/// Posterior responsibilities of every sample, computed in log space.
Responsibilities e_step(const MatXd& data, const GmmParams& params);

/// Weight / mean / covariance update from responsibilities. Covariances are
/// symmetrized and eigenvalue-floored at `cov_floor`.
GmmParams m_step(const MatXd& data, const Responsibilities& resp,
                 double cov_floor);

/// Full EM fit. Stops when the relative log-likelihood change drops below
/// config.tolerance or after max_iterations.
std::pair<GmmParams, EmTrace> fit(const MatXd& data, const EmConfig& config);

/// Initial parameters per the configured strategy.
GmmParams init_params(const MatXd& data, const EmConfig& config);

/// Pooled-jitter initialization from per-dimension aggregates. The
/// distributed fit builds the same parameters from consensus-shared
/// aggregates, which keeps centralized and distributed runs comparable.
GmmParams init_from_pooled_stats(const VecXd& dim_means, const VecXd& dim_vars,
                                 int components, int dim, uint64_t seed,
                                 double cov_floor);

/// Mean and 1/N variance of one column; shared by the centralized and
/// per-node code paths so both produce identical floating-point results.
void column_stats(const Eigen::Ref<const VecXd>& column, double& mean,
                  double& var);

/// Symmetrize and floor the eigenvalues of a covariance at `floor`.
MatXd repair_covariance(const MatXd& sym, double floor);

}  // namespace windem
