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
#include "windem/gmm.hpp"

namespace windem::kernels {

// Data-parallel inner loops. Every kernel writes disjoint outputs per
// parallel index and keeps reductions sequential inside each output, so the
// OpenMP versions are bit-identical to the serial references below.

/// log densities of every sample under every component: J x N matrix.
MatXd log_density_matrix(const MatXd& data, const GmmParams& params);

/// Column-wise softmax of logw_j + logdens(j, n): the responsibility matrix.
MatXd responsibilities_from_log(const MatXd& log_dens, const VecXd& log_weights);

/// Per-sample mixture log density: logsumexp over components of
/// logw_j + logdens(j, n).
VecXd mixture_log_density(const MatXd& log_dens, const VecXd& log_weights);

/// Weighted mean and (biased) covariance with weights q / sum(q).
void weighted_moments(const MatXd& data, const VecXd& q, VecXd& mean,
                      MatXd& cov);

/// Mixture samples, one per row; component choice and Gaussian draws are
/// counter-indexed by row so the result is independent of thread count.
MatXd sample_batch(const GmmParams& params, int n, uint64_t seed);

/// L sign bits of projections of `v` onto seeded standard-normal directions,
/// packed little-endian into 32-bit words. sign(0) maps to bit 1.
std::vector<uint32_t> sign_hash_words(const VecXd& v, uint64_t proj_seed,
                                      int bits);

/// Monte Carlo estimate of E_p[log p - log q] with standard error.
/// Deterministic in (p, q, samples, seed).
void kld_monte_carlo(const GmmParams& p, const GmmParams& q, int samples,
                     uint64_t seed, double& estimate, double& stderr_out);

namespace serial {

MatXd log_density_matrix(const MatXd& data, const GmmParams& params);
MatXd responsibilities_from_log(const MatXd& log_dens, const VecXd& log_weights);
VecXd mixture_log_density(const MatXd& log_dens, const VecXd& log_weights);
void weighted_moments(const MatXd& data, const VecXd& q, VecXd& mean,
                      MatXd& cov);
MatXd sample_batch(const GmmParams& params, int n, uint64_t seed);
std::vector<uint32_t> sign_hash_words(const VecXd& v, uint64_t proj_seed,
                                      int bits);
void kld_monte_carlo(const GmmParams& p, const GmmParams& q, int samples,
                     uint64_t seed, double& estimate, double& stderr_out);

}  // namespace serial

}  // namespace windem::kernels
