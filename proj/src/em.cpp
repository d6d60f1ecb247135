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

#include "windem/em.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "windem/kernels.hpp"
#include "windem/rng.hpp"

namespace windem {

void column_stats(const Eigen::Ref<const VecXd>& column, double& mean,
                  double& var) {
  const auto n = static_cast<double>(column.size());
  mean = column.sum() / n;
  var = (column.array() - mean).square().sum() / n;
}

MatXd repair_covariance(const MatXd& sym, double floor) {
  MatXd s = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<MatXd> eig(s);
  VecXd lam = eig.eigenvalues().cwiseMax(floor);
  MatXd out = eig.eigenvectors() * lam.asDiagonal() *
              eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Responsibilities e_step(const MatXd& data, const GmmParams& params) {
  if (!data.allFinite())
    throw Error("e_step: data contains NaN or infinite values");
  if (data.cols() != params.dim)
    throw DimensionError("e_step: data dimension does not match parameters");
  const MatXd log_dens = kernels::log_density_matrix(data, params);
  const VecXd log_w = params.weights.array().log();
  return kernels::responsibilities_from_log(log_dens, log_w);
}

GmmParams m_step(const MatXd& data, const Responsibilities& resp,
                 double cov_floor) {
  const int j_count = static_cast<int>(resp.rows());
  const int n_count = static_cast<int>(data.rows());
  GmmParams params;
  params.dim = static_cast<int>(data.cols());
  params.weights.resize(j_count);
  params.means.resize(j_count);
  params.covs.resize(j_count);

  for (int j = 0; j < j_count; ++j) {
    const VecXd q = resp.row(j).transpose();
    const double total = q.sum();
    if (total < 1e-12)
      throw ComponentCollapseError(
          "component " + std::to_string(j) + " lost all responsibility mass",
          j);
    params.weights[j] = total / n_count;
    VecXd mu;
    MatXd cov;
    kernels::weighted_moments(data, q, mu, cov);
    params.means[j] = mu;
    params.covs[j] = repair_covariance(cov, cov_floor);
  }
  return params;
}

GmmParams init_from_pooled_stats(const VecXd& dim_means, const VecXd& dim_vars,
                                 int components, int dim, uint64_t seed,
                                 double cov_floor) {
  const CounterRng rng(derive_key(seed, "em-init"));
  GmmParams params;
  params.dim = dim;
  params.weights = VecXd::Constant(components, 1.0 / components);
  params.means.resize(components);
  params.covs.resize(components);
  const VecXd scale = dim_vars.cwiseMax(cov_floor).cwiseSqrt();
  for (int j = 0; j < components; ++j) {
    VecXd mu(dim);
    for (int d = 0; d < dim; ++d)
      mu[d] = dim_means[d] +
              0.75 * scale[d] * rng.normal(uint64_t(j) * dim + d);
    params.means[j] = mu;
    params.covs[j] = dim_vars.cwiseMax(cov_floor).asDiagonal();
  }
  return params;
}

namespace {

GmmParams init_kmeanspp(const MatXd& data, const EmConfig& config) {
  const int n_count = static_cast<int>(data.rows());
  const int dim = static_cast<int>(data.cols());
  const int j_count = config.components;
  const CounterRng rng(derive_key(config.seed, "em-init-kmeanspp"));

  std::vector<int> centers;
  centers.push_back(static_cast<int>(rng.index(0, n_count)));
  VecXd best_d2 =
      (data.rowwise() - data.row(centers[0])).rowwise().squaredNorm();
  for (int j = 1; j < j_count; ++j) {
    const double u = rng.uniform01(j) * best_d2.sum();
    double acc = 0.0;
    int pick = n_count - 1;
    for (int n = 0; n < n_count; ++n) {
      acc += best_d2[n];
      if (acc >= u) {
        pick = n;
        break;
      }
    }
    centers.push_back(pick);
    best_d2 = best_d2.cwiseMin(
        (data.rowwise() - data.row(pick)).rowwise().squaredNorm());
  }

  VecXd pooled_mean;
  MatXd pooled_cov;
  kernels::weighted_moments(data, VecXd::Ones(n_count), pooled_mean,
                            pooled_cov);
  GmmParams params;
  params.dim = dim;
  params.weights = VecXd::Constant(j_count, 1.0 / j_count);
  params.means.resize(j_count);
  params.covs.resize(j_count);
  for (int j = 0; j < j_count; ++j) {
    params.means[j] = data.row(centers[j]).transpose();
    params.covs[j] = repair_covariance(pooled_cov, config.cov_floor);
  }
  return params;
}

}  // namespace

GmmParams init_params(const MatXd& data, const EmConfig& config) {
  if (config.init == InitStrategy::kKmeansPlusPlus)
    return init_kmeanspp(data, config);

  const int dim = static_cast<int>(data.cols());
  VecXd means(dim), vars(dim);
  for (int d = 0; d < dim; ++d) column_stats(data.col(d), means[d], vars[d]);
  return init_from_pooled_stats(means, vars, config.components, dim,
                                config.seed, config.cov_floor);
}

std::pair<GmmParams, EmTrace> fit(const MatXd& data, const EmConfig& config) {
  const int n_count = static_cast<int>(data.rows());
  if (n_count <= config.components)
    throw Error("fit: need more samples than components");
  if (config.tolerance <= 0.0) throw Error("fit: tolerance must be positive");

  GmmParams params = init_params(data, config);
  EmTrace trace;
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int k = 0; k < config.max_iterations; ++k) {
    const MatXd log_dens = kernels::log_density_matrix(data, params);
    const VecXd log_w = params.weights.array().log();
    const double ll = kernels::mixture_log_density(log_dens, log_w).sum();
    trace.log_likelihood.push_back(ll);
    trace.iterations = k + 1;

    if (k > 0) {
      const double slack = 1e-8 * std::max(1.0, std::abs(prev_ll));
      if (ll < prev_ll - slack) trace.monotonicity_violations.push_back(k);
      if (std::abs(ll - prev_ll) <
          config.tolerance * std::max(1.0, std::abs(prev_ll))) {
        trace.converged = true;
        break;
      }
    }
    prev_ll = ll;

    const Responsibilities resp =
        kernels::responsibilities_from_log(log_dens, log_w);
    params = m_step(data, resp, config.cov_floor);
    if (config.record_params) trace.params_per_iteration.push_back(params);
  }
  return {params, trace};
}

}  // namespace windem
