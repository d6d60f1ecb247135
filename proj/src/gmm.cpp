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

#include "windem/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "windem/kernels.hpp"

namespace windem {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

double normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_cdf(double x, double mean, double var) {
  return 0.5 * std::erfc((mean - x) / std::sqrt(2.0 * var));
}

}  // namespace

void GmmParams::validate() const {
  const int j_count = components();
  if (j_count <= 0) throw DimensionError("mixture has no components");
  if (dim <= 0 || dim % 2 != 0)
    throw DimensionError("mixture dimension must be a positive even number");
  if (static_cast<int>(means.size()) != j_count ||
      static_cast<int>(covs.size()) != j_count)
    throw DimensionError("weights/means/covariances have mismatched counts");

  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw Error("mixture weights do not sum to 1");
  for (int j = 0; j < j_count; ++j) {
    if (weights[j] < 0.0)
      throw Error("negative weight in component " + std::to_string(j));
    if (means[j].size() != dim || covs[j].rows() != dim ||
        covs[j].cols() != dim)
      throw DimensionError("component " + std::to_string(j) +
                           " has wrong dimensions");
    const double asym = (covs[j] - covs[j].transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10)
      throw Error("covariance of component " + std::to_string(j) +
                  " is not symmetric");
    Eigen::LLT<MatXd> llt(covs[j]);
    if (llt.info() != Eigen::Success)
      throw FactorizationError("covariance of component " + std::to_string(j) +
                                   " is not positive definite",
                               j);
  }
}

double gaussian_logpdf(const VecXd& x, const VecXd& mean, const MatXd& cov,
                       int component) {
  if (x.size() != mean.size() || cov.rows() != x.size() ||
      cov.cols() != x.size())
    throw DimensionError("gaussian_logpdf: dimension mismatch");
  Eigen::LLT<MatXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw FactorizationError(
        "covariance factorization failed" +
            (component >= 0 ? " for component " + std::to_string(component)
                            : std::string()),
        component);
  VecXd y = x - mean;
  llt.matrixL().solveInPlace(y);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (y.squaredNorm() + x.size() * kLog2Pi + log_det);
}

double mixture_logpdf(const VecXd& x, const GmmParams& params) {
  const int j_count = params.components();
  VecXd terms(j_count);
  for (int j = 0; j < j_count; ++j) {
    terms[j] = std::log(params.weights[j]) +
               gaussian_logpdf(x, params.means[j], params.covs[j], j);
  }
  const double shift = terms.maxCoeff();
  if (!std::isfinite(shift)) return -std::numeric_limits<double>::infinity();
  return shift + std::log((terms.array() - shift).exp().sum());
}

double mixture_pdf(const VecXd& x, const GmmParams& params) {
  return std::exp(mixture_logpdf(x, params));
}

double marginal_pdf(const GmmParams& params, int dimension, double x) {
  double acc = 0.0;
  for (int j = 0; j < params.components(); ++j) {
    acc += params.weights[j] *
           normal_pdf(x, params.means[j][dimension],
                      params.covs[j](dimension, dimension));
  }
  return acc;
}

double marginal_cdf(const GmmParams& params, int dimension, double x) {
  double acc = 0.0;
  for (int j = 0; j < params.components(); ++j) {
    acc += params.weights[j] *
           normal_cdf(x, params.means[j][dimension],
                      params.covs[j](dimension, dimension));
  }
  return acc;
}

double ConditionalErrorDist::pdf(double z) const {
  const double x = z + forecast;
  double acc = 0.0;
  for (int j = 0; j < weights.size(); ++j)
    acc += weights[j] * normal_pdf(x, means[j], variances[j]);
  return acc;
}

double ConditionalErrorDist::cdf(double z) const {
  const double x = z + forecast;
  double acc = 0.0;
  for (int j = 0; j < weights.size(); ++j)
    acc += weights[j] * normal_cdf(x, means[j], variances[j]);
  return acc;
}

ConditionalErrorDist derive_conditional(const GmmParams& params, int node,
                                        const VecXd& y0) {
  const int m_count = params.farms();
  const int j_count = params.components();
  if (node < 0 || node >= m_count)
    throw DimensionError("derive_conditional: node index out of range");
  if (y0.size() != m_count)
    throw DimensionError("derive_conditional: forecast vector must have one "
                         "entry per farm");

  ConditionalErrorDist out;
  out.node = node;
  out.forecast = y0[node];
  out.weights.resize(j_count);
  out.means.resize(j_count);
  out.variances.resize(j_count);

  VecXd log_marg(j_count);
  for (int j = 0; j < j_count; ++j) {
    const MatXd c = params.block_c(j);
    log_marg[j] = std::log(params.weights[j]) +
                  gaussian_logpdf(y0, params.mean_y(j), c, j);

    Eigen::LLT<MatXd> llt(c);
    if (llt.info() != Eigen::Success)
      throw FactorizationError(
          "forecast block of component " + std::to_string(j) +
              " is singular; cannot condition",
          j);
    const VecXd b = params.b_row(j, node);
    const VecXd dev = llt.solve(y0 - params.mean_y(j));
    out.means[j] = params.means[j][node] + b.dot(dev);
    out.variances[j] =
        params.covs[j](node, node) - b.dot(llt.solve(b));
    if (!(out.variances[j] > 0.0))
      throw FactorizationError(
          "conditional variance of component " + std::to_string(j) +
              " is not positive",
          j);
  }
  // Normalized in log space; the ratio is invariant to common scaling.
  const double shift = log_marg.maxCoeff();
  VecXd alpha = (log_marg.array() - shift).exp();
  out.weights = alpha / alpha.sum();
  return out;
}

MatXd sample(const GmmParams& params, int n, uint64_t seed) {
  return kernels::sample_batch(params, n, seed);
}

int free_parameter_count(int j, int dim) {
  return (j - 1) + j * dim + j * dim * (dim + 1) / 2;
}

double log_likelihood(const MatXd& data, const GmmParams& params) {
  const MatXd log_dens = kernels::log_density_matrix(data, params);
  const VecXd log_w = params.weights.array().log();
  return kernels::mixture_log_density(log_dens, log_w).sum();
}

double bic(const GmmParams& params, const MatXd& data) {
  const int n = static_cast<int>(data.rows());
  const int k = free_parameter_count(params.components(), params.dim);
  return -2.0 * log_likelihood(data, params) + k * std::log(double(n));
}

}  // namespace windem
