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

#include "windem/kernels.hpp"

#include <cmath>
#include <vector>

#include "windem/rng.hpp"

namespace windem::kernels {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct ComponentFactor {
  Eigen::LLT<MatXd> llt;
  double log_norm;  // 0.5 * (dim*log(2pi) + log det)
};

std::vector<ComponentFactor> factorize(const GmmParams& params) {
  std::vector<ComponentFactor> out(params.components());
  for (int j = 0; j < params.components(); ++j) {
    out[j].llt.compute(params.covs[j]);
    if (out[j].llt.info() != Eigen::Success)
      throw FactorizationError(
          "covariance factorization failed for component " + std::to_string(j),
          j);
    const double log_det =
        2.0 *
        out[j].llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    out[j].log_norm = 0.5 * (params.dim * kLog2Pi + log_det);
  }
  return out;
}

void log_density_sample(const MatXd& data, const GmmParams& params,
                        const std::vector<ComponentFactor>& factors, int n,
                        MatXd& out) {
  for (int j = 0; j < params.components(); ++j) {
    VecXd y = data.row(n).transpose() - params.means[j];
    factors[j].llt.matrixL().solveInPlace(y);
    out(j, n) = -0.5 * y.squaredNorm() - factors[j].log_norm;
  }
}

void softmax_column(const MatXd& log_dens, const VecXd& log_weights, int n,
                    MatXd& out) {
  VecXd col = log_dens.col(n) + log_weights;
  const double shift = col.maxCoeff();
  col = (col.array() - shift).exp();
  out.col(n) = col / col.sum();
}

double logsumexp_column(const MatXd& log_dens, const VecXd& log_weights,
                        int n) {
  VecXd col = log_dens.col(n) + log_weights;
  const double shift = col.maxCoeff();
  return shift + std::log((col.array() - shift).exp().sum());
}

void sample_row(const GmmParams& params,
                const std::vector<MatXd>& chol_factors,
                const CounterRng& comp_rng, const CounterRng& gauss_rng, int n,
                MatXd& out) {
  const double u = comp_rng.uniform01(n);
  int j = 0;
  double acc = params.weights[0];
  while (u > acc && j + 1 < params.components()) acc += params.weights[++j];
  VecXd z(params.dim);
  for (int d = 0; d < params.dim; ++d)
    z[d] = gauss_rng.normal(uint64_t(n) * params.dim + d);
  out.row(n) = (params.means[j] + chol_factors[j] * z).transpose();
}

void hash_word(const VecXd& v, uint64_t proj_seed, int bits, int w,
               std::vector<uint32_t>& words) {
  const int n = static_cast<int>(v.size());
  uint32_t word = 0;
  for (int b = 0; b < 32; ++b) {
    const int l = 32 * w + b;
    if (l >= bits) break;
    const CounterRng col_rng(derive_key(proj_seed, "gamma", uint64_t(l)));
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += v[i] * col_rng.normal(i);
    if (dot >= 0.0) word |= (1u << b);
  }
  words[w] = word;
}

void kld_sample(const MatXd& draws, const GmmParams& p, const GmmParams& q,
                const std::vector<ComponentFactor>& fp,
                const std::vector<ComponentFactor>& fq, const VecXd& logw_p,
                const VecXd& logw_q, int n, VecXd& diff) {
  auto mix_log = [&](const GmmParams& params,
                     const std::vector<ComponentFactor>& factors,
                     const VecXd& logw) {
    VecXd terms(params.components());
    for (int j = 0; j < params.components(); ++j) {
      VecXd y = draws.row(n).transpose() - params.means[j];
      factors[j].llt.matrixL().solveInPlace(y);
      terms[j] = logw[j] - 0.5 * y.squaredNorm() - factors[j].log_norm;
    }
    const double shift = terms.maxCoeff();
    return shift + std::log((terms.array() - shift).exp().sum());
  };
  diff[n] = mix_log(p, fp, logw_p) - mix_log(q, fq, logw_q);
}

std::vector<MatXd> cholesky_factors(const GmmParams& params) {
  std::vector<MatXd> out(params.components());
  for (int j = 0; j < params.components(); ++j) {
    Eigen::LLT<MatXd> llt(params.covs[j]);
    if (llt.info() != Eigen::Success)
      throw FactorizationError(
          "covariance factorization failed for component " + std::to_string(j),
          j);
    out[j] = llt.matrixL();
  }
  return out;
}

void moments_from_centered(const MatXd& data, const VecXd& q, VecXd& mean,
                           MatXd& cov, bool parallel) {
  const int dim = static_cast<int>(data.cols());
  const double total = q.sum();
  mean.resize(dim);
  for (int d = 0; d < dim; ++d) mean[d] = data.col(d).dot(q) / total;

  MatXd centered = data.rowwise() - mean.transpose();
  MatXd weighted = centered.array().colwise() * q.array();
  cov.resize(dim, dim);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int a = 0; a < dim; ++a)
      for (int b = a; b < dim; ++b)
        cov(a, b) = weighted.col(a).dot(centered.col(b)) / total;
  } else {
    for (int a = 0; a < dim; ++a)
      for (int b = a; b < dim; ++b)
        cov(a, b) = weighted.col(a).dot(centered.col(b)) / total;
  }
  cov = cov.selfadjointView<Eigen::Upper>();
}

}  // namespace

MatXd log_density_matrix(const MatXd& data, const GmmParams& params) {
  const int n_count = static_cast<int>(data.rows());
  const auto factors = factorize(params);
  MatXd out(params.components(), n_count);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_count; ++n)
    log_density_sample(data, params, factors, n, out);
  return out;
}

MatXd responsibilities_from_log(const MatXd& log_dens,
                                const VecXd& log_weights) {
  const int n_count = static_cast<int>(log_dens.cols());
  MatXd out(log_dens.rows(), n_count);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_count; ++n)
    softmax_column(log_dens, log_weights, n, out);
  return out;
}

VecXd mixture_log_density(const MatXd& log_dens, const VecXd& log_weights) {
  const int n_count = static_cast<int>(log_dens.cols());
  VecXd out(n_count);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_count; ++n)
    out[n] = logsumexp_column(log_dens, log_weights, n);
  return out;
}

void weighted_moments(const MatXd& data, const VecXd& q, VecXd& mean,
                      MatXd& cov) {
  moments_from_centered(data, q, mean, cov, true);
}

MatXd sample_batch(const GmmParams& params, int n, uint64_t seed) {
  const auto factors = cholesky_factors(params);
  const CounterRng comp_rng(derive_key(seed, "sample-component"));
  const CounterRng gauss_rng(derive_key(seed, "sample-gauss"));
  MatXd out(n, params.dim);
#pragma omp parallel for schedule(static)
  for (int row = 0; row < n; ++row)
    sample_row(params, factors, comp_rng, gauss_rng, row, out);
  return out;
}

std::vector<uint32_t> sign_hash_words(const VecXd& v, uint64_t proj_seed,
                                      int bits) {
  if (v.size() == 0) throw DimensionError("sign_hash: empty vector");
  const int n_words = (bits + 31) / 32;
  std::vector<uint32_t> words(n_words, 0);
#pragma omp parallel for schedule(static)
  for (int w = 0; w < n_words; ++w) hash_word(v, proj_seed, bits, w, words);
  return words;
}

void kld_monte_carlo(const GmmParams& p, const GmmParams& q, int samples,
                     uint64_t seed, double& estimate, double& stderr_out) {
  if (p.dim != q.dim)
    throw DimensionError("kld: mixtures have different dimensions");
  const MatXd draws = sample_batch(p, samples, seed);
  const auto fp = factorize(p);
  const auto fq = factorize(q);
  const VecXd logw_p = p.weights.array().log();
  const VecXd logw_q = q.weights.array().log();
  VecXd diff(samples);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < samples; ++n)
    kld_sample(draws, p, q, fp, fq, logw_p, logw_q, n, diff);
  estimate = diff.mean();
  const double var = (diff.array() - estimate).square().sum() / (samples - 1);
  stderr_out = std::sqrt(var / samples);
}

namespace serial {

MatXd log_density_matrix(const MatXd& data, const GmmParams& params) {
  const int n_count = static_cast<int>(data.rows());
  const auto factors = factorize(params);
  MatXd out(params.components(), n_count);
  for (int n = 0; n < n_count; ++n)
    log_density_sample(data, params, factors, n, out);
  return out;
}

MatXd responsibilities_from_log(const MatXd& log_dens,
                                const VecXd& log_weights) {
  const int n_count = static_cast<int>(log_dens.cols());
  MatXd out(log_dens.rows(), n_count);
  for (int n = 0; n < n_count; ++n)
    softmax_column(log_dens, log_weights, n, out);
  return out;
}

VecXd mixture_log_density(const MatXd& log_dens, const VecXd& log_weights) {
  const int n_count = static_cast<int>(log_dens.cols());
  VecXd out(n_count);
  for (int n = 0; n < n_count; ++n)
    out[n] = logsumexp_column(log_dens, log_weights, n);
  return out;
}

void weighted_moments(const MatXd& data, const VecXd& q, VecXd& mean,
                      MatXd& cov) {
  moments_from_centered(data, q, mean, cov, false);
}

MatXd sample_batch(const GmmParams& params, int n, uint64_t seed) {
  const auto factors = cholesky_factors(params);
  const CounterRng comp_rng(derive_key(seed, "sample-component"));
  const CounterRng gauss_rng(derive_key(seed, "sample-gauss"));
  MatXd out(n, params.dim);
  for (int row = 0; row < n; ++row)
    sample_row(params, factors, comp_rng, gauss_rng, row, out);
  return out;
}

std::vector<uint32_t> sign_hash_words(const VecXd& v, uint64_t proj_seed,
                                      int bits) {
  if (v.size() == 0) throw DimensionError("sign_hash: empty vector");
  const int n_words = (bits + 31) / 32;
  std::vector<uint32_t> words(n_words, 0);
  for (int w = 0; w < n_words; ++w) hash_word(v, proj_seed, bits, w, words);
  return words;
}

void kld_monte_carlo(const GmmParams& p, const GmmParams& q, int samples,
                     uint64_t seed, double& estimate, double& stderr_out) {
  if (p.dim != q.dim)
    throw DimensionError("kld: mixtures have different dimensions");
  const MatXd draws = sample_batch(p, samples, seed);
  const auto fp = factorize(p);
  const auto fq = factorize(q);
  const VecXd logw_p = p.weights.array().log();
  const VecXd logw_q = q.weights.array().log();
  VecXd diff(samples);
  for (int n = 0; n < samples; ++n)
    kld_sample(draws, p, q, fp, fq, logw_p, logw_q, n, diff);
  estimate = diff.mean();
  const double var = (diff.array() - estimate).square().sum() / (samples - 1);
  stderr_out = std::sqrt(var / samples);
}

}  // namespace serial

}  // namespace windem::kernels
