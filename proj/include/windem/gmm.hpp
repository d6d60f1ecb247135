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

namespace windem {

// A joint Gaussian mixture over the stacked (power, forecast) variable of M
// farms: dimension 2M, entries 1..M are power, M+1..2M are forecasts.
//
// Block notation for one component's covariance:
//   Sigma = [ A  B ]     A: power x power      B: power x forecast
//           [ B^T C ]    C: forecast x forecast
struct GmmParams {
  int dim = 0;                 // 2M
  VecXd weights;               // J, convex
  std::vector<VecXd> means;    // J vectors of length dim
  std::vector<MatXd> covs;     // J symmetric positive definite dim x dim

  int components() const { return static_cast<int>(weights.size()); }
  int farms() const { return dim / 2; }

  // Block accessors for component j.
  VecXd mean_x(int j) const { return means[j].head(farms()); }
  VecXd mean_y(int j) const { return means[j].tail(farms()); }
  MatXd block_a(int j) const { return covs[j].topLeftCorner(farms(), farms()); }
  MatXd block_b(int j) const {
    return covs[j].topRightCorner(farms(), farms());
  }
  MatXd block_c(int j) const {
    return covs[j].bottomRightCorner(farms(), farms());
  }
  /// Row m (0-based) of the power-forecast cross block B_j.
  VecXd b_row(int j, int m) const {
    return covs[j].row(m).segment(farms(), farms());
  }

  /// Checks weight, symmetry and positive-definiteness invariants.
  void validate() const;
};

/// Conditional distribution of one farm's forecast error z_m = x_m - y_m
/// given the full forecast vector. A J-component univariate mixture.
struct ConditionalErrorDist {
  int node = 0;           // 0-based farm index
  double forecast = 0.0;  // the conditioning forecast value of this farm
  VecXd weights;          // J, convex
  VecXd means;            // J conditional means of x_m
  VecXd variances;        // J conditional variances, all positive

  /// Density of the forecast error at z (evaluates the mixture at z + y_m).
  double pdf(double z) const;
  /// CDF of the forecast error at z.
  double cdf(double z) const;
};

/// log N(x | mean, cov) via Cholesky factorization.
/// `component` only labels the error if the factorization fails.
double gaussian_logpdf(const VecXd& x, const VecXd& mean, const MatXd& cov,
                       int component = -1);

/// log of the mixture density, evaluated with a max-shift so that densities
/// far in the tails do not underflow.
double mixture_logpdf(const VecXd& x, const GmmParams& params);

double mixture_pdf(const VecXd& x, const GmmParams& params);

/// Marginal density / CDF of a single coordinate of the mixture.
double marginal_pdf(const GmmParams& params, int dimension, double x);
double marginal_cdf(const GmmParams& params, int dimension, double x);

/// Conditional forecast-error distribution of farm `node` (0-based) given
/// the forecast vector y0 (length M).
ConditionalErrorDist derive_conditional(const GmmParams& params, int node,
                                        const VecXd& y0);

/// n i.i.d. draws, one per row. Deterministic in (params, seed).
MatXd sample(const GmmParams& params, int n, uint64_t seed);

/// Bayesian information criterion of `params` on `data` (rows = samples).
double bic(const GmmParams& params, const MatXd& data);

/// Number of free parameters of a J-component mixture in `dim` dimensions.
int free_parameter_count(int j, int dim);

/// Total log-likelihood of the data under the mixture.
double log_likelihood(const MatXd& data, const GmmParams& params);

}  // namespace windem
