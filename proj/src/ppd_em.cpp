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

#include "windem/ppd_em.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "windem/kernels.hpp"
#include "windem/rng.hpp"

namespace windem {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_slices(const std::vector<VerticalSlice>& slices) {
  if (slices.empty()) throw DimensionError("ppd-em: no slices");
  const int n = slices[0].samples();
  for (size_t m = 0; m < slices.size(); ++m) {
    if (slices[m].node != int(m))
      throw DimensionError("ppd-em: slices must be ordered by node id");
    if (slices[m].columns.cols() != 2)
      throw DimensionError("ppd-em: a slice holds exactly two columns");
    if (slices[m].samples() != n)
      throw DimensionError("ppd-em: slices disagree on the sample count");
  }
}

void assert_agreement(const std::vector<GmmParams>& thetas) {
  for (size_t m = 1; m < thetas.size(); ++m) {
    const auto& a = thetas[0];
    const auto& b = thetas[m];
    bool same = (a.weights.array() == b.weights.array()).all();
    for (int j = 0; j < a.components() && same; ++j)
      same = (a.means[j].array() == b.means[j].array()).all() &&
             (a.covs[j].array() == b.covs[j].array()).all();
    if (!same)
      throw Error("ppd-em: node " + std::to_string(m) +
                  " disagrees with node 0 on the public parameters");
  }
}

// Sequences the phases of the distributed fit over a pluggable executor.
// Every node's knowledge is kept separately and must agree bit-for-bit at
// each phase boundary; local statistics only ever read the node's own slice.
class EmDriver {
 public:
  EmDriver(const std::vector<VerticalSlice>& slices, const Topology& topology,
           const PpdEmConfig& config, PhaseExecutor& executor, SimNet* net)
      : slices_(slices),
        topology_(topology),
        config_(config),
        executor_(executor),
        net_(net),
        m_count_(topology.nodes()),
        dim_(2 * topology.nodes()),
        n_count_(slices[0].samples()),
        run_key_(derive_key(config.em.seed, "ppd-run")),
        projections_{derive_key(run_key_, "projections"), n_count_,
                     config.hash_bits} {
    thetas_.resize(m_count_);
    log_dens_.assign(m_count_, MatXd(config.em.components, n_count_));
    resp_.resize(m_count_);
  }

  void seed_theta(const GmmParams& theta) {
    thetas_.assign(m_count_, theta);
  }

  void seed_resp(const Responsibilities& resp) {
    resp_.assign(m_count_, resp);
  }

  void init_theta() {
    MatXd stats = MatXd::Zero(m_count_, 2 * dim_);
    for (int m = 0; m < m_count_; ++m) {
      double mean, var;
      column_stats(slices_[m].columns.col(0), mean, var);
      stats(m, m) = mean;
      stats(m, dim_ + m) = var;
      column_stats(slices_[m].columns.col(1), mean, var);
      stats(m, m_count_ + m) = mean;
      stats(m, dim_ + m_count_ + m) = var;
    }
    const PhaseResult res = executor_.broadcast(
        stats, false, MessageType::kConsensusValue, "init-stats");
    for (int m = 0; m < m_count_; ++m) {
      thetas_[m] = init_from_pooled_stats(
          res.per_node[m].head(dim_), res.per_node[m].tail(dim_),
          config_.em.components, dim_, config_.em.seed, config_.em.cov_floor);
    }
    assert_agreement(thetas_);
  }

  /// One distributed E-step; returns the (shared) log-likelihood of the
  /// current parameters and updates every node's responsibilities.
  double e_phase(int iteration) {
    const int j_count = config_.em.components;
    std::optional<SecureSumContext> crypto;
    if (config_.mode == PpdMode::kFullProtocol) {
      const CutSet cuts = net_ ? net_->current_cuts() : CutSet{};
      crypto = SecureSumContext::create(
          topology_, cuts, run_key_, uint64_t(iteration), config_.key_bits,
          config_.fractional_bits, config_.integer_bits, m_count_ + 1);
    }

    for (int j = 0; j < j_count; ++j) {
      // Every node derives the component's precision from its own replica
      // of the public parameters.
      std::vector<MatXd> precision(m_count_);
      std::vector<double> log_det(m_count_);
      for (int m = 0; m < m_count_; ++m) {
        Eigen::LLT<MatXd> llt(thetas_[m].covs[j]);
        if (llt.info() != Eigen::Success)
          throw FactorizationError(
              "ppd-em: covariance of component " + std::to_string(j) +
                  " is not positive definite",
              j);
        precision[m] = llt.solve(MatXd::Identity(dim_, dim_));
        log_det[m] =
            2.0 *
            llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      }

      std::vector<VecXd> locals(m_count_);
      for (int m = 0; m < m_count_; ++m)
        locals[m] = local_first_sum_terms(slices_[m], precision[m],
                                          thetas_[m].means[j]);
      const PhaseResult tau = executor_.allsum(
          locals, crypto ? &*crypto : nullptr, next_invocation(),
          "estep-tau");

      for (int m = 0; m < m_count_; ++m)
        locals[m] = local_second_sum_terms(slices_[m], tau.per_node[m],
                                           thetas_[m].means[j]);
      const PhaseResult eps = executor_.allsum(
          locals, crypto ? &*crypto : nullptr, next_invocation(),
          "estep-eps");

      for (int m = 0; m < m_count_; ++m)
        log_dens_[m].row(j) =
            (-0.5 *
             (eps.per_node[m].array() + dim_ * kLog2Pi + log_det[m]))
                .transpose();
    }

    double ll = 0.0;
    for (int m = 0; m < m_count_; ++m) {
      const VecXd log_w = thetas_[m].weights.array().log();
      const double node_ll =
          kernels::mixture_log_density(log_dens_[m], log_w).sum();
      resp_[m] = kernels::responsibilities_from_log(log_dens_[m], log_w);
      if (m == 0)
        ll = node_ll;
      else if (node_ll != ll)
        throw Error("ppd-em: nodes disagree on the log-likelihood");
    }
    return ll;
  }

  void m_phase() {
    const int j_count = int(resp_[0].rows());
    for (int m = 0; m < m_count_; ++m) {
      thetas_[m].dim = dim_;
      thetas_[m].weights.resize(j_count);
      thetas_[m].means.resize(j_count);
      thetas_[m].covs.resize(j_count);
    }

    for (int j = 0; j < j_count; ++j) {
      // Weights and the normalized responsibilities are local at every node.
      std::vector<VecXd> c(m_count_);
      for (int m = 0; m < m_count_; ++m) {
        const VecXd qrow = resp_[m].row(j).transpose();
        const double total = qrow.sum();
        if (total < 1e-12)
          throw ComponentCollapseError(
              "ppd-em: component " + std::to_string(j) +
                  " lost all responsibility mass",
              j);
        thetas_[m].weights[j] = total / n_count_;
        c[m] = qrow / total;
      }

      // Mean entries: local then disseminated.
      MatXd mu_init = MatXd::Zero(m_count_, dim_);
      for (int m = 0; m < m_count_; ++m) {
        mu_init(m, m) = c[m].dot(slices_[m].columns.col(0));
        mu_init(m, m_count_ + m) = c[m].dot(slices_[m].columns.col(1));
      }
      const PhaseResult mu = executor_.broadcast(
          mu_init, false, MessageType::kConsensusValue, "mstep-mu");

      // Diagonal covariance entries: local then disseminated.
      MatXd diag_init = MatXd::Zero(m_count_, dim_);
      for (int m = 0; m < m_count_; ++m) {
        const VecXd& mu_m = mu.per_node[m];
        diag_init(m, m) =
            c[m].dot((slices_[m].columns.col(0).array() - mu_m[m])
                         .square()
                         .matrix());
        diag_init(m, m_count_ + m) =
            c[m].dot((slices_[m].columns.col(1).array() - mu_m[m_count_ + m])
                         .square()
                         .matrix());
      }
      const PhaseResult diag = executor_.broadcast(
          diag_init, false, MessageType::kConsensusValue, "mstep-sigma-diag");

      // Off-diagonal entries via inner products of the weighted deviation
      // vectors.
      std::vector<VecXd> p(2 * m_count_);
      for (int m = 0; m < m_count_; ++m) {
        const VecXd& mu_m = mu.per_node[m];
        const VecXd root_c = c[m].array().sqrt();
        p[m] = root_c.array() *
               (slices_[m].columns.col(0).array() - mu_m[m]);
        p[m_count_ + m] =
            root_c.array() *
            (slices_[m].columns.col(1).array() - mu_m[m_count_ + m]);
      }

      std::vector<MatXd> gram(m_count_);
      if (config_.mode == PpdMode::kExactOracle || config_.exact_gram) {
        MatXd exact(dim_, dim_);
        for (int a = 0; a < dim_; ++a)
          for (int b = a; b < dim_; ++b) {
            exact(a, b) = p[a].dot(p[b]);
            exact(b, a) = exact(a, b);
          }
        gram.assign(m_count_, exact);
      } else {
        gram = hash_gram(p);
      }

      for (int m = 0; m < m_count_; ++m) {
        MatXd sigma = gram[m];
        for (int d = 0; d < dim_; ++d) sigma(d, d) = diag.per_node[m][d];

        Eigen::SelfAdjointEigenSolver<MatXd> eig(
            0.5 * (sigma + sigma.transpose()));
        if (eig.eigenvalues().minCoeff() < -0.1)
          throw HashBudgetError(
              "ppd-em: Gram estimate produced eigenvalue " +
              std::to_string(eig.eigenvalues().minCoeff()) +
              "; increase the signature length");
        thetas_[m].means[j] = mu.per_node[m];
        thetas_[m].covs[j] =
            repair_covariance(sigma, config_.em.cov_floor);
      }
    }
    assert_agreement(thetas_);
  }

  EmTrace fit_loop() {
    init_theta();
    EmTrace trace;
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < config_.em.max_iterations; ++k) {
      const double ll = e_phase(k);
      trace.log_likelihood.push_back(ll);
      trace.iterations = k + 1;
      if (k > 0) {
        const double slack = 1e-8 * std::max(1.0, std::abs(prev_ll));
        if (ll < prev_ll - slack) trace.monotonicity_violations.push_back(k);
        if (std::abs(ll - prev_ll) <
            config_.em.tolerance * std::max(1.0, std::abs(prev_ll))) {
          trace.converged = true;
          break;
        }
      }
      prev_ll = ll;
      m_phase();
      if (config_.em.record_params)
        trace.params_per_iteration.push_back(thetas_[0]);
    }
    return trace;
  }

  const std::vector<GmmParams>& thetas() const { return thetas_; }
  const std::vector<Responsibilities>& responsibilities() const {
    return resp_;
  }

 private:
  uint64_t next_invocation() { return invocation_++; }

  std::vector<MatXd> hash_gram(const std::vector<VecXd>& p) {
    const int n_words = (config_.hash_bits + 31) / 32;
    MatXd chunk_init = MatXd::Zero(m_count_, dim_ * n_words);
    MatXd norm_init = MatXd::Zero(m_count_, dim_);
    std::vector<SignHash> own(dim_);
    for (int m = 0; m < m_count_; ++m) {
      for (int v : {m, m_count_ + m}) {
        own[v] = sign_hash(p[v], projections_, v);
        chunk_init.row(m).segment(v * n_words, n_words) =
            words_to_reals(own[v].words).transpose();
        norm_init(m, v) = p[v].norm();
      }
    }
    const PhaseResult chunks = executor_.broadcast(
        chunk_init, true, MessageType::kHashChunks, "mstep-hash");
    const PhaseResult norms = executor_.broadcast(
        norm_init, false, MessageType::kNormValue, "mstep-norm");

    std::vector<MatXd> gram(m_count_);
    for (int m = 0; m < m_count_; ++m) {
      std::vector<SignHash> hashes(dim_);
      for (int v = 0; v < dim_; ++v) {
        hashes[v].owner = v;
        hashes[v].bits = config_.hash_bits;
        hashes[v].words = reals_to_words(
            chunks.per_node[m].segment(v * n_words, n_words));
      }
      gram[m] = gram_from_hashes(hashes, norms.per_node[m]).values;
    }
    return gram;
  }

  const std::vector<VerticalSlice>& slices_;
  const Topology& topology_;
  const PpdEmConfig& config_;
  PhaseExecutor& executor_;
  SimNet* net_;
  int m_count_, dim_, n_count_;
  uint64_t run_key_;
  ProjectionSet projections_;
  uint64_t invocation_ = 0;
  std::vector<GmmParams> thetas_;
  std::vector<MatXd> log_dens_;
  std::vector<Responsibilities> resp_;
};

std::unique_ptr<PhaseExecutor> make_step_executor(const Topology& topology,
                                                  const PpdEmConfig& config) {
  if (config.mode == PpdMode::kExactOracle)
    return std::make_unique<ExactExecutor>(topology.nodes());
  return std::make_unique<DirectProtocolExecutor>(
      topology, metropolis_weights(topology), config.consensus);
}

}  // namespace

double local_first_sum_term(const VerticalSlice& slice, const MatXd& precision,
                            const VecXd& mean, int n, int i) {
  const int m_count = int(mean.size()) / 2;
  const int m = slice.node;
  const double dev_p = slice.columns(n, 0) - mean[m];
  const double dev_f = slice.columns(n, 1) - mean[m_count + m];
  return precision(m, i) * dev_p + precision(m_count + m, i) * dev_f;
}

VecXd local_first_sum_terms(const VerticalSlice& slice, const MatXd& precision,
                            const VecXd& mean) {
  const int dim = int(mean.size());
  const int m_count = dim / 2;
  const int m = slice.node;
  const int n_count = slice.samples();
  const VecXd dev_p = slice.columns.col(0).array() - mean[m];
  const VecXd dev_f = slice.columns.col(1).array() - mean[m_count + m];
  VecXd out(size_t(n_count) * dim);
  for (int n = 0; n < n_count; ++n)
    out.segment(n * dim, dim) = dev_p[n] * precision.row(m).transpose() +
                                dev_f[n] * precision.row(m_count + m).transpose();
  return out;
}

VecXd local_second_sum_terms(const VerticalSlice& slice, const VecXd& tau,
                             const VecXd& mean) {
  const int dim = int(mean.size());
  const int m_count = dim / 2;
  const int m = slice.node;
  const int n_count = slice.samples();
  if (tau.size() != Eigen::Index(n_count) * dim)
    throw DimensionError("ppd-em: first-summation vector has wrong length");
  VecXd out(n_count);
  for (int n = 0; n < n_count; ++n) {
    const double dev_p = slice.columns(n, 0) - mean[m];
    const double dev_f = slice.columns(n, 1) - mean[m_count + m];
    out[n] = tau[n * dim + m] * dev_p + tau[n * dim + m_count + m] * dev_f;
  }
  return out;
}

std::vector<Responsibilities> distributed_e_step(
    const std::vector<VerticalSlice>& slices, const GmmParams& theta,
    const Topology& topology, const PpdEmConfig& config) {
  check_slices(slices);
  auto executor = make_step_executor(topology, config);
  EmDriver driver(slices, topology, config, *executor, nullptr);
  driver.seed_theta(theta);
  driver.e_phase(0);
  return driver.responsibilities();
}

std::vector<GmmParams> distributed_m_step(
    const std::vector<VerticalSlice>& slices, const Responsibilities& resp,
    const Topology& topology, const PpdEmConfig& config) {
  check_slices(slices);
  if (resp.cols() != slices[0].samples())
    throw DimensionError("distributed_m_step: responsibilities do not match "
                         "the sample count");
  auto executor = make_step_executor(topology, config);
  EmDriver driver(slices, topology, config, *executor, nullptr);
  driver.seed_resp(resp);
  driver.m_phase();
  return driver.thetas();
}

PpdEmResult ppd_em_fit(const std::vector<VerticalSlice>& slices,
                       const Topology& topology, const PpdEmConfig& config,
                       const FailurePlan& failures) {
  check_slices(slices);
  PpdEmResult result;

  if (config.mode == PpdMode::kExactOracle) {
    ExactExecutor executor(topology.nodes());
    EmDriver driver(slices, topology, config, executor, nullptr);
    result.trace = driver.fit_loop();
    result.theta_per_node = driver.thetas();
    return result;
  }

  SimNet net(topology, metropolis_weights(topology), failures);
  if (net.plan_disconnects())
    throw NotConnectedError(
        "ppd_em_fit: the failure plan disconnects the topology");
  std::vector<double> raw;
  raw.reserve(size_t(slices.size()) * slices[0].samples() * 2);
  for (const auto& s : slices)
    raw.insert(raw.end(), s.columns.data(),
               s.columns.data() + s.columns.size());
  net.set_raw_matcher(raw);

  SimnetExecutor executor(net, config.consensus);
  EmDriver driver(slices, topology, config, executor, &net);
  result.trace = driver.fit_loop();
  result.theta_per_node = driver.thetas();
  result.accounting = net.accounting();
  result.privacy = net.privacy_log();
  return result;
}

}  // namespace windem
