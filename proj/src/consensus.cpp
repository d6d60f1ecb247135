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

#include "windem/consensus.hpp"

#include <cmath>

namespace windem {

VecXd consensus_update(int m, const VecXd& own, const MatXd& weights,
                       const std::vector<int>& neighbors,
                       const std::vector<const VecXd*>& neighbor_values) {
  double self_weight = weights(m, m);
  VecXd acc = VecXd::Zero(own.size());
  for (size_t k = 0; k < neighbors.size(); ++k) {
    const int i = neighbors[k];
    if (neighbor_values[k] == nullptr) {
      self_weight += weights(m, i);  // inactive edge: keep the mass
    } else {
      acc += weights(m, i) * (*neighbor_values[k]);
    }
  }
  return self_weight * own + acc;
}

VecXd max_update(const VecXd& own,
                 const std::vector<const VecXd*>& neighbor_values) {
  VecXd out = own;
  for (const VecXd* v : neighbor_values)
    if (v != nullptr) out = out.cwiseMax(*v);
  return out;
}

double max_spread(const MatXd& values) {
  return (values.colwise().maxCoeff() - values.colwise().minCoeff())
      .maxCoeff();
}

namespace {

std::vector<const VecXd*> gather_neighbor_rows(
    const MatXd& values, int m, const std::vector<int>& neighbors,
    const CutSet& cuts, std::vector<VecXd>& storage) {
  std::vector<const VecXd*> out(neighbors.size(), nullptr);
  storage.resize(neighbors.size());
  for (size_t k = 0; k < neighbors.size(); ++k) {
    const int i = neighbors[k];
    if (cuts.count(make_edge(m, i))) continue;
    storage[k] = values.row(i).transpose();
    out[k] = &storage[k];
  }
  return out;
}

}  // namespace

MatXd consensus_round(const MatXd& values, const MatXd& weights,
                      const Topology& topology, const CutSet& cuts) {
  MatXd next(values.rows(), values.cols());
  std::vector<VecXd> storage;
  for (int m = 0; m < topology.nodes(); ++m) {
    const auto& nbrs = topology.neighbors(m);
    const auto ptrs = gather_neighbor_rows(values, m, nbrs, cuts, storage);
    next.row(m) =
        consensus_update(m, values.row(m).transpose(), weights, nbrs, ptrs)
            .transpose();
  }
  return next;
}

ConsensusRun run_consensus(const MatXd& init, const MatXd& weights,
                           const Topology& topology,
                           const ConsensusConfig& config, const CutSet& cuts) {
  if (config.tolerance <= 0.0)
    throw Error("run_consensus: tolerance must be positive");
  if (!topology.connected(cuts))
    throw NotConnectedError("run_consensus: active graph is not connected");

  const int budget = config.max_rounds > 0
                         ? config.max_rounds
                         : 10 * topology.nodes() * topology.diameter();
  ConsensusRun run;
  run.values = init;
  run.spread = max_spread(run.values);
  while (run.spread >= config.tolerance) {
    if (run.rounds >= budget)
      throw ConvergenceError("consensus did not converge in " +
                                 std::to_string(budget) + " rounds",
                             run.spread);
    run.values = consensus_round(run.values, weights, topology, cuts);
    ++run.rounds;
    run.spread = max_spread(run.values);
  }

  if (config.finalize_max) {
    std::vector<VecXd> storage;
    for (int r = 0; r < topology.nodes() - 1; ++r) {
      MatXd next(run.values.rows(), run.values.cols());
      for (int m = 0; m < topology.nodes(); ++m) {
        const auto& nbrs = topology.neighbors(m);
        const auto ptrs =
            gather_neighbor_rows(run.values, m, nbrs, cuts, storage);
        next.row(m) =
            max_update(run.values.row(m).transpose(), ptrs).transpose();
      }
      run.values = next;
      ++run.finalize_rounds;
    }
  }
  return run;
}

BroadcastResult consensus_broadcast(const MatXd& init, const MatXd& weights,
                                    const Topology& topology,
                                    const ConsensusConfig& config,
                                    bool integer_valued, const CutSet& cuts) {
  ConsensusConfig cfg = config;
  cfg.finalize_max = true;  // recovery requires exact agreement
  const ConsensusRun run = run_consensus(init, weights, topology, cfg, cuts);

  BroadcastResult out;
  out.rounds = run.rounds + run.finalize_rounds;
  out.recovered = topology.nodes() * run.values.row(0).transpose();
  if (integer_valued) {
    for (int d = 0; d < out.recovered.size(); ++d) {
      const double rounded = std::round(out.recovered[d]);
      const double residual = std::abs(out.recovered[d] - rounded);
      if (residual > 1e-3)
        throw BroadcastIntegrityError(
            "integer payload residual " + std::to_string(residual) +
                " exceeds the rounding guard at component " +
                std::to_string(d),
            residual);
      out.recovered[d] = rounded;
    }
  }
  return out;
}

}  // namespace windem
