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

#include "windem/ppd_inner.hpp"

namespace windem {

GramEstimate gram_from_hashes(const std::vector<SignHash>& hashes,
                              const VecXd& norms) {
  const int count = int(hashes.size());
  if (norms.size() != count)
    throw DimensionError("gram_from_hashes: norm count mismatch");
  GramEstimate gram;
  gram.values.resize(count, count);
  for (int a = 0; a < count; ++a) {
    gram.values(a, a) = norms[a] * norms[a];
    for (int b = a + 1; b < count; ++b) {
      const double beta = angle_from_hashes(hashes[a], hashes[b]);
      const double v = inner_product_from(beta, norms[a], norms[b]);
      gram.values(a, b) = v;
      gram.values(b, a) = v;
    }
  }
  return gram;
}

GramEstimate ppd_inner_products(const std::vector<VecXd>& vectors,
                                const Topology& topology,
                                const InnerProductConfig& config,
                                const ConsensusConfig& consensus,
                                PhaseExecutor* executor) {
  const int m_count = topology.nodes();
  const int v_count = int(vectors.size());
  if (v_count != 2 * m_count)
    throw DimensionError("ppd_inner_products: need two vectors per node");
  const int length = int(vectors[0].size());
  for (const auto& v : vectors)
    if (int(v.size()) != length)
      throw DimensionError("ppd_inner_products: vectors differ in length");

  const ProjectionSet projections{config.projection_seed, length, config.bits};
  const int n_words = (config.bits + 31) / 32;

  // Each node hashes its own two vectors and owns the corresponding chunk
  // and norm entries of the broadcast payloads.
  std::vector<SignHash> own_hashes(v_count);
  MatXd chunk_init = MatXd::Zero(m_count, v_count * n_words);
  MatXd norm_init = MatXd::Zero(m_count, v_count);
  for (int m = 0; m < m_count; ++m) {
    for (int v : {m, m_count + m}) {
      own_hashes[v] = sign_hash(vectors[v], projections, v);
      chunk_init.row(m).segment(v * n_words, n_words) =
          words_to_reals(own_hashes[v].words).transpose();
      norm_init(m, v) = vectors[v].norm();
    }
  }

  DirectProtocolExecutor fallback(topology, metropolis_weights(topology),
                                  consensus);
  PhaseExecutor& exec = executor ? *executor : fallback;
  const PhaseResult chunks = exec.broadcast(chunk_init, true,
                                            MessageType::kHashChunks,
                                            "inner-hash");
  const PhaseResult norms = exec.broadcast(norm_init, false,
                                           MessageType::kNormValue,
                                           "inner-norm");

  // All nodes decode the same payloads; assemble once per node and check
  // they agree bit for bit.
  GramEstimate first;
  for (int m = 0; m < m_count; ++m) {
    std::vector<SignHash> hashes(v_count);
    for (int v = 0; v < v_count; ++v) {
      hashes[v].owner = v;
      hashes[v].bits = config.bits;
      hashes[v].words = reals_to_words(
          chunks.per_node[m].segment(v * n_words, n_words));
    }
    GramEstimate gram = gram_from_hashes(hashes, norms.per_node[m]);
    if (m == 0) {
      first = std::move(gram);
    } else if (!(gram.values.array() == first.values.array()).all()) {
      throw Error("ppd_inner_products: nodes disagree on the Gram estimate");
    }
  }
  return first;
}

}  // namespace windem
