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

#include "windem/ppd_sum.hpp"

namespace windem {

PpdSumResult ppd_sum(const std::vector<VecXd>& locals,
                     const Topology& topology, const MatXd& weights,
                     const PpdSumConfig& config) {
  for (const auto& l : locals)
    if (!l.allFinite()) throw Error("ppd_sum: non-finite local value");

  const uint64_t run_key = derive_key(config.seed, "ppd-sum");
  const SecureSumContext crypto = SecureSumContext::create(
      topology, {}, run_key, 0, config.key_bits, config.fractional_bits,
      config.integer_bits, topology.nodes() + 1);

  DirectProtocolExecutor executor(topology, weights, config.consensus);
  const PhaseResult res = executor.allsum(locals, &crypto, 0, "ppd-sum");
  return {res.per_node, res.rounds};
}

PpdSumResult ppd_sum(const VecXd& locals, const Topology& topology,
                     const MatXd& weights, const PpdSumConfig& config) {
  std::vector<VecXd> per_node(topology.nodes());
  if (locals.size() != topology.nodes())
    throw DimensionError("ppd_sum: one scalar per node expected");
  for (int m = 0; m < topology.nodes(); ++m)
    per_node[m] = VecXd::Constant(1, locals[m]);
  return ppd_sum(per_node, topology, weights, config);
}

double secure_local_sum(std::span<const paillier::Ciphertext> neighbor_cts,
                        const paillier::Keypair& designated_keypair,
                        const paillier::FixedPointCodec& codec,
                        uint64_t mask_seed) {
  if (neighbor_cts.empty())
    throw Error("secure_local_sum: no neighbor ciphertexts");

  const CounterRng mask_rng(derive_key(mask_seed, "secure-local-sum-mask"));
  const mpz_class mask = codec.random_mask(mask_rng, 0);
  const mpz_class wrapped =
      mask >= 0 ? mask : mpz_class(codec.modulus + mask);

  SeqRng enc_rng(derive_key(mask_seed, "secure-local-sum-enc"));
  std::vector<paillier::Ciphertext> all;
  all.push_back(paillier::encrypt(designated_keypair.pk, wrapped, enc_rng));
  all.insert(all.end(), neighbor_cts.begin(), neighbor_cts.end());

  const paillier::Ciphertext aggregate =
      paillier::add_ciphertexts(designated_keypair.pk, all);
  // The key holder sees only this masked aggregate.
  const mpz_class masked = paillier::decrypt(aggregate, designated_keypair);
  mpz_class unmasked = (masked - mask) % codec.modulus;
  if (unmasked < 0) unmasked += codec.modulus;
  return codec.decode(unmasked);
}

}  // namespace windem
