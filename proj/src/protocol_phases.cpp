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

#include "windem/protocol_phases.hpp"

#include <algorithm>
#include <cmath>

namespace windem {

namespace {

uint64_t pack_pair(int a, int b) {
  return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
}

std::vector<int> active_neighbors_of(const Topology& topology, int m,
                                     const CutSet& cuts) {
  std::vector<int> out;
  for (int i : topology.neighbors(m))
    if (!cuts.count(make_edge(m, i))) out.push_back(i);
  return out;
}

// Ciphertext chunks of `scaled` under the receiver's exchange key.
// Counters depend only on (run_key, invocation, receiver, sender), never on
// the transport, so every execution path encrypts identically.
std::vector<paillier::Ciphertext> encrypt_scaled(const SecureSumContext& c,
                                                 uint64_t invocation,
                                                 int receiver, int sender,
                                                 const VecXd& scaled) {
  const auto pts = c.codecs[receiver].encode_vector(
      std::span<const double>(scaled.data(), size_t(scaled.size())));
  const CounterRng rng(
      derive_key(c.run_key, "ppd-enc", invocation, pack_pair(receiver, sender)));
  std::vector<paillier::Ciphertext> cts(pts.size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < int(pts.size()); ++k)
    cts[k] = c.tables[receiver].encrypt(pts[k], rng, uint64_t(k) * 4);
  return cts;
}

std::vector<mpz_class> draw_masks(const SecureSumContext& c,
                                  uint64_t invocation, int m, int count) {
  const auto& codec = c.codecs[m];
  const CounterRng rng(derive_key(c.run_key, "ppd-mask", invocation, m));
  const uint64_t stride = uint64_t(codec.slot_bits + 64 + 63) / 64 + 1;
  std::vector<mpz_class> masks(count);
  for (int d = 0; d < count; ++d)
    masks[d] = codec.random_slot_mask(rng, uint64_t(d) * stride);
  return masks;
}

std::vector<paillier::Ciphertext> encrypt_masks(
    const SecureSumContext& c, uint64_t invocation, int m,
    std::span<const mpz_class> masks) {
  const auto pts = c.codecs[m].encode_masks(masks);
  const CounterRng rng(
      derive_key(c.run_key, "ppd-enc", invocation, pack_pair(m, m)));
  std::vector<paillier::Ciphertext> cts(pts.size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < int(pts.size()); ++k)
    cts[k] = c.tables[m].encrypt(pts[k], rng, uint64_t(k) * 4);
  return cts;
}

std::vector<mpz_class> decrypt_chunks(
    const SecureSumContext& c, int owner,
    std::span<const paillier::Ciphertext> cts) {
  std::vector<mpz_class> out(cts.size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < int(cts.size()); ++k)
    out[k] = paillier::decrypt(cts[k], c.keypairs[owner]);
  return out;
}

void multiply_into(std::vector<paillier::Ciphertext>& acc,
                   std::span<const paillier::Ciphertext> cts,
                   const paillier::PublicKey& pk) {
  if (acc.size() != cts.size())
    throw Error("secure sum: ciphertext chunk count mismatch");
  for (size_t k = 0; k < acc.size(); ++k) {
    if (cts[k].key_fingerprint != pk.fingerprint)
      throw KeyMismatchError("secure sum: ciphertext under the wrong key");
    acc[k].value = acc[k].value * cts[k].value % pk.n_squared;
  }
}

std::vector<uint8_t> serialize_ciphertexts(
    std::span<const paillier::Ciphertext> cts) {
  std::vector<uint8_t> out;
  for (const auto& ct : cts) {
    const auto bytes = paillier::serialize(ct);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

std::vector<paillier::Ciphertext> deserialize_ciphertexts(
    std::span<const uint8_t> bytes, const paillier::PublicKey& pk) {
  std::vector<paillier::Ciphertext> out;
  size_t at = 0;
  while (at + 4 <= bytes.size()) {
    const uint32_t width = (uint32_t(bytes[at]) << 24) |
                           (uint32_t(bytes[at + 1]) << 16) |
                           (uint32_t(bytes[at + 2]) << 8) |
                           uint32_t(bytes[at + 3]);
    if (at + 4 + width > bytes.size())
      throw Error("secure sum: truncated ciphertext payload");
    out.push_back(
        paillier::deserialize_ciphertext(bytes.subspan(at, 4 + width), pk));
    at += 4 + width;
  }
  return out;
}

std::vector<uint8_t> serialize_mpz_list(std::span<const mpz_class> values) {
  std::vector<uint8_t> out;
  for (const auto& v : values) {
    const size_t width = v == 0 ? 0 : (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
    out.push_back(uint8_t(width >> 24));
    out.push_back(uint8_t(width >> 16));
    out.push_back(uint8_t(width >> 8));
    out.push_back(uint8_t(width));
    const size_t start = out.size();
    out.resize(start + width);
    if (width > 0) {
      size_t written = 0;
      mpz_export(out.data() + start, &written, 1, 1, 1, 0, v.get_mpz_t());
    }
  }
  return out;
}

std::vector<mpz_class> deserialize_mpz_list(std::span<const uint8_t> bytes) {
  std::vector<mpz_class> out;
  size_t at = 0;
  while (at + 4 <= bytes.size()) {
    const uint32_t width = (uint32_t(bytes[at]) << 24) |
                           (uint32_t(bytes[at + 1]) << 16) |
                           (uint32_t(bytes[at + 2]) << 8) |
                           uint32_t(bytes[at + 3]);
    if (at + 4 + width > bytes.size())
      throw Error("secure sum: truncated plaintext payload");
    mpz_class v = 0;
    if (width > 0)
      mpz_import(v.get_mpz_t(), width, 1, 1, 1, 0, bytes.data() + at + 4);
    out.push_back(std::move(v));
    at += 4 + width;
  }
  return out;
}

void check_locals(const std::vector<VecXd>& locals, int nodes) {
  if (int(locals.size()) != nodes)
    throw DimensionError("allsum: one local vector per node required");
  for (const auto& l : locals)
    if (l.size() != locals[0].size())
      throw DimensionError("allsum: local vectors differ in length");
}

void apply_integer_guard(VecXd& recovered) {
  for (int d = 0; d < recovered.size(); ++d) {
    const double rounded = std::round(recovered[d]);
    const double residual = std::abs(recovered[d] - rounded);
    if (residual > 1e-3)
      throw BroadcastIntegrityError(
          "integer payload residual " + std::to_string(residual) +
              " exceeds the rounding guard at component " + std::to_string(d),
          residual);
    recovered[d] = rounded;
  }
}

}  // namespace

SecureSumContext SecureSumContext::create(const Topology& topology,
                                          const CutSet& cuts,
                                          uint64_t run_key, uint64_t epoch,
                                          int key_bits, int fractional_bits,
                                          int integer_bits, int max_addends) {
  SecureSumContext ctx;
  ctx.run_key = run_key;
  ctx.epoch = epoch;
  ctx.key_bits = key_bits;
  const int m_count = topology.nodes();
  ctx.designated.resize(m_count);
  ctx.keypairs.reserve(m_count);
  ctx.tables.reserve(m_count);
  ctx.codecs.reserve(m_count);
  for (int m = 0; m < m_count; ++m) {
    const auto actives = active_neighbors_of(topology, m, cuts);
    if (actives.empty())
      throw NotConnectedError("secure sum: node " + std::to_string(m) +
                              " has no active neighbor");
    ctx.designated[m] = actives.front();
    ctx.keypairs.push_back(
        paillier::keygen(key_bits, derive_key(run_key, "ppd-key", epoch, m)));
    ctx.tables.emplace_back(ctx.keypairs.back().pk);
    ctx.codecs.emplace_back(ctx.keypairs.back().pk, fractional_bits,
                            integer_bits, max_addends);
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Exact transport.

PhaseResult ExactExecutor::allsum(const std::vector<VecXd>& locals,
                                  const SecureSumContext*, uint64_t,
                                  const std::string&) {
  check_locals(locals, nodes_);
  VecXd sum = locals[0];
  for (int m = 1; m < nodes_; ++m) sum += locals[m];
  PhaseResult res;
  res.per_node.assign(nodes_, sum);
  return res;
}

PhaseResult ExactExecutor::broadcast(const MatXd& init, bool, MessageType,
                                     const std::string&) {
  const VecXd recovered = init.colwise().sum().transpose();
  PhaseResult res;
  res.per_node.assign(nodes_, recovered);
  return res;
}

// ---------------------------------------------------------------------------
// In-process protocol arithmetic.

PhaseResult DirectProtocolExecutor::allsum(const std::vector<VecXd>& locals,
                                           const SecureSumContext* crypto,
                                           uint64_t invocation,
                                           const std::string&) {
  const int m_count = topology_.nodes();
  check_locals(locals, m_count);
  if (crypto == nullptr)
    throw Error("allsum: protocol execution requires crypto material");
  const int dim = int(locals[0].size());

  MatXd g1(m_count, dim);
  for (int m = 0; m < m_count; ++m) {
    const auto actives = active_neighbors_of(topology_, m, cuts_);
    if (actives.empty())
      throw NotConnectedError("secure sum: node " + std::to_string(m) +
                              " has no active neighbor");
    const auto masks = draw_masks(*crypto, invocation, m, dim);
    auto aggregate = encrypt_masks(*crypto, invocation, m, masks);
    for (int i : actives) {
      const VecXd scaled = weights_(m, i) * locals[i];
      const auto cts = encrypt_scaled(*crypto, invocation, m, i, scaled);
      multiply_into(aggregate, cts, crypto->keypairs[m].pk);
    }
    const auto plain = decrypt_chunks(*crypto, m, aggregate);
    const auto unmasked = crypto->codecs[m].decode_unmasked(
        plain, masks, int(actives.size()) + 1, dim);
    const Eigen::Map<const VecXd> xi(unmasked.data(), dim);
    g1.row(m) = (weights_(m, m) * locals[m] + xi).transpose();
  }

  ConsensusConfig cfg = consensus_;
  cfg.finalize_max = true;
  const ConsensusRun run = run_consensus(g1, weights_, topology_, cfg, cuts_);
  PhaseResult res;
  res.rounds = run.rounds + run.finalize_rounds;
  res.per_node.reserve(m_count);
  for (int m = 0; m < m_count; ++m)
    res.per_node.push_back(m_count * run.values.row(m).transpose());
  return res;
}

PhaseResult DirectProtocolExecutor::broadcast(const MatXd& init,
                                              bool integer_valued, MessageType,
                                              const std::string&) {
  ConsensusConfig cfg = consensus_;
  cfg.finalize_max = true;
  const ConsensusRun run = run_consensus(init, weights_, topology_, cfg, cuts_);
  const int m_count = topology_.nodes();
  PhaseResult res;
  res.rounds = run.rounds + run.finalize_rounds;
  res.per_node.reserve(m_count);
  for (int m = 0; m < m_count; ++m) {
    VecXd v = m_count * run.values.row(m).transpose();
    if (integer_valued) apply_integer_guard(v);
    res.per_node.push_back(std::move(v));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Consensus exchange sub-machine.

ConsensusExchange::ConsensusExchange(int node, const Topology& topology,
                                     const MatXd& weights, MessageType type)
    : node_(node), topology_(topology), weights_(weights), type_(type) {}

void ConsensusExchange::send_value(NodeContext& ctx) {
  for (int i : ctx.active_neighbors()) ctx.send(i, type_, value_);
}

void ConsensusExchange::start(NodeContext& ctx, VecXd initial) {
  value_ = std::move(initial);
  started_ = true;
  send_value(ctx);
}

bool ConsensusExchange::on_tick(NodeContext& ctx,
                                std::span<const Message> inbox) {
  const auto& nbrs = topology_.neighbors(node_);
  std::vector<const VecXd*> vals(nbrs.size(), nullptr);
  for (const auto& msg : inbox) {
    if (msg.type != type_) continue;
    const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), msg.src);
    if (it != nbrs.end() && *it == msg.src)
      vals[size_t(it - nbrs.begin())] = &std::get<VecXd>(msg.payload);
  }

  if (max_mode_) {
    value_ = max_update(value_, vals);
    ++max_rounds_done_;
    if (max_rounds_done_ >= topology_.nodes() - 1) {
      finished_ = true;
      return true;
    }
  } else {
    value_ = consensus_update(node_, value_, weights_, nbrs, vals);
    ++averaging_rounds_;
  }
  send_value(ctx);
  return false;
}

// ---------------------------------------------------------------------------
// Secure sum node program.

SumPhaseProgram::SumPhaseProgram(int node, VecXd local,
                                 const SecureSumContext& crypto,
                                 uint64_t invocation, const Topology& topology,
                                 const MatXd& weights)
    : node_(node),
      local_(std::move(local)),
      crypto_(crypto),
      invocation_(invocation),
      exchange_(node, topology, weights, MessageType::kConsensusValue) {}

void SumPhaseProgram::on_tick(NodeContext& ctx,
                              std::span<const Message> inbox) {
  switch (stage_) {
    case Stage::kSendCiphertexts: {
      // Every neighbor gets this node's value scaled by the receiver-side
      // weight, encrypted under the receiver's exchange key.
      for (int m : ctx.active_neighbors()) {
        const VecXd scaled =
            ctx.net().weights()(m, node_) * local_;
        const auto cts =
            encrypt_scaled(crypto_, invocation_, m, node_, scaled);
        ctx.send(m, MessageType::kCiphertext, serialize_ciphertexts(cts));
      }
      stage_ = Stage::kAggregate;
      break;
    }
    case Stage::kAggregate: {
      const int dim = int(local_.size());
      masks_ = draw_masks(crypto_, invocation_, node_, dim);
      aggregate_ = encrypt_masks(crypto_, invocation_, node_, masks_);
      addends_ = 1;
      for (const auto& msg : inbox) {
        if (msg.type != MessageType::kCiphertext) continue;
        const auto cts = deserialize_ciphertexts(
            std::get<std::vector<uint8_t>>(msg.payload),
            crypto_.keypairs[node_].pk);
        multiply_into(aggregate_, cts, crypto_.keypairs[node_].pk);
        ++addends_;
      }
      if (addends_ < 2)
        throw Error("secure sum: no neighbor ciphertexts received");
      if (addends_ == 2)
        ctx.net().add_privacy_caveat(
            "node " + std::to_string(node_) +
            " has a single neighbor; unmasking reveals that neighbor's "
            "weighted value");
      ctx.send(crypto_.designated[node_], MessageType::kMaskedSumRequest,
               serialize_ciphertexts(aggregate_));
      stage_ = Stage::kDecrypt;
      break;
    }
    case Stage::kDecrypt: {
      // Serve decryption for every node that designated us.
      for (const auto& msg : inbox) {
        if (msg.type != MessageType::kMaskedSumRequest) continue;
        const int owner = msg.src;
        if (crypto_.designated[owner] != node_)
          throw Error("secure sum: unexpected masked-sum request");
        const auto cts = deserialize_ciphertexts(
            std::get<std::vector<uint8_t>>(msg.payload),
            crypto_.keypairs[owner].pk);
        const auto plain = decrypt_chunks(crypto_, owner, cts);
        ctx.send(owner, MessageType::kMaskedSumReply,
                 serialize_mpz_list(plain));
      }
      stage_ = Stage::kUnmask;
      break;
    }
    case Stage::kUnmask: {
      const Message* reply = nullptr;
      for (const auto& msg : inbox)
        if (msg.type == MessageType::kMaskedSumReply) reply = &msg;
      if (reply == nullptr)
        throw Error("secure sum: masked-sum reply missing");
      const auto plain = deserialize_mpz_list(
          std::get<std::vector<uint8_t>>(reply->payload));
      const int dim = int(local_.size());
      const auto unmasked = crypto_.codecs[node_].decode_unmasked(
          plain, masks_, addends_, dim);
      const Eigen::Map<const VecXd> xi(unmasked.data(), dim);
      const VecXd g1 = ctx.net().weights()(node_, node_) * local_ + xi;
      aggregate_.clear();
      stage_ = Stage::kExchange;
      exchange_.start(ctx, g1);
      break;
    }
    case Stage::kExchange: {
      if (exchange_.on_tick(ctx, inbox)) stage_ = Stage::kDone;
      break;
    }
    case Stage::kDone:
      break;
  }
}

// ---------------------------------------------------------------------------
// Broadcast node program.

BroadcastProgram::BroadcastProgram(int node, VecXd one_hot_row,
                                   const Topology& topology,
                                   const MatXd& weights, MessageType type)
    : node_(node),
      initial_(std::move(one_hot_row)),
      exchange_(node, topology, weights, type) {}

void BroadcastProgram::on_tick(NodeContext& ctx,
                               std::span<const Message> inbox) {
  if (finished_) return;
  if (!exchange_.started()) {
    exchange_.start(ctx, std::move(initial_));
    return;
  }
  if (exchange_.on_tick(ctx, inbox)) finished_ = true;
}

// ---------------------------------------------------------------------------
// Simulator-hosted executor.

namespace {

// Watches a set of exchanges; once every node is exchanging and the spread
// drops below tolerance, flips all of them to max mode. Enforces the round
// budget. This is the simulator's control plane: a real deployment would
// run a distributed termination check instead.
template <typename Program>
SimNet::Oversight make_controller(std::vector<std::unique_ptr<Program>>& progs,
                                  const ConsensusConfig& cfg,
                                  const Topology& topology) {
  const int budget = cfg.max_rounds > 0
                         ? cfg.max_rounds
                         : 10 * topology.nodes() * topology.diameter();
  return [&progs, cfg, budget](SimNet&, long) {
    if (progs.empty() || progs[0]->in_max_mode()) return;
    for (const auto& p : progs)
      if (!p->exchanging()) return;
    MatXd values(int(progs.size()), progs[0]->value().size());
    for (size_t m = 0; m < progs.size(); ++m)
      values.row(m) = progs[m]->value().transpose();
    const double spread = max_spread(values);
    if (spread < cfg.tolerance) {
      for (auto& p : progs) p->enter_max_mode();
    } else if (progs[0]->averaging_rounds() >= budget) {
      throw ConvergenceError("consensus did not converge in " +
                                 std::to_string(budget) + " rounds",
                             spread);
    }
  };
}

}  // namespace

PhaseResult SimnetExecutor::allsum(const std::vector<VecXd>& locals,
                                   const SecureSumContext* crypto,
                                   uint64_t invocation,
                                   const std::string& label) {
  const int m_count = net_.topology().nodes();
  check_locals(locals, m_count);
  if (crypto == nullptr)
    throw Error("allsum: protocol execution requires crypto material");
  net_.set_phase_label(label);

  std::vector<std::unique_ptr<SumPhaseProgram>> programs;
  programs.reserve(m_count);
  for (int m = 0; m < m_count; ++m)
    programs.push_back(std::make_unique<SumPhaseProgram>(
        m, locals[m], *crypto, invocation, net_.topology(), net_.weights()));

  std::vector<NodeProgram*> ptrs;
  for (auto& p : programs) ptrs.push_back(p.get());
  net_.run_phase(ptrs, make_controller(programs, consensus_, net_.topology()));

  PhaseResult res;
  res.rounds = programs[0]->averaging_rounds() + (m_count - 1);
  res.per_node.reserve(m_count);
  for (auto& p : programs) res.per_node.push_back(m_count * p->value());
  return res;
}

PhaseResult SimnetExecutor::broadcast(const MatXd& init, bool integer_valued,
                                      MessageType type,
                                      const std::string& label) {
  const int m_count = net_.topology().nodes();
  net_.set_phase_label(label);

  std::vector<std::unique_ptr<BroadcastProgram>> programs;
  programs.reserve(m_count);
  for (int m = 0; m < m_count; ++m)
    programs.push_back(std::make_unique<BroadcastProgram>(
        m, init.row(m).transpose(), net_.topology(), net_.weights(), type));

  std::vector<NodeProgram*> ptrs;
  for (auto& p : programs) ptrs.push_back(p.get());
  net_.run_phase(ptrs, make_controller(programs, consensus_, net_.topology()));

  PhaseResult res;
  res.per_node.reserve(m_count);
  for (auto& p : programs) {
    VecXd v = m_count * p->value();
    if (integer_valued) apply_integer_guard(v);
    res.per_node.push_back(std::move(v));
  }
  return res;
}

}  // namespace windem
