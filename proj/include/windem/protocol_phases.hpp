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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "windem/consensus.hpp"
#include "windem/paillier.hpp"
#include "windem/simnet.hpp"
#include "windem/topology.hpp"

namespace windem {

// The two collective operations every distributed phase reduces to:
//   allsum    - every node contributes a private vector; all obtain the sum.
//               The first exchange is ciphertext-protected, the rest is
//               plain averaging, and a max-exchange pass leaves all nodes
//               with bit-identical results.
//   broadcast - every node owns some entries of a shared vector; all
//               recover the complete vector.
// Three executors provide them: exact transport (oracle), in-process
// protocol arithmetic, and the message-level simulator. The protocol
// arithmetic is shared, so the latter two produce identical bits.

/// Keys, encryption tables and packed codecs for one secure-sum epoch.
/// Node m's first-iteration exchange uses a keypair generated by its
/// designated neighbor (the lowest-indexed active one). Key material is
/// derived deterministically from (run_key, epoch) so that every execution
/// path regenerates the same bits.
struct SecureSumContext {
  uint64_t run_key = 0;
  uint64_t epoch = 0;
  int key_bits = 512;
  std::vector<int> designated;               // per node
  std::vector<paillier::Keypair> keypairs;   // keypair for node m's exchange
  std::vector<paillier::EncryptionTable> tables;
  std::vector<paillier::PackedCodec> codecs;

  static SecureSumContext create(const Topology& topology, const CutSet& cuts,
                                 uint64_t run_key, uint64_t epoch,
                                 int key_bits, int fractional_bits,
                                 int integer_bits, int max_addends);
};

struct PhaseResult {
  std::vector<VecXd> per_node;  // result as seen by each node
  int rounds = 0;               // averaging + finalize rounds
};

class PhaseExecutor {
 public:
  virtual ~PhaseExecutor() = default;

  /// Sum of the per-node vectors. `crypto` may be null only for executors
  /// that do not need it (exact transport). `invocation` must be unique per
  /// call so encryption randomness and masks never repeat.
  virtual PhaseResult allsum(const std::vector<VecXd>& locals,
                             const SecureSumContext* crypto,
                             uint64_t invocation, const std::string& label) = 0;

  /// Row m of `init` holds node m's entries and zeros elsewhere; recovers
  /// the overlay of all rows at every node. Integer payloads are rounded
  /// under the integrity guard.
  virtual PhaseResult broadcast(const MatXd& init, bool integer_valued,
                                MessageType type, const std::string& label) = 0;
};

/// Transport oracle: exact sums and gathers, no communication error.
class ExactExecutor : public PhaseExecutor {
 public:
  explicit ExactExecutor(int nodes) : nodes_(nodes) {}
  PhaseResult allsum(const std::vector<VecXd>& locals,
                     const SecureSumContext* crypto, uint64_t invocation,
                     const std::string& label) override;
  PhaseResult broadcast(const MatXd& init, bool integer_valued,
                        MessageType type, const std::string& label) override;

 private:
  int nodes_;
};

/// Full protocol arithmetic executed by an in-process loop (no simulator).
class DirectProtocolExecutor : public PhaseExecutor {
 public:
  DirectProtocolExecutor(const Topology& topology, MatXd weights,
                         ConsensusConfig consensus, CutSet cuts = {})
      : topology_(topology),
        weights_(std::move(weights)),
        consensus_(consensus),
        cuts_(std::move(cuts)) {}

  PhaseResult allsum(const std::vector<VecXd>& locals,
                     const SecureSumContext* crypto, uint64_t invocation,
                     const std::string& label) override;
  PhaseResult broadcast(const MatXd& init, bool integer_valued,
                        MessageType type, const std::string& label) override;

 private:
  Topology topology_;
  MatXd weights_;
  ConsensusConfig consensus_;
  CutSet cuts_;
};

/// Same arithmetic, executed as node programs on a SimNet instance, which
/// provides delivery, failure injection, accounting and the privacy log.
class SimnetExecutor : public PhaseExecutor {
 public:
  SimnetExecutor(SimNet& net, ConsensusConfig consensus)
      : net_(net), consensus_(consensus) {}

  PhaseResult allsum(const std::vector<VecXd>& locals,
                     const SecureSumContext* crypto, uint64_t invocation,
                     const std::string& label) override;
  PhaseResult broadcast(const MatXd& init, bool integer_valued,
                        MessageType type, const std::string& label) override;

 private:
  SimNet& net_;
  ConsensusConfig consensus_;
};

// ---------------------------------------------------------------------------
// Node programs (exposed for the simulator-level tests).

/// Value-exchange sub-machine: averaging rounds until the controller flips
/// it to max mode, then nodes-1 max rounds for exact agreement.
class ConsensusExchange {
 public:
  ConsensusExchange(int node, const Topology& topology, const MatXd& weights,
                    MessageType type);

  void start(NodeContext& ctx, VecXd initial);
  bool on_tick(NodeContext& ctx, std::span<const Message> inbox);
  void enter_max_mode() { max_mode_ = true; }
  bool in_max_mode() const { return max_mode_; }
  bool started() const { return started_; }
  bool finished() const { return finished_; }
  const VecXd& value() const { return value_; }
  int averaging_rounds() const { return averaging_rounds_; }

 private:
  void send_value(NodeContext& ctx);

  int node_;
  const Topology& topology_;
  const MatXd& weights_;
  MessageType type_;
  VecXd value_;
  bool started_ = false;
  bool finished_ = false;
  bool max_mode_ = false;
  int averaging_rounds_ = 0;
  int max_rounds_done_ = 0;
};

/// Algorithm: the first neighbor exchange is encrypted; each node forwards
/// the masked aggregate to its designated neighbor for decryption, removes
/// its mask, and continues with plain averaging.
class SumPhaseProgram : public NodeProgram {
 public:
  SumPhaseProgram(int node, VecXd local, const SecureSumContext& crypto,
                  uint64_t invocation, const Topology& topology,
                  const MatXd& weights);

  void on_tick(NodeContext& ctx, std::span<const Message> inbox) override;
  bool done() const override { return stage_ == Stage::kDone; }

  /// Current consensus value (empty until the exchange starts).
  const VecXd& value() const { return exchange_.value(); }
  bool exchanging() const { return exchange_.started(); }
  void enter_max_mode() { exchange_.enter_max_mode(); }
  bool in_max_mode() const { return exchange_.in_max_mode(); }
  int averaging_rounds() const { return exchange_.averaging_rounds(); }

 private:
  enum class Stage { kSendCiphertexts, kAggregate, kDecrypt, kUnmask,
                     kExchange, kDone };

  int node_;
  VecXd local_;
  const SecureSumContext& crypto_;
  uint64_t invocation_;
  Stage stage_ = Stage::kSendCiphertexts;
  ConsensusExchange exchange_;
  std::vector<mpz_class> masks_;          // this node's slot masks
  std::vector<paillier::Ciphertext> aggregate_;  // product of received cts
  int addends_ = 0;
};

/// Plain consensus dissemination of owned entries (means, variances, hash
/// chunks, norms).
class BroadcastProgram : public NodeProgram {
 public:
  BroadcastProgram(int node, VecXd one_hot_row, const Topology& topology,
                   const MatXd& weights, MessageType type);

  void on_tick(NodeContext& ctx, std::span<const Message> inbox) override;
  bool done() const override { return finished_; }

  const VecXd& value() const { return exchange_.value(); }
  bool exchanging() const { return exchange_.started(); }
  void enter_max_mode() { exchange_.enter_max_mode(); }
  bool in_max_mode() const { return exchange_.in_max_mode(); }

 private:
  int node_;
  VecXd initial_;
  ConsensusExchange exchange_;
  bool finished_ = false;
};

}  // namespace windem
