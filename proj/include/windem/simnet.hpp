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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "windem/common.hpp"
#include "windem/topology.hpp"

namespace windem {

// Deterministic synchronous message-passing simulator. Each tick delivers
// the messages sent in the previous tick, then steps every node program in
// node order. Sends are only allowed along edges that are active at the send
// tick; a cut edge blocks sends from its cut tick onward, so nothing is ever
// delivered after the cut.

enum class MessageType : uint8_t {
  kCiphertext,
  kMaskedSumRequest,
  kMaskedSumReply,
  kConsensusValue,
  kHashChunks,
  kNormValue,
};

enum class PrivacyClass : uint8_t {
  kEncrypted,
  kMaskedAggregate,
  kPublicStatistic,
  kHash,
  kNorm,
};

PrivacyClass classify(MessageType type);
const char* to_string(MessageType type);
const char* to_string(PrivacyClass cls);

using Payload = std::variant<std::monostate, VecXd, std::vector<uint8_t>>;

struct Message {
  int src = 0;
  int dst = 0;
  long tick = 0;
  MessageType type = MessageType::kConsensusValue;
  Payload payload;

  size_t payload_bytes() const;
  /// Payload plus the fixed 13-byte envelope (src, dst, type, tick).
  size_t wire_bytes() const { return payload_bytes() + 13; }
};

struct FailureEvent {
  Edge edge;
  long tick = 0;  // sends on this edge are blocked from this tick onward
};

struct FailurePlan {
  std::vector<FailureEvent> events;
  CutSet cuts_at(long tick) const;
  CutSet final_cuts() const;
};

struct PrivacyRecord {
  long tick;
  int src, dst;
  MessageType type;
  PrivacyClass cls;
  uint32_t bytes;
  bool raw_data_exposed;
};

struct PrivacyLog {
  std::vector<PrivacyRecord> records;
  std::vector<std::string> caveats;
  size_t violations = 0;
};

struct AuditReport {
  bool clean = false;
  size_t messages = 0;
  std::vector<size_t> violation_records;  // indices into the log
  std::map<std::string, uint64_t> per_type_counts;
  std::vector<std::string> caveats;
};

/// Checks that no delivered payload exposed raw data; lists per-type counts
/// and the caveats recorded during the run.
AuditReport audit_privacy(const PrivacyLog& log);

struct Accounting {
  struct Item {
    uint64_t messages = 0;
    uint64_t bytes = 0;
  };
  std::map<std::string, Item> per_phase;
  std::map<std::string, Item> per_type;
  uint64_t transcript_hash = 0xcbf29ce484222325ull;
  long ticks = 0;
};

class SimNet;

/// What a node program sees of the network on its turn.
class NodeContext {
 public:
  NodeContext(SimNet& net, int node) : net_(net), node_(node) {}
  int node() const { return node_; }
  long tick() const;
  const std::vector<int>& all_neighbors() const;
  std::vector<int> active_neighbors() const;
  bool edge_active(int other) const;
  void send(int dst, MessageType type, Payload payload);
  SimNet& net() { return net_; }

 private:
  SimNet& net_;
  int node_;
};

class NodeProgram {
 public:
  virtual ~NodeProgram() = default;
  /// Called once per tick with the messages delivered this tick.
  virtual void on_tick(NodeContext& ctx, std::span<const Message> inbox) = 0;
  virtual bool done() const = 0;
};

class SimNet {
 public:
  SimNet(const Topology& topology, MatXd weights, FailurePlan plan = {});

  /// Control-plane hook run after each tick; used for global convergence
  /// checks that a real deployment would implement with an extra
  /// termination protocol.
  using Oversight = std::function<void(SimNet&, long)>;

  /// Steps the given programs (one per node) until all report done and no
  /// messages are in flight. Tick numbering and accounting continue across
  /// phases. Returns the number of ticks executed.
  long run_phase(const std::vector<NodeProgram*>& programs,
                 const Oversight& oversight = {}, long max_ticks = 2000000);

  void set_phase_label(std::string label) { phase_label_ = std::move(label); }
  const std::string& phase_label() const { return phase_label_; }

  /// Raw values for the privacy audit: any delivered plaintext equal to one
  /// of these (bit-exact) marks the message as exposing raw data.
  void set_raw_matcher(std::span<const double> raw_values);
  void add_privacy_caveat(std::string note);

  /// Streams every sent message as one JSON object per line.
  void enable_transcript(const std::string& path);

  const Topology& topology() const { return topology_; }
  const MatXd& weights() const { return weights_; }
  long now() const { return tick_; }
  bool edge_active(int a, int b, long tick) const;
  /// Edges already cut at the current tick.
  CutSet current_cuts() const { return plan_.cuts_at(tick_); }
  /// True if the failure plan eventually disconnects the graph.
  bool plan_disconnects() const { return plan_disconnects_; }

  const Accounting& accounting() const { return accounting_; }
  const PrivacyLog& privacy_log() const { return privacy_log_; }

 private:
  friend class NodeContext;
  void submit(int src, int dst, MessageType type, Payload payload);

  Topology topology_;
  MatXd weights_;
  FailurePlan plan_;
  bool plan_disconnects_ = false;
  long tick_ = 0;
  std::string phase_label_ = "setup";
  std::vector<Message> in_flight_;  // sent this tick, delivered next
  Accounting accounting_;
  PrivacyLog privacy_log_;
  std::vector<uint64_t> raw_patterns_;  // sorted bit patterns
  std::unique_ptr<std::ostream> transcript_;
};

}  // namespace windem
