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

#include "windem/simnet.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace windem {

PrivacyClass classify(MessageType type) {
  switch (type) {
    case MessageType::kCiphertext:
    case MessageType::kMaskedSumRequest:
      return PrivacyClass::kEncrypted;
    case MessageType::kMaskedSumReply:
      return PrivacyClass::kMaskedAggregate;
    case MessageType::kConsensusValue:
      return PrivacyClass::kPublicStatistic;
    case MessageType::kHashChunks:
      return PrivacyClass::kHash;
    case MessageType::kNormValue:
      return PrivacyClass::kNorm;
  }
  return PrivacyClass::kPublicStatistic;
}

const char* to_string(MessageType type) {
  switch (type) {
    case MessageType::kCiphertext: return "CIPHERTEXT";
    case MessageType::kMaskedSumRequest: return "MASKED_SUM_REQUEST";
    case MessageType::kMaskedSumReply: return "MASKED_SUM_REPLY";
    case MessageType::kConsensusValue: return "CONSENSUS_VALUE";
    case MessageType::kHashChunks: return "HASH_CHUNKS";
    case MessageType::kNormValue: return "NORM_VALUE";
  }
  return "?";
}

const char* to_string(PrivacyClass cls) {
  switch (cls) {
    case PrivacyClass::kEncrypted: return "ENCRYPTED";
    case PrivacyClass::kMaskedAggregate: return "MASKED_AGGREGATE";
    case PrivacyClass::kPublicStatistic: return "PUBLIC_STATISTIC";
    case PrivacyClass::kHash: return "HASH";
    case PrivacyClass::kNorm: return "NORM";
  }
  return "?";
}

size_t Message::payload_bytes() const {
  if (std::holds_alternative<VecXd>(payload))
    return 8 * std::get<VecXd>(payload).size();
  if (std::holds_alternative<std::vector<uint8_t>>(payload))
    return std::get<std::vector<uint8_t>>(payload).size();
  return 0;
}

CutSet FailurePlan::cuts_at(long tick) const {
  CutSet cuts;
  for (const auto& e : events)
    if (e.tick <= tick) cuts.insert(e.edge);
  return cuts;
}

CutSet FailurePlan::final_cuts() const {
  CutSet cuts;
  for (const auto& e : events) cuts.insert(e.edge);
  return cuts;
}

AuditReport audit_privacy(const PrivacyLog& log) {
  AuditReport report;
  report.messages = log.records.size();
  for (size_t i = 0; i < log.records.size(); ++i) {
    const auto& r = log.records[i];
    ++report.per_type_counts[to_string(r.type)];
    if (r.raw_data_exposed) report.violation_records.push_back(i);
  }
  report.caveats = log.caveats;
  report.clean = report.violation_records.empty();
  return report;
}

long NodeContext::tick() const { return net_.tick_; }

const std::vector<int>& NodeContext::all_neighbors() const {
  return net_.topology_.neighbors(node_);
}

std::vector<int> NodeContext::active_neighbors() const {
  std::vector<int> out;
  for (int i : net_.topology_.neighbors(node_))
    if (net_.edge_active(node_, i, net_.tick_)) out.push_back(i);
  return out;
}

bool NodeContext::edge_active(int other) const {
  return net_.edge_active(node_, other, net_.tick_);
}

void NodeContext::send(int dst, MessageType type, Payload payload) {
  net_.submit(node_, dst, type, std::move(payload));
}

SimNet::SimNet(const Topology& topology, MatXd weights, FailurePlan plan)
    : topology_(topology), weights_(std::move(weights)), plan_(std::move(plan)) {
  plan_disconnects_ = !topology_.connected(plan_.final_cuts());
}

bool SimNet::edge_active(int a, int b, long tick) const {
  if (!topology_.has_edge(a, b)) return false;
  for (const auto& e : plan_.events)
    if (e.edge == make_edge(a, b) && e.tick <= tick) return false;
  return true;
}

void SimNet::set_raw_matcher(std::span<const double> raw_values) {
  raw_patterns_.clear();
  raw_patterns_.reserve(raw_values.size());
  for (double v : raw_values)
    raw_patterns_.push_back(std::bit_cast<uint64_t>(v));
  std::sort(raw_patterns_.begin(), raw_patterns_.end());
  raw_patterns_.erase(
      std::unique(raw_patterns_.begin(), raw_patterns_.end()),
      raw_patterns_.end());
}

void SimNet::add_privacy_caveat(std::string note) {
  privacy_log_.caveats.push_back(std::move(note));
}

void SimNet::enable_transcript(const std::string& path) {
  auto out = std::make_unique<std::ofstream>(path);
  if (!*out) throw IoError("cannot open transcript file: " + path);
  transcript_ = std::move(out);
}

namespace {

uint64_t fnv_mix(uint64_t h, const void* data, size_t size) {
  const auto* bytes = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

void SimNet::submit(int src, int dst, MessageType type, Payload payload) {
  if (dst < 0 || dst >= topology_.nodes())
    throw Error("send: destination out of range");
  if (src != dst && !edge_active(src, dst, tick_))
    throw Error("send: edge " + std::to_string(src) + "-" +
                std::to_string(dst) + " is not active at tick " +
                std::to_string(tick_));
  Message msg{src, dst, tick_, type, std::move(payload)};

  bool exposed = false;
  if (!raw_patterns_.empty() && std::holds_alternative<VecXd>(msg.payload)) {
    const VecXd& v = std::get<VecXd>(msg.payload);
    for (int i = 0; i < v.size() && !exposed; ++i)
      exposed = std::binary_search(raw_patterns_.begin(), raw_patterns_.end(),
                                   std::bit_cast<uint64_t>(v[i]));
  }

  const auto bytes = msg.wire_bytes();
  auto& phase = accounting_.per_phase[phase_label_];
  ++phase.messages;
  phase.bytes += bytes;
  auto& typed = accounting_.per_type[to_string(type)];
  ++typed.messages;
  typed.bytes += bytes;

  uint64_t h = accounting_.transcript_hash;
  const uint32_t head[4] = {uint32_t(src), uint32_t(dst), uint32_t(tick_),
                            uint32_t(type)};
  h = fnv_mix(h, head, sizeof(head));
  if (std::holds_alternative<VecXd>(msg.payload)) {
    const VecXd& v = std::get<VecXd>(msg.payload);
    h = fnv_mix(h, v.data(), sizeof(double) * v.size());
  } else if (std::holds_alternative<std::vector<uint8_t>>(msg.payload)) {
    const auto& v = std::get<std::vector<uint8_t>>(msg.payload);
    h = fnv_mix(h, v.data(), v.size());
  }
  accounting_.transcript_hash = h;

  privacy_log_.records.push_back({tick_, src, dst, type, classify(type),
                                  uint32_t(bytes), exposed});
  if (exposed) ++privacy_log_.violations;

  if (transcript_) {
    nlohmann::json line;
    line["tick"] = tick_;
    line["src"] = src;
    line["dst"] = dst;
    line["type"] = to_string(type);
    line["class"] = to_string(classify(type));
    line["bytes"] = bytes;
    line["phase"] = phase_label_;
    *transcript_ << line.dump() << "\n";
  }

  in_flight_.push_back(std::move(msg));
}

long SimNet::run_phase(const std::vector<NodeProgram*>& programs,
                       const Oversight& oversight, long max_ticks) {
  if (int(programs.size()) != topology_.nodes())
    throw Error("run_phase: need one program per node");

  const long start_tick = tick_;
  while (true) {
    // Deliver what was sent last tick, grouped by destination, ordered by
    // sender for determinism.
    std::vector<std::vector<Message>> inbox(topology_.nodes());
    for (auto& msg : in_flight_) inbox[msg.dst].push_back(std::move(msg));
    in_flight_.clear();
    for (auto& box : inbox)
      std::stable_sort(box.begin(), box.end(),
                       [](const Message& a, const Message& b) {
                         return a.src < b.src;
                       });

    for (int m = 0; m < topology_.nodes(); ++m) {
      NodeContext ctx(*this, m);
      try {
        programs[m]->on_tick(ctx, inbox[m]);
      } catch (const std::exception& e) {
        throw Error("node " + std::to_string(m) + " failed at tick " +
                    std::to_string(tick_) + ": " + e.what());
      }
    }
    if (oversight) oversight(*this, tick_);
    ++tick_;
    ++accounting_.ticks;

    const bool all_done =
        std::all_of(programs.begin(), programs.end(),
                    [](const NodeProgram* p) { return p->done(); });
    if (all_done && in_flight_.empty()) break;
    if (tick_ - start_tick >= max_ticks)
      throw ConvergenceError("simulation phase exceeded its tick budget",
                             double(tick_ - start_tick));
  }
  return tick_ - start_tick;
}

}  // namespace windem
