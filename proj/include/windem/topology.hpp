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

#include <array>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "windem/common.hpp"

namespace windem {

using Edge = std::pair<int, int>;  // stored with first < second

/// Set of cut (failed) edges; empty means the full topology is active.
using CutSet = std::set<Edge>;

inline Edge make_edge(int a, int b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

/// Undirected connected communication graph over M nodes (0-based ids).
class Topology {
 public:
  static Topology from_edges(int nodes, std::vector<Edge> edges);
  /// Connects every pair of nodes closer than `eta`.
  static Topology from_coordinates(std::vector<std::array<double, 2>> coords,
                                   double eta);
  static Topology load_json(const std::string& path);
  void save_json(const std::string& path) const;

  /// The nine-node graph used throughout the case studies and tests.
  static Topology case_study_9();

  int nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(int a, int b) const;
  /// Neighbor ids in ascending order.
  const std::vector<int>& neighbors(int m) const { return adjacency_[m]; }
  int degree(int m) const { return static_cast<int>(adjacency_[m].size()); }
  const std::vector<std::array<double, 2>>& coordinates() const {
    return coords_;
  }
  double eta() const { return eta_; }

  /// True if the graph minus `cuts` is connected.
  bool connected(const CutSet& cuts = {}) const;
  int diameter() const;

 private:
  Topology() = default;
  void build_adjacency();

  int nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::array<double, 2>> coords_;
  double eta_ = 0.0;
};

/// Metropolis weight matrix: symmetric, rows sum to 1, zero off the edge set.
MatXd metropolis_weights(const Topology& topology);

}  // namespace windem
