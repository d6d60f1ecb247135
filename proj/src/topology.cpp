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

#include "windem/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include <json.hpp>

namespace windem {

namespace {

std::vector<int> bfs_distances(int start, int nodes,
                               const std::vector<std::vector<int>>& adj,
                               const CutSet& cuts) {
  std::vector<int> dist(nodes, -1);
  std::deque<int> queue{start};
  dist[start] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[u]) {
      if (cuts.count(make_edge(u, v))) continue;
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

void Topology::build_adjacency() {
  adjacency_.assign(nodes_, {});
  for (const auto& [a, b] : edges_) {
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

Topology Topology::from_edges(int nodes, std::vector<Edge> edges) {
  if (nodes <= 0) throw Error("topology: need at least one node");
  Topology t;
  t.nodes_ = nodes;
  for (auto& e : edges) e = make_edge(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const auto& [a, b] : edges) {
    if (a == b) throw Error("topology: self-loops are not allowed");
    if (a < 0 || b >= nodes) throw Error("topology: edge endpoint out of range");
  }
  t.edges_ = std::move(edges);
  t.build_adjacency();
  if (!t.connected())
    throw NotConnectedError("topology: graph is not connected");
  return t;
}

Topology Topology::from_coordinates(std::vector<std::array<double, 2>> coords,
                                    double eta) {
  const int n = static_cast<int>(coords.size());
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double dx = coords[a][0] - coords[b][0];
      const double dy = coords[a][1] - coords[b][1];
      if (std::sqrt(dx * dx + dy * dy) < eta) edges.emplace_back(a, b);
    }
  }
  Topology t = from_edges(n, std::move(edges));
  t.coords_ = std::move(coords);
  t.eta_ = eta;
  return t;
}

bool Topology::has_edge(int a, int b) const {
  const auto& nbrs = adjacency_[a];
  return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

bool Topology::connected(const CutSet& cuts) const {
  const auto dist = bfs_distances(0, nodes_, adjacency_, cuts);
  return std::all_of(dist.begin(), dist.end(), [](int d) { return d >= 0; });
}

int Topology::diameter() const {
  int diam = 0;
  for (int s = 0; s < nodes_; ++s) {
    const auto dist = bfs_distances(s, nodes_, adjacency_, {});
    diam = std::max(diam, *std::max_element(dist.begin(), dist.end()));
  }
  return diam;
}

Topology Topology::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open topology file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid topology JSON in " + path + ": " + e.what());
  }

  if (doc.contains("edges")) {
    const int nodes = doc.at("nodes").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges"))
      edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    Topology t = from_edges(nodes, std::move(edges));
    if (doc.contains("coordinates")) {
      for (const auto& c : doc.at("coordinates"))
        t.coords_.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    }
    return t;
  }
  if (doc.contains("coordinates")) {
    std::vector<std::array<double, 2>> coords;
    for (const auto& c : doc.at("coordinates"))
      coords.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    return from_coordinates(std::move(coords), doc.at("eta").get<double>());
  }
  throw IoError("topology JSON needs either 'edges' or 'coordinates'+'eta'");
}

void Topology::save_json(const std::string& path) const {
  nlohmann::json doc;
  doc["nodes"] = nodes_;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : edges_) edges.push_back({a, b});
  doc["edges"] = edges;
  if (!coords_.empty()) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& c : coords_) coords.push_back({c[0], c[1]});
    doc["coordinates"] = coords;
    if (eta_ > 0.0) doc["eta"] = eta_;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write topology file: " + path);
  out << doc.dump(2) << "\n";
}

Topology Topology::case_study_9() {
  // Nine sites with a mix of degree-2 and degree-5 nodes; connected with
  // diameter 3 and a consensus contraction factor around 0.55.
  return from_edges(9, {{0, 1},
                        {0, 2},
                        {0, 3},
                        {1, 2},
                        {1, 4},
                        {2, 5},
                        {3, 4},
                        {3, 6},
                        {4, 5},
                        {4, 7},
                        {5, 8},
                        {6, 7},
                        {7, 8},
                        {2, 4}});
}

MatXd metropolis_weights(const Topology& topology) {
  const int m_count = topology.nodes();
  if (!topology.connected())
    throw NotConnectedError("metropolis_weights: graph is not connected");
  MatXd w = MatXd::Zero(m_count, m_count);
  for (const auto& [a, b] : topology.edges()) {
    const double v =
        1.0 / (std::max(topology.degree(a), topology.degree(b)) + 1.0);
    w(a, b) = v;
    w(b, a) = v;
  }
  for (int m = 0; m < m_count; ++m) w(m, m) = 1.0 - w.row(m).sum();
  return w;
}

}  // namespace windem
