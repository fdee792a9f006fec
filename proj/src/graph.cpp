// SPDX-License-Identifier: Apache-2.0
#include "faigcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <string>

#include "faigcn/error.hpp"

namespace faigcn::graph {

std::vector<JointEdge> skeleton_edges_coco18() {
  using J = JointId;
  return {
      {J::Neck, J::RShoulder}, {J::Neck, J::LShoulder}, {J::RShoulder, J::RElbow},
      {J::RElbow, J::RWrist},  {J::LShoulder, J::LElbow}, {J::LElbow, J::LWrist},
      {J::Neck, J::RHip},      {J::RHip, J::RKnee},       {J::RKnee, J::RAnkle},
      {J::Neck, J::LHip},      {J::LHip, J::LKnee},       {J::LKnee, J::LAnkle},
      {J::Neck, J::Nose},      {J::Nose, J::REye},        {J::REye, J::REar},
      {J::Nose, J::LEye},      {J::LEye, J::LEar},
  };
}

PoseFrequencyGraph build_graph(std::size_t num_bins, bool inter_frequency) {
  if (num_bins < 1) throw ParameterError("graph needs at least one frequency bin");
  PoseFrequencyGraph g;
  g.num_bins = num_bins;
  const auto skeleton = skeleton_edges_coco18();
  g.edges.reserve(num_bins * skeleton.size() + (num_bins - 1) * kNumJoints);
  for (std::size_t b = 0; b < num_bins; ++b) {
    for (auto [a, c] : skeleton) {
      auto u = g.node_index(b, index(a));
      auto v = g.node_index(b, index(c));
      g.edges.push_back({std::min(u, v), std::max(u, v)});
    }
  }
  if (inter_frequency) {
    for (std::size_t b = 0; b + 1 < num_bins; ++b) {
      for (std::size_t i = 0; i < kNumJoints; ++i) {
        g.edges.push_back({g.node_index(b, i), g.node_index(b + 1, i)});
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& x, const Edge& y) { return std::pair(x.u, x.v) < std::pair(y.u, y.v); });
  return g;
}

PartitionStrategy partition_strategy_from_name(std::string_view name) {
  if (name == "uniform") return PartitionStrategy::Uniform;
  if (name == "distance") return PartitionStrategy::Distance;
  if (name == "spatial") return PartitionStrategy::Spatial;
  throw ParameterError("unknown partition strategy '" + std::string(name) + "'");
}

std::string_view partition_strategy_name(PartitionStrategy s) {
  switch (s) {
    case PartitionStrategy::Uniform: return "uniform";
    case PartitionStrategy::Distance: return "distance";
    case PartitionStrategy::Spatial: return "spatial";
  }
  throw ParameterError("unknown partition strategy");
}

namespace {

std::vector<std::vector<std::size_t>> adjacency_lists(const PoseFrequencyGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.num_nodes());
  for (const auto& e : g.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

std::vector<std::size_t> root_distances(const PoseFrequencyGraph& g,
                                        const std::vector<std::vector<std::size_t>>& adj) {
  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(g.num_nodes(), kUnseen);
  std::deque<std::size_t> queue;
  auto bfs_from = [&](std::size_t root) {
    dist[root] = 0;
    queue.push_back(root);
    while (!queue.empty()) {
      auto u = queue.front();
      queue.pop_front();
      for (auto v : adj[u]) {
        if (dist[v] == kUnseen) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
  };
  for (std::size_t b = 0; b < g.num_bins; ++b) {
    auto neck = g.node_index(b, index(JointId::Neck));
    if (dist[neck] == kUnseen) bfs_from(neck);
  }
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    if (dist[u] == kUnseen) bfs_from(u);
  }
  return dist;
}

}  // namespace

PartitionLabels partition(const PoseFrequencyGraph& graph, PartitionStrategy strategy) {
  PartitionLabels labels;
  labels.num_nodes = graph.num_nodes();
  labels.num_partitions = strategy == PartitionStrategy::Uniform    ? 1
                          : strategy == PartitionStrategy::Distance ? 2
                                                                    : 3;
  const auto adj = adjacency_lists(graph);
  std::vector<std::size_t> dist;
  if (strategy == PartitionStrategy::Spatial) dist = root_distances(graph, adj);

  labels.entries.reserve(graph.num_nodes() + 2 * graph.edges.size());
  for (std::size_t u = 0; u < graph.num_nodes(); ++u) {
    bool self_done = false;
    auto push_self = [&] {
      labels.entries.push_back({u, u, 0});
      self_done = true;
    };
    for (auto v : adj[u]) {
      if (!self_done && v > u) push_self();
      std::uint8_t p = 0;
      switch (strategy) {
        case PartitionStrategy::Uniform: p = 0; break;
        case PartitionStrategy::Distance: p = 1; break;
        case PartitionStrategy::Spatial:
          p = dist[v] < dist[u] ? 1 : dist[v] > dist[u] ? 2 : 0;
          break;
      }
      labels.entries.push_back({u, v, p});
    }
    if (!self_done) push_self();
  }
  return labels;
}

SparseMatrix NormalizedAdjacency::combined() const {
  SparseMatrix out;
  out.rows = out.cols = num_nodes;
  out.row_ptr.push_back(0);
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t r = 0; r < num_nodes; ++r) {
    row.clear();
    for (const auto& p : partitions) {
      for (auto k = p.row_ptr[r]; k < p.row_ptr[r + 1]; ++k) row.emplace_back(p.col_idx[k], p.values[k]);
    }
    std::sort(row.begin(), row.end());
    for (std::size_t i = 0; i < row.size();) {
      auto c = row[i].first;
      double v = 0.0;
      for (; i < row.size() && row[i].first == c; ++i) v += row[i].second;
      out.col_idx.push_back(c);
      out.values.push_back(v);
    }
    out.row_ptr.push_back(out.col_idx.size());
  }
  return out;
}

NormalizedAdjacency normalize_adjacency(const PoseFrequencyGraph& graph, const PartitionLabels& labels) {
  if (labels.num_nodes != graph.num_nodes()) {
    throw DimensionError("partition labels built for " + std::to_string(labels.num_nodes) +
                         " nodes, graph has " + std::to_string(graph.num_nodes()));
  }
  const std::size_t n = graph.num_nodes();
  std::vector<double> degree(n, 0.0);
  for (const auto& e : labels.entries) {
    if (e.partition >= labels.num_partitions) throw ParameterError("partition label out of range");
    degree[e.row] += 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(degree[i] > 0.0)) throw ContractError("isolated node " + std::to_string(i) + " in adjacency");
    inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  }

  NormalizedAdjacency adj;
  adj.num_nodes = n;
  adj.partitions.resize(labels.num_partitions);
  for (auto& p : adj.partitions) {
    p.rows = p.cols = n;
    p.row_ptr.assign(n + 1, 0);
  }
  for (const auto& e : labels.entries) ++adj.partitions[e.partition].row_ptr[e.row + 1];
  for (auto& p : adj.partitions) {
    for (std::size_t i = 0; i < n; ++i) p.row_ptr[i + 1] += p.row_ptr[i];
    p.col_idx.resize(p.row_ptr[n]);
    p.values.resize(p.row_ptr[n]);
  }
  std::vector<std::vector<std::size_t>> fill(labels.num_partitions);
  for (std::size_t k = 0; k < labels.num_partitions; ++k) {
    fill[k].assign(adj.partitions[k].row_ptr.begin(), adj.partitions[k].row_ptr.end() - 1);
  }
  // entries arrive sorted by (row, col), so each row's columns stay sorted.
  for (const auto& e : labels.entries) {
    auto& p = adj.partitions[e.partition];
    auto dst = fill[e.partition][e.row]++;
    p.col_idx[dst] = e.col;
    p.values[dst] = inv_sqrt[e.row] * inv_sqrt[e.col];
  }
  return adj;
}

void export_edge_list(std::ostream& out, const PoseFrequencyGraph& graph, const PartitionLabels& labels) {
  auto label_of = [&](std::size_t r, std::size_t c) -> int {
    auto it = std::lower_bound(labels.entries.begin(), labels.entries.end(), std::pair(r, c),
                               [](const LabeledEntry& e, const std::pair<std::size_t, std::size_t>& key) {
                                 return std::pair(e.row, e.col) < key;
                               });
    if (it == labels.entries.end() || it->row != r || it->col != c) return -1;
    return it->partition;
  };
  for (const auto& e : graph.edges) {
    out << e.u / graph.num_joints << ',' << e.u % graph.num_joints << " -- " << e.v / graph.num_joints
        << ',' << e.v % graph.num_joints << " [" << label_of(e.u, e.v) << ' ' << label_of(e.v, e.u)
        << "]\n";
  }
}

}  // namespace faigcn::graph
