// SPDX-License-Identifier: Apache-2.0
#pragma once

// The pose-frequency graph: one node per (frequency bin, joint), skeleton
// edges inside every bin and chain edges linking a joint across adjacent bins.
// Adjacency is split into neighbour partitions and symmetrically normalized
// as D^-1/2 (A + I) D^-1/2.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string_view>
#include <utility>
#include <vector>

#include "faigcn/nn/sparse.hpp"
#include "faigcn/pose.hpp"

namespace faigcn::graph {

using JointEdge = std::pair<JointId, JointId>;

/// The 17 limb connections of the COCO-18 skeleton (a tree over 18 joints).
std::vector<JointEdge> skeleton_edges_coco18();

struct Edge {
  std::size_t u;
  std::size_t v;  ///< u < v
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct PoseFrequencyGraph {
  std::size_t num_bins = 0;
  std::size_t num_joints = kNumJoints;
  std::vector<Edge> edges;

  std::size_t num_nodes() const noexcept { return num_bins * num_joints; }
  std::size_t node_index(std::size_t bin, std::size_t joint) const noexcept {
    return bin * num_joints + joint;
  }
};

/// B*18 nodes and B*17 + (B-1)*18 edges. `inter_frequency = false` drops the
/// chain edges across bins (used to test bin-permutation equivariance).
PoseFrequencyGraph build_graph(std::size_t num_bins, bool inter_frequency = true);

enum class PartitionStrategy : std::uint8_t { Uniform, Distance, Spatial };

PartitionStrategy partition_strategy_from_name(std::string_view name);
std::string_view partition_strategy_name(PartitionStrategy s);

/// One directed adjacency entry (self loops included) with its partition.
struct LabeledEntry {
  std::size_t row;
  std::size_t col;
  std::uint8_t partition;
};

struct PartitionLabels {
  std::size_t num_partitions = 1;
  std::size_t num_nodes = 0;
  std::vector<LabeledEntry> entries;  ///< sorted by (row, col)
};

/// Spatial labels: 0 = self, 1 = neighbour closer to the root, 2 = farther.
/// The root is the neck at bin 0; components that cannot reach it are rooted
/// at their lowest-bin neck.
PartitionLabels partition(const PoseFrequencyGraph& graph, PartitionStrategy strategy);

using nn::SparseMatrix;

struct NormalizedAdjacency {
  std::size_t num_nodes = 0;
  std::vector<SparseMatrix> partitions;

  /// Sum of the partition matrices.
  SparseMatrix combined() const;
};

/// D~ is the degree of the full A + I (shared by all partitions); each
/// partition keeps only its own entries of D~^-1/2 (A + I) D~^-1/2.
NormalizedAdjacency normalize_adjacency(const PoseFrequencyGraph& graph, const PartitionLabels& labels);

/// One line per undirected edge: "b,i -- b,j [p_uv p_vu]".
void export_edge_list(std::ostream& out, const PoseFrequencyGraph& graph, const PartitionLabels& labels);

}  // namespace faigcn::graph
