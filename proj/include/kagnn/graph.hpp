#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "kagnn/aggregation.hpp"

namespace kagnn {

// Undirected graph in CSR form. Both directions of every edge are stored,
// neighbor lists are sorted, and self loops and duplicates are rejected.
struct Graph {
  int64_t num_nodes = 0;
  std::vector<int64_t> offsets;  // num_nodes + 1
  std::vector<int64_t> targets;  // 2 * num_edges

  int64_t feat_dim = 0;
  std::vector<double> features;  // num_nodes x feat_dim, row major

  std::vector<int64_t> node_labels;  // per-node classes, empty if none
  int64_t graph_label = -1;          // graph-level class, -1 if none
  std::vector<double> graph_target;  // graph-level regression target, empty if none

  int64_t num_edges() const { return static_cast<int64_t>(targets.size()) / 2; }
  int64_t degree(int64_t v) const {
    return offsets[static_cast<size_t>(v) + 1] - offsets[static_cast<size_t>(v)];
  }
  bool has_edge(int64_t u, int64_t v) const;

  std::vector<std::pair<int64_t, int64_t>> edge_list() const;  // u < v

  // Builds the CSR from an undirected edge list. Self loops are dropped and
  // duplicates collapsed; counts of both land in the optional stats.
  struct BuildStats {
    int64_t dropped_self_loops = 0;
    int64_t dropped_duplicates = 0;
  };
  static Graph from_edges(int64_t num_nodes, const std::vector<std::pair<int64_t, int64_t>>& edges,
                          BuildStats* stats = nullptr);

  // Checks CSR invariants; throws DataError on violation.
  void validate() const;
};

// Several graphs merged into one block-diagonal graph with per-node graph ids.
struct GraphBatch {
  Graph merged;
  std::vector<int64_t> graph_index;   // node -> graph
  std::vector<int64_t> node_offsets;  // num_graphs + 1
  int64_t num_graphs = 0;

  std::vector<int64_t> graph_labels;   // stacked classification labels
  std::vector<double> graph_targets;   // stacked regression targets
  int64_t target_dim = 0;
};

GraphBatch make_batch(const std::vector<const Graph*>& graphs);
GraphBatch make_batch(const std::vector<Graph>& graphs, const std::vector<int64_t>& which);

// Symmetric normalization over A + I: entry weight 1/sqrt((deg(v)+1)(deg(u)+1))
// and self weight 1/(deg(v)+1).
std::shared_ptr<AggregationPlan> gcn_norm_plan(const Graph& g);

// Plain neighbor sum, no self term.
std::shared_ptr<AggregationPlan> neighbor_sum_plan(const Graph& g);

// Edge index for attention layers: one entry per (center, source) pair where
// source runs over N(center) and center itself, grouped contiguously.
struct AttentionIndex {
  std::vector<int64_t> center;
  std::vector<int64_t> source;
  std::vector<int64_t> offsets;  // num_nodes + 1 segment bounds
};

std::shared_ptr<AttentionIndex> build_attention_index(const Graph& g);

}  // namespace kagnn
