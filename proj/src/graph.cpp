#include "kagnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kagnn/error.hpp"

namespace kagnn {

bool Graph::has_edge(int64_t u, int64_t v) const {
  if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes) return false;
  auto lo = targets.begin() + offsets[static_cast<size_t>(u)];
  auto hi = targets.begin() + offsets[static_cast<size_t>(u) + 1];
  return std::binary_search(lo, hi, v);
}

std::vector<std::pair<int64_t, int64_t>> Graph::edge_list() const {
  std::vector<std::pair<int64_t, int64_t>> out;
  out.reserve(static_cast<size_t>(num_edges()));
  for (int64_t v = 0; v < num_nodes; ++v)
    for (int64_t e = offsets[static_cast<size_t>(v)]; e < offsets[static_cast<size_t>(v) + 1]; ++e) {
      int64_t u = targets[static_cast<size_t>(e)];
      if (v < u) out.emplace_back(v, u);
    }
  return out;
}

Graph Graph::from_edges(int64_t num_nodes, const std::vector<std::pair<int64_t, int64_t>>& edges,
                        BuildStats* stats) {
  if (num_nodes < 0) throw DataError("graph: negative node count");
  Graph g;
  g.num_nodes = num_nodes;

  std::vector<std::pair<int64_t, int64_t>> directed;
  directed.reserve(edges.size() * 2);
  int64_t self_loops = 0;
  for (auto [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw DataError("graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                      ") references a missing node");
    if (u == v) {
      ++self_loops;
      continue;
    }
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  size_t before = directed.size();
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  if (stats) {
    stats->dropped_self_loops = self_loops;
    // Each undirected duplicate removed both of its directions.
    stats->dropped_duplicates = static_cast<int64_t>(before - directed.size()) / 2;
  }

  g.offsets.assign(static_cast<size_t>(num_nodes) + 1, 0);
  for (auto& [u, v] : directed) ++g.offsets[static_cast<size_t>(u) + 1];
  for (int64_t i = 0; i < num_nodes; ++i)
    g.offsets[static_cast<size_t>(i) + 1] += g.offsets[static_cast<size_t>(i)];
  g.targets.resize(directed.size());
  for (size_t i = 0; i < directed.size(); ++i) g.targets[i] = directed[i].second;
  return g;
}

void Graph::validate() const {
  if (static_cast<int64_t>(offsets.size()) != num_nodes + 1)
    throw DataError("graph: offsets must have num_nodes + 1 entries");
  if (!offsets.empty() && offsets.front() != 0) throw DataError("graph: offsets must start at 0");
  for (size_t i = 0; i + 1 < offsets.size(); ++i)
    if (offsets[i] > offsets[i + 1]) throw DataError("graph: offsets not monotone");
  if (!offsets.empty() && offsets.back() != static_cast<int64_t>(targets.size()))
    throw DataError("graph: offsets do not cover the target list");
  for (int64_t v = 0; v < num_nodes; ++v) {
    int64_t prev = -1;
    for (int64_t e = offsets[static_cast<size_t>(v)]; e < offsets[static_cast<size_t>(v) + 1]; ++e) {
      int64_t u = targets[static_cast<size_t>(e)];
      if (u < 0 || u >= num_nodes) throw DataError("graph: neighbor out of range");
      if (u == v) throw DataError("graph: self loop stored");
      if (u <= prev) throw DataError("graph: neighbor list not strictly increasing");
      prev = u;
    }
  }
  // Symmetry: (v,u) stored implies (u,v) stored.
  for (int64_t v = 0; v < num_nodes; ++v)
    for (int64_t e = offsets[static_cast<size_t>(v)]; e < offsets[static_cast<size_t>(v) + 1]; ++e)
      if (!has_edge(targets[static_cast<size_t>(e)], v))
        throw DataError("graph: adjacency is not symmetric");
  if (feat_dim < 0 || static_cast<int64_t>(features.size()) != num_nodes * feat_dim)
    throw DataError("graph: feature buffer does not match num_nodes * feat_dim");
}

GraphBatch make_batch(const std::vector<const Graph*>& graphs) {
  if (graphs.empty()) throw DataError("make_batch: empty graph list");
  GraphBatch b;
  b.num_graphs = static_cast<int64_t>(graphs.size());
  b.node_offsets.assign(graphs.size() + 1, 0);

  int64_t feat_dim = graphs[0]->feat_dim;
  int64_t total_nodes = 0, total_entries = 0;
  bool any_label = false, any_target = false;
  int64_t target_dim = -1;
  for (size_t i = 0; i < graphs.size(); ++i) {
    const Graph* g = graphs[i];
    if (g->feat_dim != feat_dim)
      throw DataError("make_batch: feature width mismatch (" + std::to_string(g->feat_dim) + " vs " +
                      std::to_string(feat_dim) + ")");
    total_nodes += g->num_nodes;
    total_entries += static_cast<int64_t>(g->targets.size());
    b.node_offsets[i + 1] = total_nodes;
    if (g->graph_label >= 0) any_label = true;
    if (!g->graph_target.empty()) {
      any_target = true;
      if (target_dim < 0) target_dim = static_cast<int64_t>(g->graph_target.size());
      if (target_dim != static_cast<int64_t>(g->graph_target.size()))
        throw DataError("make_batch: graph target width mismatch");
    }
  }

  Graph& m = b.merged;
  m.num_nodes = total_nodes;
  m.feat_dim = feat_dim;
  m.offsets.reserve(static_cast<size_t>(total_nodes) + 1);
  m.offsets.push_back(0);
  m.targets.reserve(static_cast<size_t>(total_entries));
  m.features.reserve(static_cast<size_t>(total_nodes * feat_dim));
  b.graph_index.reserve(static_cast<size_t>(total_nodes));

  for (size_t i = 0; i < graphs.size(); ++i) {
    const Graph* g = graphs[i];
    int64_t base = b.node_offsets[i];
    for (int64_t v = 0; v < g->num_nodes; ++v) {
      for (int64_t e = g->offsets[static_cast<size_t>(v)]; e < g->offsets[static_cast<size_t>(v) + 1]; ++e)
        m.targets.push_back(base + g->targets[static_cast<size_t>(e)]);
      m.offsets.push_back(static_cast<int64_t>(m.targets.size()));
      b.graph_index.push_back(static_cast<int64_t>(i));
    }
    m.features.insert(m.features.end(), g->features.begin(), g->features.end());
    if (any_label) {
      if (g->graph_label < 0) throw DataError("make_batch: graph without a label in a labeled batch");
      b.graph_labels.push_back(g->graph_label);
    }
    if (any_target) {
      if (static_cast<int64_t>(g->graph_target.size()) != target_dim)
        throw DataError("make_batch: graph without a target in a target batch");
      b.graph_targets.insert(b.graph_targets.end(), g->graph_target.begin(), g->graph_target.end());
    }
  }
  b.target_dim = any_target ? target_dim : 0;
  return b;
}

GraphBatch make_batch(const std::vector<Graph>& graphs, const std::vector<int64_t>& which) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(which.size());
  for (int64_t i : which) {
    if (i < 0 || i >= static_cast<int64_t>(graphs.size()))
      throw DataError("make_batch: graph index out of range");
    ptrs.push_back(&graphs[static_cast<size_t>(i)]);
  }
  return make_batch(ptrs);
}

std::shared_ptr<AggregationPlan> gcn_norm_plan(const Graph& g) {
  auto plan = std::make_shared<AggregationPlan>();
  plan->num_nodes = g.num_nodes;
  plan->offsets = g.offsets;
  plan->targets = g.targets;
  plan->weights.resize(g.targets.size());
  plan->self_weight.resize(static_cast<size_t>(g.num_nodes));
  for (int64_t v = 0; v < g.num_nodes; ++v) {
    double dv = static_cast<double>(g.degree(v)) + 1.0;
    plan->self_weight[static_cast<size_t>(v)] = 1.0 / dv;
    for (int64_t e = g.offsets[static_cast<size_t>(v)]; e < g.offsets[static_cast<size_t>(v) + 1]; ++e) {
      double du = static_cast<double>(g.degree(g.targets[static_cast<size_t>(e)])) + 1.0;
      plan->weights[static_cast<size_t>(e)] = 1.0 / std::sqrt(dv * du);
    }
  }
  return plan;
}

std::shared_ptr<AggregationPlan> neighbor_sum_plan(const Graph& g) {
  auto plan = std::make_shared<AggregationPlan>();
  plan->num_nodes = g.num_nodes;
  plan->offsets = g.offsets;
  plan->targets = g.targets;
  plan->weights.assign(g.targets.size(), 1.0);
  plan->self_weight.assign(static_cast<size_t>(g.num_nodes), 0.0);
  return plan;
}

std::shared_ptr<AttentionIndex> build_attention_index(const Graph& g) {
  auto idx = std::make_shared<AttentionIndex>();
  size_t entries = g.targets.size() + static_cast<size_t>(g.num_nodes);
  idx->center.reserve(entries);
  idx->source.reserve(entries);
  idx->offsets.reserve(static_cast<size_t>(g.num_nodes) + 1);
  idx->offsets.push_back(0);
  for (int64_t v = 0; v < g.num_nodes; ++v) {
    idx->center.push_back(v);  // self first, then neighbors in CSR order
    idx->source.push_back(v);
    for (int64_t e = g.offsets[static_cast<size_t>(v)]; e < g.offsets[static_cast<size_t>(v) + 1]; ++e) {
      idx->center.push_back(v);
      idx->source.push_back(g.targets[static_cast<size_t>(e)]);
    }
    idx->offsets.push_back(static_cast<int64_t>(idx->center.size()));
  }
  return idx;
}

}  // namespace kagnn
