#include <algorithm>
#include <cmath>
#include <set>

#include "kagnn/dataset.hpp"
#include "kagnn/error.hpp"
#include "kagnn/rng.hpp"

// Built-in synthetic datasets, all fully determined by the seed.

namespace kagnn {

namespace {

// Two-block stochastic block model with Gaussian features whose mean is
// shifted per block.
Graph make_sbm(int64_t num_nodes, double p_in, double p_out, int64_t feat_dim, double feat_shift,
               Rng& rng, bool with_labels) {
  int64_t half = num_nodes / 2;
  std::vector<std::pair<int64_t, int64_t>> edges;
  for (int64_t u = 0; u < num_nodes; ++u)
    for (int64_t v = u + 1; v < num_nodes; ++v) {
      bool same = (u < half) == (v < half);
      if (rng.bernoulli(same ? p_in : p_out)) edges.emplace_back(u, v);
    }
  Graph g = Graph::from_edges(num_nodes, edges);
  g.feat_dim = feat_dim;
  g.features.resize(static_cast<size_t>(num_nodes * feat_dim));
  for (int64_t v = 0; v < num_nodes; ++v) {
    double mu = v < half ? feat_shift : -feat_shift;
    for (int64_t c = 0; c < feat_dim; ++c)
      g.features[static_cast<size_t>(v * feat_dim + c)] = rng.normal(mu, 1.0);
  }
  if (with_labels) {
    g.node_labels.resize(static_cast<size_t>(num_nodes));
    for (int64_t v = 0; v < num_nodes; ++v) g.node_labels[static_cast<size_t>(v)] = v < half ? 0 : 1;
  }
  return g;
}

Dataset make_sbm_node(uint64_t seed, int64_t num_nodes) {
  Rng rng(mix_seed(seed, 0x5b3));
  Dataset ds;
  ds.task = TaskKind::node_classification;
  ds.graphs.push_back(make_sbm(num_nodes, 0.9, 0.05, 4, 0.5, rng, true));
  return ds;
}

Dataset make_cycles_vs_paths(uint64_t seed, int64_t num_graphs) {
  Rng rng(mix_seed(seed, 0xc7c));
  Dataset ds;
  ds.task = TaskKind::graph_classification;
  for (int64_t i = 0; i < num_graphs; ++i) {
    bool cycle = i % 2 == 0;  // alternating keeps any prefix balanced
    int64_t n = 5 + rng.randint(8);
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
    if (cycle) edges.emplace_back(n - 1, 0);
    Graph g = Graph::from_edges(n, edges);
    g.feat_dim = 1;
    g.features.assign(static_cast<size_t>(n), 1.0);
    g.graph_label = cycle ? 1 : 0;
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

// Erdos-Renyi graphs; the target couples structure (mean degree) with a
// smooth function of the features.
Dataset make_degree_regression(uint64_t seed, int64_t num_graphs) {
  Rng rng(mix_seed(seed, 0xde6));
  Dataset ds;
  ds.task = TaskKind::graph_regression;
  for (int64_t i = 0; i < num_graphs; ++i) {
    int64_t n = 6 + rng.randint(9);
    double p = rng.uniform(0.2, 0.7);
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t u = 0; u < n; ++u)
      for (int64_t v = u + 1; v < n; ++v)
        if (rng.bernoulli(p)) edges.emplace_back(u, v);
    Graph g = Graph::from_edges(n, edges);
    g.feat_dim = 2;
    g.features.resize(static_cast<size_t>(n * 2));
    double feat_sum = 0.0;
    for (double& f : g.features) {
      f = rng.uniform(-2.0, 2.0);
      feat_sum += f;
    }
    double mean_degree = 2.0 * static_cast<double>(g.num_edges()) / static_cast<double>(n);
    double mean_feat = feat_sum / static_cast<double>(n * 2);
    g.graph_target = {mean_degree + std::sin(mean_feat)};
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

// Four-block SBM. More blocks make uniform negatives mostly cross-block,
// so held-out edges are separable from them once the blocks are learned.
Dataset make_lp_graph(uint64_t seed, int64_t num_nodes) {
  Rng rng(mix_seed(seed, 0x19f));
  constexpr int64_t kBlocks = 4;
  constexpr int64_t kFeat = 8;
  constexpr double kPin = 0.3, kPout = 0.01, kShift = 0.5;

  auto block_of = [&](int64_t v) { return v * kBlocks / num_nodes; };
  std::vector<std::pair<int64_t, int64_t>> edges;
  for (int64_t u = 0; u < num_nodes; ++u)
    for (int64_t v = u + 1; v < num_nodes; ++v)
      if (rng.bernoulli(block_of(u) == block_of(v) ? kPin : kPout)) edges.emplace_back(u, v);

  Graph g = Graph::from_edges(num_nodes, edges);
  g.feat_dim = kFeat;
  g.features.resize(static_cast<size_t>(num_nodes * kFeat));
  for (int64_t v = 0; v < num_nodes; ++v) {
    int64_t b = block_of(v);
    for (int64_t c = 0; c < kFeat; ++c) {
      double mu = (c % kBlocks) == b ? kShift : -kShift;
      g.features[static_cast<size_t>(v * kFeat + c)] = rng.normal(mu, 1.0);
    }
  }

  Dataset ds;
  ds.task = TaskKind::link_prediction;
  ds.graphs.push_back(std::move(g));
  return ds;
}

}  // namespace

bool is_synth_name(const std::string& name) {
  return name == "sbm_node" || name == "cycles_vs_paths" || name == "degree_regression" ||
         name == "lp_graph";
}

Dataset synth_dataset(const std::string& name, uint64_t seed, int64_t num_samples) {
  if (num_samples < 0) throw ConfigError("synth_dataset: negative sample count");
  if (name == "sbm_node") return make_sbm_node(seed, num_samples ? num_samples : 40);
  if (name == "cycles_vs_paths") return make_cycles_vs_paths(seed, num_samples ? num_samples : 120);
  if (name == "degree_regression") return make_degree_regression(seed, num_samples ? num_samples : 120);
  if (name == "lp_graph") return make_lp_graph(seed, num_samples ? num_samples : 200);
  throw ConfigError("unknown synthetic dataset '" + name + "'");
}

}  // namespace kagnn
