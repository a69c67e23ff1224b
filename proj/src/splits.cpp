#include <algorithm>
#include <map>
#include <set>

#include "kagnn/dataset.hpp"
#include "kagnn/error.hpp"
#include "kagnn/rng.hpp"

namespace kagnn {

SplitPlan make_splits(int64_t num_samples, int64_t k_folds, double val_fraction, uint64_t seed,
                      const std::vector<int64_t>& labels) {
  if (num_samples < 1) throw DataError("make_splits: no samples");
  if (k_folds < 2 || k_folds > num_samples)
    throw ConfigError("make_splits: k_folds must be in [2, num_samples]");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("make_splits: val_fraction must be in [0, 1)");
  if (!labels.empty() && static_cast<int64_t>(labels.size()) != num_samples)
    throw DimensionError("make_splits: label count does not match num_samples");

  // Shuffle within each class, then deal class members round-robin over the
  // folds; unlabeled data is one big class.
  Rng rng(mix_seed(seed, 0x5b17));
  std::map<int64_t, std::vector<int64_t>> by_class;
  for (int64_t i = 0; i < num_samples; ++i)
    by_class[labels.empty() ? 0 : labels[static_cast<size_t>(i)]].push_back(i);

  std::vector<std::vector<int64_t>> fold_test(static_cast<size_t>(k_folds));
  int64_t cursor = 0;
  for (auto& [cls, members] : by_class) {
    (void)cls;
    rng.shuffle(members);
    for (int64_t i = 0; i < static_cast<int64_t>(members.size()); ++i) {
      fold_test[static_cast<size_t>((cursor + i) % k_folds)].push_back(members[static_cast<size_t>(i)]);
      }
    cursor += static_cast<int64_t>(members.size());
  }

  SplitPlan plan;
  for (int64_t f = 0; f < k_folds; ++f) {
    Fold fold;
    fold.test = fold_test[static_cast<size_t>(f)];
    std::sort(fold.test.begin(), fold.test.end());

    std::vector<int64_t> rest;
    for (int64_t g = 0; g < k_folds; ++g)
      if (g != f)
        rest.insert(rest.end(), fold_test[static_cast<size_t>(g)].begin(),
                    fold_test[static_cast<size_t>(g)].end());
    std::sort(rest.begin(), rest.end());

    Rng fold_rng(mix_seed(seed, 0x7a1d + static_cast<uint64_t>(f)));
    fold_rng.shuffle(rest);
    int64_t val_count = static_cast<int64_t>(std::llround(val_fraction * static_cast<double>(rest.size())));
    if (val_fraction > 0.0 && val_count == 0 && rest.size() > 1) val_count = 1;
    fold.val.assign(rest.begin(), rest.begin() + val_count);
    fold.train.assign(rest.begin() + val_count, rest.end());
    std::sort(fold.val.begin(), fold.val.end());
    std::sort(fold.train.begin(), fold.train.end());
    if (fold.train.empty()) throw DataError("make_splits: fold " + std::to_string(f) + " has no training samples");
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

LpSplit lp_edge_split(const Graph& g, double test_fraction, uint64_t seed,
                      const std::vector<std::pair<int64_t, int64_t>>& extra_forbidden) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw ConfigError("lp_edge_split: test_fraction must be in (0, 1)");
  auto edges = g.edge_list();
  const int64_t m = static_cast<int64_t>(edges.size());
  if (m < 2) throw DataError("lp_edge_split: graph has too few edges to split");
  int64_t want_test = static_cast<int64_t>(std::llround(test_fraction * static_cast<double>(m)));
  want_test = std::max<int64_t>(1, std::min(want_test, m - 1));

  Rng rng(mix_seed(seed, 0x11f0));
  rng.shuffle(edges);

  // Prefer test edges whose removal leaves both endpoints connected.
  std::vector<int64_t> deg(static_cast<size_t>(g.num_nodes));
  for (int64_t v = 0; v < g.num_nodes; ++v) deg[static_cast<size_t>(v)] = g.degree(v);
  std::vector<char> is_test(edges.size(), 0);
  int64_t taken = 0;
  for (size_t i = 0; i < edges.size() && taken < want_test; ++i) {
    auto [u, v] = edges[i];
    if (deg[static_cast<size_t>(u)] > 1 && deg[static_cast<size_t>(v)] > 1) {
      is_test[i] = 1;
      --deg[static_cast<size_t>(u)];
      --deg[static_cast<size_t>(v)];
      ++taken;
    }
  }
  for (size_t i = 0; i < edges.size() && taken < want_test; ++i) {
    if (is_test[i]) continue;
    is_test[i] = 1;
    ++taken;
  }

  LpSplit split;
  std::vector<std::pair<int64_t, int64_t>> train_edges;
  for (size_t i = 0; i < edges.size(); ++i) {
    if (is_test[i])
      split.test_pos.push_back(edges[i]);
    else {
      split.train_pos.push_back(edges[i]);
      train_edges.push_back(edges[i]);
    }
  }

  split.train_graph = Graph::from_edges(g.num_nodes, train_edges);
  split.train_graph.feat_dim = g.feat_dim;
  split.train_graph.features = g.features;
  split.train_graph.node_labels = g.node_labels;

  // Negatives: uniform non-edges, disjoint from every positive and from each
  // other, sampled once per split.
  std::set<std::pair<int64_t, int64_t>> forbidden;
  for (auto [u, v] : edges) forbidden.insert({u, v});
  for (auto [u, v] : extra_forbidden) {
    if (u > v) std::swap(u, v);
    forbidden.insert({u, v});
  }
  const double possible = 0.5 * static_cast<double>(g.num_nodes) * static_cast<double>(g.num_nodes - 1);
  int64_t need = static_cast<int64_t>(split.test_pos.size() + split.train_pos.size());
  if (static_cast<double>(need) > possible - static_cast<double>(m))
    throw DataError("lp_edge_split: not enough non-edges to sample negatives");

  auto sample_negatives = [&](int64_t count, std::vector<std::pair<int64_t, int64_t>>& out) {
    int64_t guard = 0;
    while (static_cast<int64_t>(out.size()) < count) {
      if (++guard > count * 10000) throw DataError("lp_edge_split: negative sampling stalled");
      int64_t u = rng.randint(g.num_nodes);
      int64_t v = rng.randint(g.num_nodes);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (forbidden.count({u, v})) continue;
      forbidden.insert({u, v});
      out.emplace_back(u, v);
    }
  };
  sample_negatives(static_cast<int64_t>(split.test_pos.size()), split.test_neg);
  sample_negatives(static_cast<int64_t>(split.train_pos.size()), split.train_neg);
  return split;
}

}  // namespace kagnn
