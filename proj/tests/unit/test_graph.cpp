#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "kagnn/dataset.hpp"
#include "kagnn/error.hpp"
#include "kagnn/graph.hpp"

using namespace kagnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("kagnn_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("from_edges builds a sorted symmetric CSR and reports drops") {
  Graph::BuildStats stats;
  Graph g = Graph::from_edges(4, {{2, 0}, {0, 1}, {1, 0}, {3, 3}, {0, 2}}, &stats);
  CHECK(stats.dropped_self_loops == 1);
  CHECK(stats.dropped_duplicates == 2);  // 1->0 repeats 0->1, 0->2 repeats 2->0
  CHECK(g.num_edges() == 2);
  CHECK(g.degree(0) == 2);
  CHECK(g.degree(3) == 0);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(1, 2));
  g.validate();

  auto pairs = g.edge_list();
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == std::pair<int64_t, int64_t>{0, 1});
  CHECK(pairs[1] == std::pair<int64_t, int64_t>{0, 2});

  CHECK_THROWS_AS(Graph::from_edges(2, {{0, 5}}), DataError);
}

TEST_CASE("gcn normalization weights follow 1/sqrt((deg+1)(deg+1))") {
  // Path 0-1-2: deg = 1,2,1.
  Graph g = Graph::from_edges(4, {{0, 1}, {1, 2}});
  auto plan = gcn_norm_plan(g);
  CHECK(plan->self_weight[0] == doctest::Approx(0.5));        // 1/(1+1)
  CHECK(plan->self_weight[1] == doctest::Approx(1.0 / 3.0));  // 1/(2+1)
  CHECK(plan->self_weight[3] == doctest::Approx(1.0));        // isolated
  // Edge 0-1: 1/sqrt(2*3)
  size_t e01 = static_cast<size_t>(plan->offsets[0]);
  CHECK(plan->targets[e01] == 1);
  CHECK(plan->weights[e01] == doctest::Approx(1.0 / std::sqrt(6.0)));
}

TEST_CASE("neighbor sum plan has unit weights and no self term") {
  Graph g = Graph::from_edges(3, {{0, 1}, {1, 2}});
  auto plan = neighbor_sum_plan(g);
  for (double w : plan->weights) CHECK(w == 1.0);
  for (double s : plan->self_weight) CHECK(s == 0.0);
  CHECK(plan->offsets[3] == 4);
}

TEST_CASE("attention index lists each node's closed neighborhood contiguously") {
  Graph g = Graph::from_edges(3, {{0, 1}});
  auto idx = build_attention_index(g);
  REQUIRE(idx->offsets.size() == 4);
  // Node 0: {1, 0}; node 1: {0, 1}; node 2: {2}.
  CHECK(idx->offsets[1] - idx->offsets[0] == 2);
  CHECK(idx->offsets[3] - idx->offsets[2] == 1);
  for (int64_t v = 0; v < 3; ++v) {
    bool self_found = false;
    for (int64_t e = idx->offsets[static_cast<size_t>(v)]; e < idx->offsets[static_cast<size_t>(v) + 1]; ++e) {
      CHECK(idx->center[static_cast<size_t>(e)] == v);
      self_found = self_found || idx->source[static_cast<size_t>(e)] == v;
    }
    CHECK(self_found);
  }
}

TEST_CASE("batching stacks graphs block-diagonally with per-node graph ids") {
  Graph a = Graph::from_edges(2, {{0, 1}});
  a.feat_dim = 1;
  a.features = {1.0, 2.0};
  a.graph_label = 0;
  Graph b = Graph::from_edges(3, {{0, 2}});
  b.feat_dim = 1;
  b.features = {3.0, 4.0, 5.0};
  b.graph_label = 1;

  GraphBatch batch = make_batch({&a, &b});
  CHECK(batch.num_graphs == 2);
  CHECK(batch.merged.num_nodes == 5);
  CHECK(batch.merged.num_edges() == 2);
  CHECK(batch.merged.has_edge(0, 1));
  CHECK(batch.merged.has_edge(2, 4));  // b's 0-2 shifted by 2
  CHECK_FALSE(batch.merged.has_edge(1, 2));
  CHECK(batch.graph_index == std::vector<int64_t>{0, 0, 1, 1, 1});
  CHECK(batch.node_offsets == std::vector<int64_t>{0, 2, 5});
  CHECK(batch.graph_labels == std::vector<int64_t>{0, 1});
  CHECK(batch.merged.features[2] == 3.0);
}

TEST_CASE("synthetic sbm keeps most edges inside the blocks") {
  Dataset ds = synth_dataset("sbm_node", 7, 40);
  const Graph& g = ds.graphs.at(0);
  REQUIRE(g.num_nodes == 40);
  REQUIRE(!g.node_labels.empty());
  int64_t intra = 0, inter = 0;
  for (auto [u, v] : g.edge_list())
    (g.node_labels[static_cast<size_t>(u)] == g.node_labels[static_cast<size_t>(v)] ? intra : inter)++;
  CHECK(intra > 5 * inter);
  CHECK(ds.num_samples() == 40);
  CHECK(ds.num_classes() == 2);
}

TEST_CASE("synthetic datasets are reproducible from the seed") {
  Dataset a = synth_dataset("cycles_vs_paths", 3, 20);
  Dataset b = synth_dataset("cycles_vs_paths", 3, 20);
  REQUIRE(a.graphs.size() == b.graphs.size());
  for (size_t i = 0; i < a.graphs.size(); ++i) {
    CHECK(a.graphs[i].targets == b.graphs[i].targets);
    CHECK(a.graphs[i].features == b.graphs[i].features);
    CHECK(a.graphs[i].graph_label == b.graphs[i].graph_label);
  }
  Dataset c = synth_dataset("cycles_vs_paths", 4, 20);
  bool any_different = false;
  for (size_t i = 0; i < a.graphs.size() && !any_different; ++i)
    any_different = a.graphs[i].targets != c.graphs[i].targets;
  CHECK(any_different);
}

TEST_CASE("node dataset round-trips through the directory format") {
  TempDir dir;
  Dataset ds = synth_dataset("sbm_node", 11, 30);
  ds.splits = make_splits(30, 3, 0.2, 5, ds.graphs[0].node_labels);
  save_dataset(ds, dir.str());

  Dataset back = load_dataset(dir.str(), TaskKind::node_classification);
  const Graph &g0 = ds.graphs[0], &g1 = back.graphs[0];
  CHECK(g1.num_nodes == g0.num_nodes);
  CHECK(g1.offsets == g0.offsets);
  CHECK(g1.targets == g0.targets);
  CHECK(g1.features == g0.features);
  CHECK(g1.node_labels == g0.node_labels);
  REQUIRE(back.splits.has_value());
  CHECK(back.splits->folds.size() == 3);
  CHECK(back.splits->folds[0].train == ds.splits->folds[0].train);
  CHECK(back.load_stats.symmetrized_edges == 0);  // writer emits both directions
}

TEST_CASE("graph dataset round-trips through the jsonl format") {
  TempDir dir;
  std::string file = dir.str() + "/graphs.jsonl";
  Dataset ds = synth_dataset("degree_regression", 13, 12);
  save_dataset(ds, file);

  Dataset back = load_dataset(file, TaskKind::graph_regression);
  REQUIRE(back.graphs.size() == 12);
  for (size_t i = 0; i < 12; ++i) {
    CHECK(back.graphs[i].targets == ds.graphs[i].targets);
    CHECK(back.graphs[i].features == ds.graphs[i].features);
    CHECK(back.graphs[i].graph_target == ds.graphs[i].graph_target);
  }
  CHECK(back.target_dim() == 1);
}

TEST_CASE("loader counts one-way edges and drops self loops") {
  TempDir dir;
  std::ofstream(dir.str() + "/features.csv") << "1.0\n2.0\n3.0\n";
  // 0->1 given once (one-way), 1-2 in both directions, plus a self loop.
  std::ofstream(dir.str() + "/edges.csv") << "0,1\n1,2\n2,1\n2,2\n";
  Dataset ds = load_dataset(dir.str(), TaskKind::node_classification);
  CHECK(ds.load_stats.symmetrized_edges == 1);
  CHECK(ds.load_stats.dropped_self_loops == 1);
  CHECK(ds.graphs[0].num_edges() == 2);
  CHECK(ds.graphs[0].has_edge(0, 1));
}

TEST_CASE("loader rejects non-finite features and ragged rows") {
  TempDir dir;
  {
    std::ofstream f(dir.str() + "/features.csv");
    f << "1.0,2.0\nnan,3.0\n";
    std::ofstream(dir.str() + "/edges.csv") << "0,1\n";
  }
  CHECK_THROWS_AS(load_dataset(dir.str(), TaskKind::node_classification), DataError);

  TempDir dir2;
  {
    std::ofstream f(dir2.str() + "/features.csv");
    f << "1.0,2.0\n3.0\n";
    std::ofstream(dir2.str() + "/edges.csv") << "0,1\n";
  }
  CHECK_THROWS_AS(load_dataset(dir2.str(), TaskKind::node_classification), DataError);
}

TEST_CASE("jsonl loader rejects unknown keys and bad labels") {
  TempDir dir;
  std::string file = dir.str() + "/g.jsonl";
  std::ofstream(file) << R"({"num_nodes": 2, "x": [[1],[2]], "y": 0, "extra": 1})" << "\n";
  CHECK_THROWS_AS(load_dataset(file, TaskKind::graph_classification), DataError);

  std::ofstream(file) << R"({"num_nodes": 2, "x": [[1],[2]], "y": -1})" << "\n";
  CHECK_THROWS_AS(load_dataset(file, TaskKind::graph_classification), DataError);

  std::ofstream(file) << R"({"num_nodes": 2, "x": [[1],[2]], "y": 1.5})" << "\n";
  CHECK_THROWS_AS(load_dataset(file, TaskKind::graph_classification), DataError);
}

TEST_CASE("stratified splits partition every fold and respect class balance") {
  std::vector<int64_t> labels;
  for (int i = 0; i < 40; ++i) labels.push_back(i % 2);
  SplitPlan plan = make_splits(40, 4, 0.25, 9, labels);
  REQUIRE(plan.folds.size() == 4);

  std::set<int64_t> tests_seen;
  for (const Fold& f : plan.folds) {
    std::set<int64_t> all(f.train.begin(), f.train.end());
    all.insert(f.val.begin(), f.val.end());
    all.insert(f.test.begin(), f.test.end());
    CHECK(all.size() == 40);  // disjoint and complete
    CHECK(f.train.size() + f.val.size() + f.test.size() == 40);

    int64_t ones = 0;
    for (int64_t i : f.test) ones += labels[static_cast<size_t>(i)];
    CHECK(ones == static_cast<int64_t>(f.test.size()) / 2);  // stratified
    auto rest = static_cast<double>(40 - f.test.size());
    CHECK(static_cast<int64_t>(f.val.size()) == std::llround(0.25 * rest));
    for (int64_t i : f.test) tests_seen.insert(i);
    CHECK(std::is_sorted(f.train.begin(), f.train.end()));
  }
  CHECK(tests_seen.size() == 40);  // every sample is tested exactly once

  SplitPlan again = make_splits(40, 4, 0.25, 9, labels);
  CHECK(again.folds[2].train == plan.folds[2].train);
  CHECK_THROWS_AS(make_splits(3, 5, 0.1, 0), ConfigError);
}

TEST_CASE("zero validation fraction leaves the val lists empty") {
  SplitPlan plan = make_splits(20, 4, 0.0, 2);
  for (const Fold& f : plan.folds) CHECK(f.val.empty());
}

TEST_CASE("edge split removes held-out positives and avoids forbidden negatives") {
  Dataset ds = synth_dataset("lp_graph", 5, 120);
  const Graph& g = ds.graphs.at(0);
  LpSplit split = lp_edge_split(g, 0.2, 17);

  int64_t expected_test = static_cast<int64_t>(std::llround(0.2 * static_cast<double>(g.num_edges())));
  CHECK(static_cast<int64_t>(split.test_pos.size()) == expected_test);
  CHECK(split.test_neg.size() == split.test_pos.size());
  CHECK(split.train_neg.size() == split.train_pos.size());
  CHECK(static_cast<int64_t>(split.train_pos.size() + split.test_pos.size()) == g.num_edges());
  CHECK(split.train_graph.num_edges() == static_cast<int64_t>(split.train_pos.size()));

  for (auto [u, v] : split.test_pos) {
    CHECK(g.has_edge(u, v));
    CHECK_FALSE(split.train_graph.has_edge(u, v));
  }
  for (auto [u, v] : split.train_pos) CHECK(split.train_graph.has_edge(u, v));
  for (auto& negs : {split.test_neg, split.train_neg})
    for (auto [u, v] : negs) {
      CHECK_FALSE(g.has_edge(u, v));
      CHECK(u != v);
    }

  // A second split over the remaining graph must dodge the first holdout.
  std::vector<std::pair<int64_t, int64_t>> forbidden = split.test_pos;
  forbidden.insert(forbidden.end(), split.test_neg.begin(), split.test_neg.end());
  LpSplit inner = lp_edge_split(split.train_graph, 0.125, 18, forbidden);
  std::set<std::pair<int64_t, int64_t>> banned;
  for (auto [u, v] : forbidden) banned.insert(std::minmax(u, v));
  for (auto& negs : {inner.test_neg, inner.train_neg})
    for (auto [u, v] : negs) CHECK_FALSE(banned.count(std::minmax(u, v)));

  // The message graph keeps every node even when its edges are held out.
  CHECK(split.train_graph.num_nodes == g.num_nodes);
  CHECK(split.train_graph.features == g.features);
}

TEST_CASE("edge splitting prefers to keep every endpoint connected") {
  Dataset ds = synth_dataset("lp_graph", 23, 160);
  LpSplit split = lp_edge_split(ds.graphs.at(0), 0.2, 4);
  int64_t isolated = 0;
  for (int64_t v = 0; v < split.train_graph.num_nodes; ++v)
    if (split.train_graph.degree(v) == 0 && ds.graphs[0].degree(v) > 0) ++isolated;
  CHECK(isolated == 0);
}
