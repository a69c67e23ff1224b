#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kagnn/graph.hpp"

namespace kagnn {

enum class TaskKind { node_classification, graph_classification, graph_regression, link_prediction };

std::string task_name(TaskKind t);
TaskKind task_from_name(const std::string& name);

struct LoadStats {
  int64_t symmetrized_edges = 0;  // edges present in only one direction
  int64_t dropped_self_loops = 0;
  int64_t dropped_duplicates = 0;
};

// Train/val/test index lists per fold. Indices are nodes for node tasks and
// graphs for graph tasks.
struct Fold {
  std::vector<int64_t> train, val, test;
};

struct SplitPlan {
  std::vector<Fold> folds;
};

struct Dataset {
  TaskKind task = TaskKind::graph_classification;
  std::vector<Graph> graphs;  // node/link tasks hold exactly one
  LoadStats load_stats;
  std::optional<SplitPlan> splits;  // from splits.json if present

  int64_t num_samples() const {
    return task == TaskKind::node_classification ? graphs.at(0).num_nodes
                                                 : static_cast<int64_t>(graphs.size());
  }
  int64_t feat_dim() const { return graphs.at(0).feat_dim; }
  int64_t num_classes() const;
  int64_t target_dim() const;
  // Labels used for stratified splitting, empty for regression/link tasks.
  std::vector<int64_t> sample_labels() const;
};

// Directory with edges.csv, features.csv, labels.csv and optional
// splits.json for node-level tasks; a JSON-lines file for graph-level tasks.
Dataset load_dataset(const std::string& path, TaskKind kind);
void save_dataset(const Dataset& ds, const std::string& path);

// Deterministic stratified k-fold splits. Labels may be empty for an
// unstratified split. val_fraction is carved out of each fold's training
// portion.
SplitPlan make_splits(int64_t num_samples, int64_t k_folds, double val_fraction, uint64_t seed,
                      const std::vector<int64_t>& labels = {});

// Link-prediction split: removes test positives from the message graph and
// samples one negative per positive, disjoint from every true edge.
struct LpSplit {
  Graph train_graph;
  std::vector<std::pair<int64_t, int64_t>> train_pos, train_neg;
  std::vector<std::pair<int64_t, int64_t>> test_pos, test_neg;
};

// Holds out a fraction of edges plus matched non-edge negatives. Negatives
// avoid every edge of g and every pair in `extra_forbidden` (pass previously
// held-out positives when splitting twice).
LpSplit lp_edge_split(const Graph& g, double test_fraction, uint64_t seed,
                      const std::vector<std::pair<int64_t, int64_t>>& extra_forbidden = {});

// Built-in synthetic datasets: sbm_node, cycles_vs_paths, degree_regression,
// lp_graph. Unknown names raise ConfigError. num_samples overrides the
// default sample count (nodes for node tasks, graphs for graph tasks);
// 0 keeps the default.
Dataset synth_dataset(const std::string& name, uint64_t seed, int64_t num_samples = 0);
bool is_synth_name(const std::string& name);

}  // namespace kagnn
