#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "kagnn/dataset.hpp"
#include "kagnn/error.hpp"

#include "json.hpp"

namespace kagnn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string task_name(TaskKind t) {
  switch (t) {
    case TaskKind::node_classification: return "node_classification";
    case TaskKind::graph_classification: return "graph_classification";
    case TaskKind::graph_regression: return "graph_regression";
    case TaskKind::link_prediction: return "link_prediction";
  }
  throw ContractError("task_name: unknown task");
}

TaskKind task_from_name(const std::string& name) {
  if (name == "node_classification") return TaskKind::node_classification;
  if (name == "graph_classification") return TaskKind::graph_classification;
  if (name == "graph_regression") return TaskKind::graph_regression;
  if (name == "link_prediction") return TaskKind::link_prediction;
  throw ConfigError("unknown task '" + name + "'");
}

int64_t Dataset::num_classes() const {
  int64_t mx = -1;
  if (task == TaskKind::node_classification) {
    for (int64_t y : graphs.at(0).node_labels) mx = std::max(mx, y);
  } else if (task == TaskKind::graph_classification) {
    for (const Graph& g : graphs) mx = std::max(mx, g.graph_label);
  } else {
    throw ContractError("num_classes: not a classification dataset");
  }
  if (mx < 0) throw DataError("num_classes: no labels present");
  return mx + 1;
}

int64_t Dataset::target_dim() const {
  if (task != TaskKind::graph_regression) throw ContractError("target_dim: not a regression dataset");
  if (graphs.empty() || graphs[0].graph_target.empty()) throw DataError("target_dim: no targets present");
  return static_cast<int64_t>(graphs[0].graph_target.size());
}

std::vector<int64_t> Dataset::sample_labels() const {
  if (task == TaskKind::node_classification) return graphs.at(0).node_labels;
  if (task == TaskKind::graph_classification) {
    std::vector<int64_t> out;
    out.reserve(graphs.size());
    for (const Graph& g : graphs) out.push_back(g.graph_label);
    return out;
  }
  return {};
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

int64_t parse_int(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": cannot parse integer from '" + s + "'");
  }
}

double parse_finite_double(const std::string& s, const std::string& where) {
  double v;
  try {
    size_t used = 0;
    v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw DataError(where + ": cannot parse number from '" + s + "'");
  }
  if (!std::isfinite(v)) throw DataError(where + ": non-finite value '" + s + "'");
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

Graph parse_graph_json(const json& j, const std::string& where, TaskKind task, LoadStats& stats) {
  if (!j.is_object()) throw DataError(where + ": expected a JSON object");
  for (auto& [key, _] : j.items())
    if (key != "num_nodes" && key != "edges" && key != "x" && key != "y")
      throw DataError(where + ": unknown key '" + key + "'");
  if (!j.contains("num_nodes") || !j["num_nodes"].is_number_integer())
    throw DataError(where + ": missing integer num_nodes");

  int64_t n = j["num_nodes"].get<int64_t>();
  std::vector<std::pair<int64_t, int64_t>> edges;
  if (j.contains("edges")) {
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() != 2) throw DataError(where + ": edge entries must be pairs");
      edges.emplace_back(e[0].get<int64_t>(), e[1].get<int64_t>());
    }
  }

  Graph::BuildStats bs;
  Graph g = Graph::from_edges(n, edges, &bs);
  stats.dropped_self_loops += bs.dropped_self_loops;
  stats.dropped_duplicates += bs.dropped_duplicates;

  if (!j.contains("x") || !j["x"].is_array() || static_cast<int64_t>(j["x"].size()) != n)
    throw DataError(where + ": feature list must have one row per node");
  int64_t d = -1;
  for (const auto& row : j["x"]) {
    if (!row.is_array()) throw DataError(where + ": feature rows must be arrays");
    if (d < 0) d = static_cast<int64_t>(row.size());
    if (d != static_cast<int64_t>(row.size())) throw DataError(where + ": ragged feature rows");
    for (const auto& v : row) {
      if (!v.is_number()) throw DataError(where + ": features must be numbers");
      double x = v.get<double>();
      if (!std::isfinite(x)) throw DataError(where + ": non-finite feature");
      g.features.push_back(x);
    }
  }
  g.feat_dim = n == 0 ? std::max<int64_t>(d, 0) : d;

  if (j.contains("y")) {
    const json& y = j["y"];
    if (task == TaskKind::graph_classification) {
      if (!y.is_number_integer()) throw DataError(where + ": classification label must be an integer");
      g.graph_label = y.get<int64_t>();
      if (g.graph_label < 0) throw DataError(where + ": negative class label");
    } else if (task == TaskKind::graph_regression) {
      if (y.is_number()) {
        g.graph_target = {y.get<double>()};
      } else if (y.is_array()) {
        for (const auto& v : y) {
          if (!v.is_number()) throw DataError(where + ": regression target must be numeric");
          g.graph_target.push_back(v.get<double>());
        }
      } else {
        throw DataError(where + ": regression target must be a number or array");
      }
      for (double v : g.graph_target)
        if (!std::isfinite(v)) throw DataError(where + ": non-finite target");
    }
  }
  return g;
}

SplitPlan parse_splits_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("folds") || !j["folds"].is_array())
    throw DataError(where + ": expected {\"folds\": [...]}");
  SplitPlan plan;
  for (const auto& f : j["folds"]) {
    Fold fold;
    for (const char* part : {"train", "val", "test"}) {
      if (!f.contains(part) || !f[part].is_array())
        throw DataError(where + ": each fold needs train/val/test arrays");
      auto& dst = part == std::string("train") ? fold.train
                  : part == std::string("val") ? fold.val
                                               : fold.test;
      for (const auto& v : f[part]) dst.push_back(v.get<int64_t>());
    }
    plan.folds.push_back(std::move(fold));
  }
  if (plan.folds.empty()) throw DataError(where + ": no folds");
  return plan;
}

Dataset load_node_dataset(const std::string& dir) {
  Dataset ds;
  ds.task = TaskKind::node_classification;

  const std::string feat_path = dir + "/features.csv";
  std::vector<std::string> feat_lines = read_lines(feat_path);
  Graph g;
  g.num_nodes = static_cast<int64_t>(feat_lines.size());
  for (size_t i = 0; i < feat_lines.size(); ++i) {
    auto cells = split_csv_line(feat_lines[i]);
    if (g.feat_dim == 0) g.feat_dim = static_cast<int64_t>(cells.size());
    if (static_cast<int64_t>(cells.size()) != g.feat_dim)
      throw DataError(feat_path + ":" + std::to_string(i + 1) + ": ragged row");
    for (const auto& c : cells)
      g.features.push_back(parse_finite_double(c, feat_path + ":" + std::to_string(i + 1)));
  }

  const std::string edge_path = dir + "/edges.csv";
  std::vector<std::pair<int64_t, int64_t>> directed;
  {
    std::vector<std::string> lines = read_lines(edge_path);
    directed.reserve(lines.size());
    for (size_t i = 0; i < lines.size(); ++i) {
      auto cells = split_csv_line(lines[i]);
      const std::string where = edge_path + ":" + std::to_string(i + 1);
      if (cells.size() != 2) throw DataError(where + ": expected 'src,dst'");
      directed.emplace_back(parse_int(cells[0], where), parse_int(cells[1], where));
    }
  }

  // Rows are directed; count edges present in only one direction before
  // symmetrizing.
  {
    std::set<std::pair<int64_t, int64_t>> seen(directed.begin(), directed.end());
    int64_t one_way = 0;
    std::set<std::pair<int64_t, int64_t>> counted;
    for (auto [u, v] : seen) {
      if (u == v) continue;
      auto key = std::minmax(u, v);
      if (counted.count({key.first, key.second})) continue;
      counted.insert({key.first, key.second});
      if (!seen.count({v, u})) ++one_way;
    }
    ds.load_stats.symmetrized_edges = one_way;
  }

  Graph::BuildStats bs;
  Graph built = Graph::from_edges(g.num_nodes, directed, &bs);
  ds.load_stats.dropped_self_loops = bs.dropped_self_loops;
  g.offsets = std::move(built.offsets);
  g.targets = std::move(built.targets);

  const std::string label_path = dir + "/labels.csv";
  if (fs::exists(label_path)) {
    std::vector<std::string> lines = read_lines(label_path);
    if (static_cast<int64_t>(lines.size()) != g.num_nodes)
      throw DataError(label_path + ": expected one label per node");
    for (size_t i = 0; i < lines.size(); ++i) {
      int64_t y = parse_int(lines[i], label_path + ":" + std::to_string(i + 1));
      if (y < 0) throw DataError(label_path + ":" + std::to_string(i + 1) + ": negative label");
      g.node_labels.push_back(y);
    }
  }

  ds.graphs.push_back(std::move(g));

  const std::string split_path = dir + "/splits.json";
  if (fs::exists(split_path)) {
    std::ifstream in(split_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw DataError(split_path + ": " + e.what());
    }
    ds.splits = parse_splits_json(j, split_path);
  }
  return ds;
}

Dataset load_graph_dataset(const std::string& path, TaskKind task) {
  Dataset ds;
  ds.task = task;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ds.graphs.push_back(parse_graph_json(j, path + ":" + std::to_string(line_no), task, ds.load_stats));
  }
  if (ds.graphs.empty()) throw DataError(path + ": no graphs");
  return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path, TaskKind kind) {
  if (kind == TaskKind::node_classification || kind == TaskKind::link_prediction) {
    if (!fs::is_directory(path)) throw IoError(path + " is not a dataset directory");
    Dataset ds = load_node_dataset(path);
    ds.task = kind;
    return ds;
  }
  if (!fs::is_regular_file(path)) throw IoError(path + " is not a file");
  return load_graph_dataset(path, kind);
}

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.task == TaskKind::node_classification || ds.task == TaskKind::link_prediction) {
    fs::create_directories(path);
    const Graph& g = ds.graphs.at(0);

    std::ofstream feat(path + "/features.csv");
    if (!feat) throw IoError("cannot write " + path + "/features.csv");
    feat.precision(17);
    for (int64_t v = 0; v < g.num_nodes; ++v) {
      for (int64_t c = 0; c < g.feat_dim; ++c) {
        if (c) feat << ',';
        feat << g.features[static_cast<size_t>(v * g.feat_dim + c)];
      }
      feat << '\n';
    }

    // Both directions, so a reload sees a symmetric list.
    std::ofstream edges(path + "/edges.csv");
    if (!edges) throw IoError("cannot write " + path + "/edges.csv");
    for (int64_t v = 0; v < g.num_nodes; ++v)
      for (int64_t e = g.offsets[static_cast<size_t>(v)]; e < g.offsets[static_cast<size_t>(v) + 1]; ++e)
        edges << v << ',' << g.targets[static_cast<size_t>(e)] << '\n';

    if (!g.node_labels.empty()) {
      std::ofstream labels(path + "/labels.csv");
      if (!labels) throw IoError("cannot write " + path + "/labels.csv");
      for (int64_t y : g.node_labels) labels << y << '\n';
    }

    if (ds.splits) {
      json folds = json::array();
      for (const Fold& f : ds.splits->folds)
        folds.push_back({{"train", f.train}, {"val", f.val}, {"test", f.test}});
      std::ofstream sp(path + "/splits.json");
      if (!sp) throw IoError("cannot write " + path + "/splits.json");
      sp << json{{"folds", folds}}.dump(2) << '\n';
    }
    return;
  }

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (const Graph& g : ds.graphs) {
    json j;
    j["num_nodes"] = g.num_nodes;
    json edges = json::array();
    for (auto [u, v] : g.edge_list()) edges.push_back({u, v});
    j["edges"] = std::move(edges);
    json x = json::array();
    for (int64_t v = 0; v < g.num_nodes; ++v) {
      json row = json::array();
      for (int64_t c = 0; c < g.feat_dim; ++c)
        row.push_back(g.features[static_cast<size_t>(v * g.feat_dim + c)]);
      x.push_back(std::move(row));
    }
    j["x"] = std::move(x);
    if (ds.task == TaskKind::graph_classification) {
      j["y"] = g.graph_label;
    } else if (ds.task == TaskKind::graph_regression) {
      if (g.graph_target.size() == 1)
        j["y"] = g.graph_target[0];
      else
        j["y"] = g.graph_target;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace kagnn
