#include "kagnn/cli_config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kagnn/error.hpp"

namespace kagnn {

using nlohmann::json;

namespace {

enum class KeyKind { text, integer, real, boolean, int_list, real_list };

struct KeySpec {
  const char* name;
  KeyKind kind;
};

const KeySpec kKeys[] = {
    {"dataset", KeyKind::text},
    {"task", KeyKind::text},
    {"samples", KeyKind::integer},
    {"layer", KeyKind::text},
    {"basis", KeyKind::text},
    {"mp_layers", KeyKind::integer},
    {"hidden", KeyKind::integer},
    {"transform_layers", KeyKind::integer},
    {"grid_size", KeyKind::integer},
    {"spline_order", KeyKind::integer},
    {"heads", KeyKind::integer},
    {"dropout", KeyKind::real},
    {"batchnorm", KeyKind::boolean},
    {"kan_base_path", KeyKind::boolean},
    {"pooling", KeyKind::text},
    {"head_layers", KeyKind::integer},
    {"head_width", KeyKind::integer},
    {"max_epochs", KeyKind::integer},
    {"patience", KeyKind::integer},
    {"lr", KeyKind::real},
    {"batch_size", KeyKind::integer},
    {"seed", KeyKind::integer},
    {"repeats", KeyKind::integer},
    {"k_folds", KeyKind::integer},
    {"val_fraction", KeyKind::real},
    {"lp_test_fraction", KeyKind::real},
    {"lp_val_fraction", KeyKind::real},
    {"train_on_all", KeyKind::boolean},
    {"grid_folds", KeyKind::integer},
    {"grid_lr", KeyKind::real_list},
    {"grid_hidden", KeyKind::int_list},
    {"grid_transform_layers", KeyKind::int_list},
    {"grid_grid_size", KeyKind::int_list},
    {"grid_spline_order", KeyKind::int_list},
    {"grid_dropout", KeyKind::real_list},
    {"output", KeyKind::text},
    {"checkpoint", KeyKind::text},
    {"checkpoint_out", KeyKind::text},
    {"bench_layers", KeyKind::text},
    {"bench_epochs", KeyKind::integer},
    {"append", KeyKind::boolean},
    {"corrupt_adjoint", KeyKind::boolean},
};

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : kKeys)
    if (name == k.name) return &k;
  return nullptr;
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why);
}

int64_t parse_int_text(const std::string& key, const std::string& text) {
  size_t used = 0;
  int64_t v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    bad_key(key, "expected an integer, got '" + text + "'");
  }
  if (used != text.size()) bad_key(key, "expected an integer, got '" + text + "'");
  return v;
}

double parse_real_text(const std::string& key, const std::string& text) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    bad_key(key, "expected a number, got '" + text + "'");
  }
  if (used != text.size()) bad_key(key, "expected a number, got '" + text + "'");
  return v;
}

bool parse_bool_text(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad_key(key, "expected true/false, got '" + text + "'");
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) parts.push_back(item);
  return parts;
}

// Converts a flag's value text into the same json shape a config file uses.
json value_from_text(const KeySpec& spec, const std::string& text) {
  switch (spec.kind) {
    case KeyKind::text: return text;
    case KeyKind::integer: return parse_int_text(spec.name, text);
    case KeyKind::real: return parse_real_text(spec.name, text);
    case KeyKind::boolean: return parse_bool_text(spec.name, text);
    case KeyKind::int_list: {
      json arr = json::array();
      for (const auto& part : split_commas(text)) arr.push_back(parse_int_text(spec.name, part));
      return arr;
    }
    case KeyKind::real_list: {
      json arr = json::array();
      for (const auto& part : split_commas(text)) arr.push_back(parse_real_text(spec.name, part));
      return arr;
    }
  }
  throw ContractError("value_from_text: bad kind");
}

void check_file_value(const KeySpec& spec, const json& v) {
  auto want = [&](bool ok, const char* what) {
    if (!ok) bad_key(spec.name, std::string("expected ") + what);
  };
  switch (spec.kind) {
    case KeyKind::text: want(v.is_string(), "a string"); break;
    case KeyKind::integer: want(v.is_number_integer(), "an integer"); break;
    case KeyKind::real: want(v.is_number(), "a number"); break;
    case KeyKind::boolean: want(v.is_boolean(), "a boolean"); break;
    case KeyKind::int_list: {
      want(v.is_array(), "an array of integers");
      for (const auto& e : v) want(e.is_number_integer(), "an array of integers");
      break;
    }
    case KeyKind::real_list: {
      want(v.is_array(), "an array of numbers");
      for (const auto& e : v) want(e.is_number(), "an array of numbers");
      break;
    }
  }
}

int64_t get_int(const json& j, const char* key, int64_t dflt) {
  return j.contains(key) ? j[key].get<int64_t>() : dflt;
}

double get_real(const json& j, const char* key, double dflt) {
  return j.contains(key) ? j[key].get<double>() : dflt;
}

bool get_bool(const json& j, const char* key, bool dflt) {
  return j.contains(key) ? j[key].get<bool>() : dflt;
}

std::string get_text(const json& j, const char* key, const std::string& dflt) {
  return j.contains(key) ? j[key].get<std::string>() : dflt;
}

}  // namespace

const std::vector<std::string>& cli_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> v;
    for (const auto& k : kKeys) v.push_back(k.name);
    return v;
  }();
  return keys;
}

CliConfig make_cli_config(const std::string& config_path, const CliOverrides& overrides) {
  json merged = json::object();

  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config file: " + config_path);
    json file;
    try {
      file = json::parse(f);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file root must be a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) {
      const KeySpec* spec = find_key(it.key());
      if (!spec) throw ConfigError("config file: unknown key '" + it.key() + "'");
      check_file_value(*spec, it.value());
      merged[it.key()] = it.value();
    }
  }

  for (const auto& [key, text] : overrides) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("unknown config key '" + key + "'");
    merged[key] = value_from_text(*spec, text);
  }

  CliConfig cfg;
  cfg.dataset = get_text(merged, "dataset", "");
  cfg.task = get_text(merged, "task", "");
  cfg.synth_samples = get_int(merged, "samples", 0);

  cfg.model.layer = layer_from_name(get_text(merged, "layer", "gcn"));
  cfg.model.basis = basis_from_name(get_text(merged, "basis", "bspline"));
  cfg.model.mp_layers = get_int(merged, "mp_layers", 2);
  cfg.model.hidden = get_int(merged, "hidden", 16);
  cfg.model.transform_layers = get_int(merged, "transform_layers", 2);
  cfg.model.grid_size = get_int(merged, "grid_size", 5);
  cfg.model.spline_order = get_int(merged, "spline_order", 3);
  cfg.model.heads = get_int(merged, "heads", 4);
  cfg.model.dropout = get_real(merged, "dropout", 0.0);
  cfg.model.batchnorm = get_bool(merged, "batchnorm", false);
  cfg.model.kan_base_path = get_bool(merged, "kan_base_path", true);
  std::string pooling = get_text(merged, "pooling", "");
  if (!pooling.empty()) cfg.model.pooling = pooling_from_name(pooling);
  cfg.model.head_layers = get_int(merged, "head_layers", 1);
  cfg.model.head_width = get_int(merged, "head_width", 0);

  cfg.train.max_epochs = get_int(merged, "max_epochs", 200);
  cfg.train.patience = get_int(merged, "patience", 20);
  cfg.train.lr = get_real(merged, "lr", 1e-3);
  cfg.train.batch_size = get_int(merged, "batch_size", 32);
  int64_t seed = get_int(merged, "seed", 0);
  if (seed < 0) bad_key("seed", "must be >= 0");
  cfg.train.seed = static_cast<uint64_t>(seed);
  cfg.train.repeats = get_int(merged, "repeats", 1);
  cfg.train.k_folds = get_int(merged, "k_folds", 5);
  cfg.train.val_fraction = get_real(merged, "val_fraction", 0.1);
  cfg.train.lp_test_fraction = get_real(merged, "lp_test_fraction", 0.2);
  cfg.train.lp_val_fraction = get_real(merged, "lp_val_fraction", 0.125);
  cfg.train.train_on_all = get_bool(merged, "train_on_all", false);
  cfg.train.grid_folds = get_int(merged, "grid_folds", 1);
  if (merged.contains("grid_lr")) cfg.train.axes.lr = merged["grid_lr"].get<std::vector<double>>();
  if (merged.contains("grid_hidden"))
    cfg.train.axes.hidden = merged["grid_hidden"].get<std::vector<int64_t>>();
  if (merged.contains("grid_transform_layers"))
    cfg.train.axes.transform_layers = merged["grid_transform_layers"].get<std::vector<int64_t>>();
  if (merged.contains("grid_grid_size"))
    cfg.train.axes.grid_size = merged["grid_grid_size"].get<std::vector<int64_t>>();
  if (merged.contains("grid_spline_order"))
    cfg.train.axes.spline_order = merged["grid_spline_order"].get<std::vector<int64_t>>();
  if (merged.contains("grid_dropout"))
    cfg.train.axes.dropout = merged["grid_dropout"].get<std::vector<double>>();
  cfg.train.dataset_name = cfg.dataset;

  cfg.output = get_text(merged, "output", "");
  cfg.checkpoint = get_text(merged, "checkpoint", "");
  cfg.checkpoint_out = get_text(merged, "checkpoint_out", "");
  cfg.bench_layers = get_text(merged, "bench_layers", "");
  cfg.bench_epochs = get_int(merged, "bench_epochs", 20);
  cfg.append = get_bool(merged, "append", false);
  cfg.corrupt_adjoint = get_bool(merged, "corrupt_adjoint", false);
  return cfg;
}

Dataset open_dataset(const CliConfig& cfg) {
  if (cfg.dataset.empty())
    throw ConfigError("no dataset given: set 'dataset' to a synthetic name or a path");
  if (is_synth_name(cfg.dataset)) {
    Dataset data = synth_dataset(cfg.dataset, cfg.train.seed, cfg.synth_samples);
    if (!cfg.task.empty() && task_from_name(cfg.task) != data.task)
      throw ConfigError("task '" + cfg.task + "' does not match synthetic dataset '" +
                        cfg.dataset + "' (" + task_name(data.task) + ")");
    return data;
  }
  if (cfg.task.empty())
    throw ConfigError("loading dataset from a path requires 'task' "
                      "(node_classification, graph_classification, graph_regression, link_prediction)");
  return load_dataset(cfg.dataset, task_from_name(cfg.task));
}

}  // namespace kagnn
