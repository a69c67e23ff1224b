#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kagnn/model.hpp"
#include "kagnn/train.hpp"

namespace kagnn {

// Everything a CLI command needs, assembled from a flat JSON config file with
// command-line overrides on top. Unknown keys are rejected in both layers.
struct CliConfig {
  std::string dataset;  // synthetic name or filesystem path
  std::string task;     // required for paths, implied for synthetic names
  int64_t synth_samples = 0;

  ModelSpec model;
  TrainConfig train;

  std::string output;          // report/table path; per-command default
  std::string checkpoint;      // eval: model to load
  std::string checkpoint_out;  // train: save restored best model here
  std::string bench_layers;    // comma list, e.g. "gin,kagin-rbf,kagin-bspline"
  int64_t bench_epochs = 20;
  bool append = false;
  bool corrupt_adjoint = false;
};

// Raw (key, value-text) overrides as collected from command-line flags.
using CliOverrides = std::vector<std::pair<std::string, std::string>>;

// All recognized config keys, in documentation order.
const std::vector<std::string>& cli_config_keys();

// Loads `config_path` (empty string: no file), applies overrides, fills
// defaults. Throws ConfigError naming the offending key on any problem.
CliConfig make_cli_config(const std::string& config_path, const CliOverrides& overrides);

// Dataset construction per the config: synthetic by name or loaded from disk
// (which requires `task`).
Dataset open_dataset(const CliConfig& cfg);

}  // namespace kagnn
