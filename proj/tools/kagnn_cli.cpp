#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kagnn/cli_config.hpp"
#include "kagnn/error.hpp"

namespace {

using kagnn::CliConfig;
using kagnn::CliOverrides;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitGradient = 4;

struct CommandArgs {
  std::string config_path;
  CliOverrides overrides;
};

// Every config key doubles as a --flag; values are parsed by the config
// layer so file and flag values go through identical validation.
void register_flags(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_path, "flat JSON config file; flags override its values");
  for (const auto& key : kagnn::cli_config_keys()) {
    std::string flag = "--" + key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    cmd->add_option_function<std::string>(
        flag, [&args, key](const std::string& value) { args.overrides.emplace_back(key, value); },
        "sets config key '" + key + "'");
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw kagnn::IoError("cannot open output file: " + path);
  f << text;
  if (!f) throw kagnn::IoError("failed writing output file: " + path);
}

int cmd_train(const CommandArgs& args) {
  CliConfig cfg = kagnn::make_cli_config(args.config_path, args.overrides);
  kagnn::Dataset data = kagnn::open_dataset(cfg);

  kagnn::RunReport report;
  std::optional<kagnn::Model> trained;
  if (!cfg.train.axes.empty()) {
    kagnn::GridResult result = kagnn::grid_search(cfg.model, data, cfg.train);
    report = result.report;
    std::cout << "grid: evaluated " << result.evaluated << " configs, best val loss "
              << result.best_val_loss << " at lr " << result.best_lr << "\n";
    if (!cfg.checkpoint_out.empty()) {
      kagnn::TrainConfig final_cfg = cfg.train;
      final_cfg.lr = result.best_lr;
      final_cfg.axes = kagnn::GridAxes{};
      report = kagnn::train_model(result.best_spec, data, final_cfg, &trained);
    }
  } else {
    report = kagnn::train_model(cfg.model, data, cfg.train, &trained);
  }

  std::string out_path = cfg.output.empty() ? "report.json" : cfg.output;
  write_text_file(out_path, report.to_json() + "\n");
  if (!cfg.checkpoint_out.empty() && trained) kagnn::checkpoint_save(*trained, cfg.checkpoint_out);

  std::cout << "task " << report.task << " on " << report.dataset << ", seed " << report.seed
            << ", params " << report.param_count << "\n";
  std::cout << "stopped at epoch " << report.stopped_epoch << " (best " << report.best_epoch
            << "), train " << report.metric_kind << " " << report.train_metric << "\n";
  if (std::isfinite(report.test_metric_mean)) {
    std::cout << "test " << report.metric_kind << " " << report.test_metric_mean;
    if (report.repeats >= 2) std::cout << " +/- " << report.test_metric_std;
    std::cout << " over " << report.repeats << " repeat(s)\n";
  }
  std::cout << "report written to " << out_path << "\n";
  return kExitOk;
}

int cmd_bench(const CommandArgs& args) {
  CliConfig cfg = kagnn::make_cli_config(args.config_path, args.overrides);
  if (cfg.bench_layers.empty())
    throw kagnn::ConfigError("bench needs 'bench_layers', e.g. gin,kagin-rbf,kagin-bspline");
  kagnn::Dataset data = kagnn::open_dataset(cfg);

  std::vector<std::pair<std::string, kagnn::ModelSpec>> specs;
  std::string item;
  std::istringstream ss(cfg.bench_layers);
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw kagnn::ConfigError("bench_layers has an empty entry");
    kagnn::ModelSpec spec = cfg.model;
    std::string layer = item, basis;
    if (auto dash = item.find('-'); dash != std::string::npos) {
      layer = item.substr(0, dash);
      basis = item.substr(dash + 1);
    }
    spec.layer = kagnn::layer_from_name(layer);
    if (!basis.empty()) spec.basis = kagnn::basis_from_name(basis);
    specs.emplace_back(item, spec);
  }

  std::vector<kagnn::BenchRow> rows;
  for (const auto& [name, spec] : specs) {
    kagnn::BenchRow row;
    row.model = name;
    row.seconds_per_epoch = kagnn::time_epochs(spec, data, cfg.train, cfg.bench_epochs);
    kagnn::RunReport report = kagnn::train_model(spec, data, cfg.train);
    row.param_count = report.param_count;
    row.metric = report.test_metric_mean;
    rows.push_back(row);
    std::cout << row.model << ": params " << row.param_count << ", s/epoch "
              << row.seconds_per_epoch << ", test metric " << row.metric << "\n";
  }

  std::string out_path = cfg.output.empty() ? "bench.csv" : cfg.output;
  kagnn::write_bench_csv(out_path, rows, cfg.append);
  std::cout << "table written to " << out_path << (cfg.append ? " (appended)" : "") << "\n";
  return kExitOk;
}

int cmd_gradcheck(const CommandArgs& args) {
  CliConfig cfg = kagnn::make_cli_config(args.config_path, args.overrides);
  if (cfg.corrupt_adjoint) kagnn::testing::corrupt_silu_backward(true);

  auto rows = kagnn::gradcheck_suite(cfg.train.seed);
  bool all_pass = true;
  std::printf("%-22s %-6s %12s %8s\n", "config", "result", "max rel err", "params");
  for (const auto& row : rows) {
    all_pass = all_pass && row.pass;
    std::printf("%-22s %-6s %12.3e %8lld\n", row.name.c_str(), row.pass ? "pass" : "FAIL",
                row.max_err, static_cast<long long>(row.params_checked));
    if (!row.pass) std::printf("  %s\n", row.detail.c_str());
  }
  std::printf("%zu configs, seed %llu: %s\n", rows.size(),
              static_cast<unsigned long long>(cfg.train.seed), all_pass ? "all pass" : "FAILURES");
  return all_pass ? kExitOk : kExitGradient;
}

int cmd_eval(const CommandArgs& args) {
  CliConfig cfg = kagnn::make_cli_config(args.config_path, args.overrides);
  if (cfg.checkpoint.empty()) throw kagnn::ConfigError("eval needs 'checkpoint'");
  kagnn::Dataset data = kagnn::open_dataset(cfg);
  kagnn::Model model = kagnn::checkpoint_load(cfg.checkpoint);

  double metric = kagnn::evaluate_model(model, data, cfg.train);
  nlohmann::json out;
  out["checkpoint"] = cfg.checkpoint;
  out["dataset"] = cfg.dataset;
  out["task"] = kagnn::task_name(data.task);
  out["model"] = nlohmann::json::parse(model.spec().to_json());
  out["param_count"] = model.param_count();
  out["seed"] = cfg.train.seed;
  out["metric"] = metric;
  std::string text = out.dump(2) + "\n";
  if (!cfg.output.empty()) write_text_file(cfg.output, text);
  std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAN-augmented graph network training and benchmarking"};
  app.require_subcommand(1);

  std::map<std::string, CommandArgs> args;
  std::map<std::string, int (*)(const CommandArgs&)> handlers{
      {"train", cmd_train}, {"bench", cmd_bench}, {"gradcheck", cmd_gradcheck}, {"eval", cmd_eval}};
  std::map<std::string, const char*> descriptions{
      {"train", "train a model (or run a grid search) and write a run report"},
      {"bench", "time and score a list of models, writing a CSV table"},
      {"gradcheck", "compare autodiff gradients against finite differences"},
      {"eval", "evaluate a checkpointed model on a dataset"}};

  for (auto& [name, handler] : handlers) {
    CLI::App* cmd = app.add_subcommand(name, descriptions[name]);
    register_flags(cmd, args[name]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    return handlers.at(command)(args.at(command));
  } catch (const kagnn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const kagnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const kagnn::ContractError& e) {
    std::cerr << "internal contract violation: " << e.what() << "\n";
    return kExitConfig;
  } catch (const kagnn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const kagnn::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitData;
  } catch (const kagnn::MetricError& e) {
    std::cerr << "metric error: " << e.what() << "\n";
    return kExitData;
  } catch (const kagnn::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kExitData;
  }
}
