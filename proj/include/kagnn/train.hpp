#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kagnn/dataset.hpp"
#include "kagnn/model.hpp"

namespace kagnn {

// Cartesian grid axes; an empty axis keeps the template value.
struct GridAxes {
  std::vector<double> lr;
  std::vector<int64_t> hidden;
  std::vector<int64_t> transform_layers;
  std::vector<int64_t> grid_size;
  std::vector<int64_t> spline_order;
  std::vector<double> dropout;

  bool empty() const {
    return lr.empty() && hidden.empty() && transform_layers.empty() && grid_size.empty() &&
           spline_order.empty() && dropout.empty();
  }
};

struct TrainConfig {
  int64_t max_epochs = 200;
  int64_t patience = 20;
  double lr = 1e-3;
  int64_t batch_size = 32;
  uint64_t seed = 0;
  int64_t repeats = 1;

  // Split geometry. Node and graph tasks take fold 0 of a seeded k-fold plan
  // unless the dataset carries its own; link tasks hold out edge fractions.
  // train_on_all fits every sample with no holdout (early stopping then
  // watches the training loss).
  int64_t k_folds = 5;
  double val_fraction = 0.1;
  double lp_test_fraction = 0.2;
  double lp_val_fraction = 0.125;
  bool train_on_all = false;

  int64_t grid_folds = 1;  // folds averaged per grid point
  GridAxes axes;

  std::string dataset_name;  // echoed into reports
};

struct RunReport {
  ModelSpec spec;
  std::string task;
  std::string dataset;
  std::string loss_kind;
  std::string metric_kind;
  double lr = 0.0;
  int64_t max_epochs = 0, patience = 0, batch_size = 0;
  uint64_t seed = 0;
  std::vector<uint64_t> repeat_seeds;
  int64_t repeats = 1;
  int64_t param_count = 0;

  std::vector<double> train_losses;  // first repeat
  std::vector<double> val_losses;    // first repeat
  int64_t best_epoch = 0;            // 1-based, first repeat
  int64_t stopped_epoch = 0;         // epochs actually run, first repeat
  double train_metric = 0.0;         // restored model, first repeat
  double test_metric_mean = 0.0;
  double test_metric_std = 0.0;  // reported only when repeats >= 2

  double median_seconds_per_epoch = 0.0;  // timing; excluded from determinism
  double wall_seconds = 0.0;

  // Full report, and the deterministic subset (timing fields dropped).
  std::string to_json() const;
  std::string metrics_json() const;
  static RunReport from_json(const std::string& text);
};

// Trains per the config and reports. When `trained` is given it receives the
// first repeat's model, restored to its best-validation parameters.
RunReport train_model(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg,
                      std::optional<Model>* trained = nullptr);

struct GridResult {
  ModelSpec best_spec;
  double best_lr = 0.0;
  double best_val_loss = 0.0;
  int64_t evaluated = 0;
  RunReport report;  // final train of the best config with cfg.repeats
};

// Exhaustive search over the axes' Cartesian product; lowest mean validation
// loss wins, ties broken by fewer parameters then enumeration order. Honors
// KAGNN_THREADS for parallel trials.
GridResult grid_search(const ModelSpec& tmpl, const Dataset& data, const TrainConfig& cfg);

// Median wall-clock seconds per training epoch (forward+backward+step over
// prebuilt batches) over n_epochs runs after 2 warmup epochs.
double time_epochs(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg,
                   int64_t n_epochs);

// Metric of an already-built model on a dataset: accuracy, MAE, or ROC-AUC by
// task. Uses the dataset's test fold when it carries splits, the full sample
// set otherwise; link tasks regenerate the edge holdout from `seed`.
double evaluate_model(Model& model, const Dataset& data, const TrainConfig& cfg);

struct GradcheckRow {
  std::string name;
  bool pass = false;
  double max_err = 0.0;  // relative above the absolute floor
  int64_t params_checked = 0;
  std::string detail;  // failure site: parameter, analytic and numeric values
};

// Autodiff-vs-finite-difference sweep over the canonical layer matrix.
std::vector<GradcheckRow> gradcheck_suite(uint64_t seed);

struct BenchRow {
  std::string model;
  int64_t param_count = 0;
  double seconds_per_epoch = 0.0;
  double metric = 0.0;
};

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows, bool append);
std::vector<BenchRow> read_bench_csv(const std::string& path);

void checkpoint_save(Model& model, const std::string& path);
Model checkpoint_load(const std::string& path);

namespace testing {
// Fault injection for the gradcheck negative control: scales the silu
// backward adjoint so finite differences disagree.
void corrupt_silu_backward(bool enabled);
}  // namespace testing

}  // namespace kagnn
