#include "kagnn/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "kagnn/error.hpp"
#include "kagnn/nn.hpp"

namespace kagnn {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  size_t mid = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Snapshot / restore of a model's full float state (params + running stats).
std::vector<std::vector<double>> take_snapshot(const std::vector<NamedBuffer>& bufs) {
  std::vector<std::vector<double>> out;
  out.reserve(bufs.size());
  for (const auto& b : bufs) out.emplace_back(b.data, b.data + b.numel);
  return out;
}

void restore_snapshot(const std::vector<NamedBuffer>& bufs,
                      const std::vector<std::vector<double>>& snap) {
  for (size_t i = 0; i < bufs.size(); ++i)
    std::copy(snap[i].begin(), snap[i].end(), bufs[i].data);
}

struct TaskNames {
  std::string loss, metric;
  HeadKind head;
};

TaskNames names_for(TaskKind task) {
  switch (task) {
    case TaskKind::node_classification: return {"cross_entropy", "accuracy", HeadKind::node_classifier};
    case TaskKind::graph_classification:
      return {"cross_entropy", "accuracy", HeadKind::graph_classifier};
    case TaskKind::graph_regression: return {"mae", "mae", HeadKind::graph_regressor};
    case TaskKind::link_prediction: return {"bce", "roc_auc", HeadKind::link_decoder};
  }
  throw ContractError("names_for: bad task");
}

int64_t out_dim_for(const Dataset& data, const ModelSpec& spec) {
  switch (data.task) {
    case TaskKind::node_classification:
    case TaskKind::graph_classification: return data.num_classes();
    case TaskKind::graph_regression: return data.target_dim();
    case TaskKind::link_prediction: return spec.hidden;
  }
  throw ContractError("out_dim_for: bad task");
}

// The per-task pieces the shared fit loop needs. run_train_epoch performs
// one full pass (train mode, optimizer steps applied) and returns the mean
// sample loss; evaluation hooks run in eval mode.
struct TaskHooks {
  std::function<double(Model&, Adam&, Rng&, Rng&, int64_t)> run_train_epoch;
  std::function<double(Model&)> val_loss;  // empty when there is no holdout
  std::function<double(Model&)> test_metric;
  std::function<double(Model&)> train_metric;
};

struct FitOutcome {
  std::vector<double> train_losses, val_losses;
  int64_t best_epoch = 0;
  int64_t stopped_epoch = 0;
  double test_metric = std::numeric_limits<double>::quiet_NaN();
  double train_metric = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> epoch_seconds;
};

void check_finite_loss(double loss, int64_t epoch, int64_t batch, double lr) {
  if (!std::isfinite(loss))
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ", lr " + std::to_string(lr),
                       epoch, batch, lr);
}

FitOutcome run_fit(Model& model, const TrainConfig& cfg, const TaskHooks& hooks, uint64_t run_seed) {
  Adam opt(model.trainable(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng shuffle_rng(mix_seed(run_seed, 0x5f1e));
  Rng drop_rng(mix_seed(run_seed, 0xd201));

  auto bufs = model.state_buffers();
  auto best = take_snapshot(bufs);

  FitOutcome out;
  double best_monitored = std::numeric_limits<double>::infinity();
  int64_t epochs_since_best = 0;

  for (int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto t0 = Clock::now();
    double train_loss = hooks.run_train_epoch(model, opt, shuffle_rng, drop_rng, epoch);
    out.epoch_seconds.push_back(seconds_since(t0));
    out.train_losses.push_back(train_loss);
    out.stopped_epoch = epoch;

    double monitored = train_loss;
    if (hooks.val_loss) {
      double vl = hooks.val_loss(model);
      check_finite_loss(vl, epoch, -1, cfg.lr);
      out.val_losses.push_back(vl);
      monitored = vl;
    }

    if (monitored < best_monitored) {
      best_monitored = monitored;
      out.best_epoch = epoch;
      epochs_since_best = 0;
      best = take_snapshot(bufs);
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) break;
    }
  }

  restore_snapshot(bufs, best);
  if (hooks.test_metric) out.test_metric = hooks.test_metric(model);
  if (hooks.train_metric) out.train_metric = hooks.train_metric(model);
  return out;
}

std::vector<int64_t> all_indices(int64_t n) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  return idx;
}

Fold resolve_fold(const Dataset& data, const TrainConfig& cfg) {
  if (data.task == TaskKind::link_prediction) return Fold{};
  if (cfg.train_on_all) {
    Fold fold;
    fold.train = all_indices(data.num_samples());
    return fold;
  }
  if (data.splits && !data.splits->folds.empty()) return data.splits->folds[0];
  SplitPlan plan = make_splits(data.num_samples(), cfg.k_folds, cfg.val_fraction, cfg.seed,
                               data.sample_labels());
  return plan.folds[0];
}

std::vector<int64_t> pick(const std::vector<int64_t>& labels, const std::vector<int64_t>& idx) {
  std::vector<int64_t> out;
  out.reserve(idx.size());
  for (int64_t i : idx) out.push_back(labels[static_cast<size_t>(i)]);
  return out;
}

// --- node classification -----------------------------------------------

struct NodeSetup {
  GraphBatch batch;
  std::vector<int64_t> labels;
  Fold fold;
};

TaskHooks node_hooks(const NodeSetup& setup, const TrainConfig& cfg) {
  const NodeSetup* s = &setup;
  double lr = cfg.lr;
  TaskHooks hooks;
  hooks.run_train_epoch = [s, lr](Model& m, Adam& opt, Rng&, Rng& drop, int64_t epoch) {
    opt.zero_grad();
    GradTape tape;
    Tensor logits = m.forward(s->batch, Mode::train, &drop);
    Tensor loss = cross_entropy(gather_rows(logits, s->fold.train), pick(s->labels, s->fold.train));
    double value = loss.item();
    check_finite_loss(value, epoch, 0, lr);
    tape.backward(loss);
    opt.step();
    return value;
  };
  auto eval_logits = [s](Model& m) { return m.forward(s->batch, Mode::eval); };
  if (!setup.fold.val.empty()) {
    hooks.val_loss = [s, eval_logits](Model& m) {
      Tensor logits = eval_logits(m);
      return cross_entropy(gather_rows(logits, s->fold.val), pick(s->labels, s->fold.val)).item();
    };
  }
  if (!setup.fold.test.empty()) {
    hooks.test_metric = [s, eval_logits](Model& m) {
      Tensor logits = eval_logits(m);
      return accuracy(gather_rows(logits, s->fold.test), pick(s->labels, s->fold.test));
    };
  }
  hooks.train_metric = [s, eval_logits](Model& m) {
    Tensor logits = eval_logits(m);
    return accuracy(gather_rows(logits, s->fold.train), pick(s->labels, s->fold.train));
  };
  return hooks;
}

// --- graph classification / regression ----------------------------------

struct GraphSetup {
  const Dataset* data = nullptr;
  Fold fold;
  GraphBatch val_batch, test_batch, train_batch;  // prebuilt eval batches
  bool regression = false;
};

Tensor graph_loss(Model& m, const GraphBatch& batch, bool regression, Mode mode, Rng* rng) {
  Tensor out = m.forward(batch, mode, rng);
  if (regression) {
    Tensor target =
        Tensor::from_vector({batch.num_graphs, batch.target_dim}, batch.graph_targets);
    return mae_loss(out, target);
  }
  return cross_entropy(out, batch.graph_labels);
}

double graph_metric(Model& m, const GraphBatch& batch, bool regression) {
  Tensor out = m.forward(batch, Mode::eval);
  if (regression) return mae_value(out.data(), batch.graph_targets);
  return accuracy(out, batch.graph_labels);
}

TaskHooks graph_hooks(const GraphSetup& setup, const TrainConfig& cfg) {
  const GraphSetup* s = &setup;
  double lr = cfg.lr;
  int64_t batch_size = cfg.batch_size;
  TaskHooks hooks;
  hooks.run_train_epoch = [s, lr, batch_size](Model& m, Adam& opt, Rng& shuffle, Rng& drop,
                                              int64_t epoch) {
    std::vector<int64_t> order = s->fold.train;
    shuffle.shuffle(order);
    double loss_sum = 0.0;
    int64_t seen = 0, batch_id = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(batch_size));
      std::vector<int64_t> idx(order.begin() + static_cast<ptrdiff_t>(start),
                               order.begin() + static_cast<ptrdiff_t>(stop));
      GraphBatch batch = make_batch(s->data->graphs, idx);
      opt.zero_grad();
      GradTape tape;
      Tensor loss = graph_loss(m, batch, s->regression, Mode::train, &drop);
      double value = loss.item();
      check_finite_loss(value, epoch, batch_id, lr);
      tape.backward(loss);
      opt.step();
      loss_sum += value * static_cast<double>(idx.size());
      seen += static_cast<int64_t>(idx.size());
      ++batch_id;
    }
    return loss_sum / static_cast<double>(seen);
  };
  if (!setup.fold.val.empty()) {
    hooks.val_loss = [s](Model& m) {
      return graph_loss(m, s->val_batch, s->regression, Mode::eval, nullptr).item();
    };
  }
  if (!setup.fold.test.empty())
    hooks.test_metric = [s](Model& m) { return graph_metric(m, s->test_batch, s->regression); };
  hooks.train_metric = [s](Model& m) { return graph_metric(m, s->train_batch, s->regression); };
  return hooks;
}

// --- link prediction -----------------------------------------------------

struct LpSetup {
  GraphBatch msg_batch;  // message graph: train edges only
  std::vector<std::pair<int64_t, int64_t>> train_pairs, val_pairs, test_pairs;
  std::vector<double> train_y, val_y;
  std::vector<int64_t> train_labels, val_labels, test_labels;
};

LpSetup build_lp_setup(const Dataset& data, const TrainConfig& cfg, uint64_t split_seed) {
  const Graph& g = data.graphs.at(0);
  LpSplit outer = lp_edge_split(g, cfg.lp_test_fraction, mix_seed(split_seed, 0x0eab));

  std::vector<std::pair<int64_t, int64_t>> forbidden = outer.test_pos;
  forbidden.insert(forbidden.end(), outer.test_neg.begin(), outer.test_neg.end());
  LpSplit inner =
      lp_edge_split(outer.train_graph, cfg.lp_val_fraction, mix_seed(split_seed, 0x1eaf), forbidden);

  LpSetup s;
  s.msg_batch = make_batch({&inner.train_graph});

  auto fill = [](const std::vector<std::pair<int64_t, int64_t>>& pos,
                 const std::vector<std::pair<int64_t, int64_t>>& neg,
                 std::vector<std::pair<int64_t, int64_t>>& pairs, std::vector<double>* y,
                 std::vector<int64_t>& labels) {
    pairs = pos;
    pairs.insert(pairs.end(), neg.begin(), neg.end());
    labels.assign(pos.size(), 1);
    labels.insert(labels.end(), neg.size(), 0);
    if (y) {
      y->assign(pos.size(), 1.0);
      y->insert(y->end(), neg.size(), 0.0);
    }
  };
  fill(inner.train_pos, inner.train_neg, s.train_pairs, &s.train_y, s.train_labels);
  fill(inner.test_pos, inner.test_neg, s.val_pairs, &s.val_y, s.val_labels);
  fill(outer.test_pos, outer.test_neg, s.test_pairs, nullptr, s.test_labels);
  return s;
}

TaskHooks lp_hooks(const LpSetup& setup, const TrainConfig& cfg) {
  const LpSetup* s = &setup;
  double lr = cfg.lr;
  TaskHooks hooks;
  hooks.run_train_epoch = [s, lr](Model& m, Adam& opt, Rng&, Rng& drop, int64_t epoch) {
    opt.zero_grad();
    GradTape tape;
    Tensor emb = m.forward(s->msg_batch, Mode::train, &drop);
    Tensor loss = bce_with_logits(link_logits(emb, s->train_pairs), s->train_y);
    double value = loss.item();
    check_finite_loss(value, epoch, 0, lr);
    tape.backward(loss);
    opt.step();
    return value;
  };
  auto auc_on = [s](Model& m, const std::vector<std::pair<int64_t, int64_t>>& pairs,
                    const std::vector<int64_t>& labels) {
    Tensor emb = m.forward(s->msg_batch, Mode::eval);
    Tensor scores = link_scores(emb, pairs);
    return roc_auc(scores.data(), labels);
  };
  hooks.val_loss = [s](Model& m) {
    Tensor emb = m.forward(s->msg_batch, Mode::eval);
    return bce_with_logits(link_logits(emb, s->val_pairs), s->val_y).item();
  };
  hooks.test_metric = [s, auc_on](Model& m) { return auc_on(m, s->test_pairs, s->test_labels); };
  hooks.train_metric = [s, auc_on](Model& m) { return auc_on(m, s->train_pairs, s->train_labels); };
  return hooks;
}

// --- shared single-run driver --------------------------------------------

struct SingleRun {
  FitOutcome outcome;
  int64_t param_count = 0;
};

SingleRun fit_single(Model& model, const Dataset& data, const TrainConfig& cfg, const Fold& fold,
                     uint64_t run_seed) {
  SingleRun run;
  run.param_count = model.param_count();

  switch (data.task) {
    case TaskKind::node_classification: {
      NodeSetup setup;
      setup.batch = make_batch({&data.graphs.at(0)});
      setup.labels = data.graphs.at(0).node_labels;
      if (setup.labels.empty()) throw DataError("node classification needs node labels");
      setup.fold = fold;
      run.outcome = run_fit(model, cfg, node_hooks(setup, cfg), run_seed);
      break;
    }
    case TaskKind::graph_classification:
    case TaskKind::graph_regression: {
      GraphSetup setup;
      setup.data = &data;
      setup.fold = fold;
      setup.regression = data.task == TaskKind::graph_regression;
      if (!fold.val.empty()) setup.val_batch = make_batch(data.graphs, fold.val);
      if (!fold.test.empty()) setup.test_batch = make_batch(data.graphs, fold.test);
      setup.train_batch = make_batch(data.graphs, fold.train);
      run.outcome = run_fit(model, cfg, graph_hooks(setup, cfg), run_seed);
      break;
    }
    case TaskKind::link_prediction: {
      LpSetup setup = build_lp_setup(data, cfg, cfg.seed);
      run.outcome = run_fit(model, cfg, lp_hooks(setup, cfg), run_seed);
      break;
    }
  }
  return run;
}

ModelSpec spec_for_task(const ModelSpec& tmpl, TaskKind task) {
  ModelSpec spec = tmpl;
  spec.head = names_for(task).head;
  spec.validate();
  return spec;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

RunReport train_model(const ModelSpec& tmpl, const Dataset& data, const TrainConfig& cfg,
                      std::optional<Model>* trained) {
  if (cfg.patience < 1) throw ConfigError("train: patience must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (cfg.repeats < 1) throw ConfigError("train: repeats must be >= 1");

  auto t0 = Clock::now();
  ModelSpec spec = spec_for_task(tmpl, data.task);
  Fold fold = resolve_fold(data, cfg);
  TaskNames names = names_for(data.task);

  RunReport rep;
  rep.spec = spec;
  rep.task = task_name(data.task);
  rep.dataset = cfg.dataset_name;
  rep.loss_kind = names.loss;
  rep.metric_kind = names.metric;
  rep.lr = cfg.lr;
  rep.max_epochs = cfg.max_epochs;
  rep.patience = cfg.patience;
  rep.batch_size = cfg.batch_size;
  rep.seed = cfg.seed;
  rep.repeats = cfg.repeats;

  std::vector<double> metrics;
  for (int64_t r = 0; r < cfg.repeats; ++r) {
    uint64_t run_seed = mix_seed(cfg.seed, 0xbe90 + static_cast<uint64_t>(r));
    rep.repeat_seeds.push_back(run_seed);
    Model model(spec, data.feat_dim(), out_dim_for(data, spec), mix_seed(run_seed, 0x30de));
    SingleRun run = fit_single(model, data, cfg, fold, run_seed);
    if (r == 0) {
      rep.param_count = run.param_count;
      rep.train_losses = run.outcome.train_losses;
      rep.val_losses = run.outcome.val_losses;
      rep.best_epoch = run.outcome.best_epoch;
      rep.stopped_epoch = run.outcome.stopped_epoch;
      rep.train_metric = run.outcome.train_metric;
      rep.median_seconds_per_epoch = median_of(run.outcome.epoch_seconds);
      if (trained) trained->emplace(std::move(model));
    }
    if (!std::isnan(run.outcome.test_metric)) metrics.push_back(run.outcome.test_metric);
  }
  if (!metrics.empty()) {
    rep.test_metric_mean = mean_of(metrics);
    rep.test_metric_std = std_of(metrics);
  } else {
    rep.test_metric_mean = std::numeric_limits<double>::quiet_NaN();
    rep.test_metric_std = 0.0;
  }
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

// --- grid search ----------------------------------------------------------

namespace {

struct GridPoint {
  double lr;
  ModelSpec spec;
  std::string key;  // canonical content string; seeds derive from it
};

std::vector<GridPoint> enumerate_grid(const ModelSpec& tmpl, const TrainConfig& cfg) {
  auto lr_axis = cfg.axes.lr.empty() ? std::vector<double>{cfg.lr} : cfg.axes.lr;
  auto hidden_axis = cfg.axes.hidden.empty() ? std::vector<int64_t>{tmpl.hidden} : cfg.axes.hidden;
  auto tl_axis = cfg.axes.transform_layers.empty() ? std::vector<int64_t>{tmpl.transform_layers}
                                                   : cfg.axes.transform_layers;
  auto gs_axis =
      cfg.axes.grid_size.empty() ? std::vector<int64_t>{tmpl.grid_size} : cfg.axes.grid_size;
  auto so_axis = cfg.axes.spline_order.empty() ? std::vector<int64_t>{tmpl.spline_order}
                                               : cfg.axes.spline_order;
  auto drop_axis = cfg.axes.dropout.empty() ? std::vector<double>{tmpl.dropout} : cfg.axes.dropout;

  std::vector<GridPoint> points;
  for (double lr : lr_axis)
    for (int64_t hidden : hidden_axis)
      for (int64_t tl : tl_axis)
        for (int64_t gs : gs_axis)
          for (int64_t so : so_axis)
            for (double drop : drop_axis) {
              GridPoint p;
              p.lr = lr;
              p.spec = tmpl;
              p.spec.hidden = hidden;
              p.spec.transform_layers = tl;
              p.spec.grid_size = gs;
              p.spec.spline_order = so;
              p.spec.dropout = drop;
              std::ostringstream key;
              key.precision(17);
              key << lr << '|' << p.spec.to_json();
              p.key = key.str();
              points.push_back(std::move(p));
            }
  return points;
}

int64_t thread_count_from_env() {
  const char* env = std::getenv("KAGNN_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) throw ConfigError("KAGNN_THREADS must be a positive integer");
  return static_cast<int64_t>(v);
}

}  // namespace

GridResult grid_search(const ModelSpec& tmpl, const Dataset& data, const TrainConfig& cfg) {
  if (cfg.patience < 1) throw ConfigError("grid_search: patience must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("grid_search: batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("grid_search: max_epochs must be >= 1");
  if (cfg.grid_folds < 1) throw ConfigError("grid_search: grid_folds must be >= 1");
  std::vector<GridPoint> points = enumerate_grid(tmpl, cfg);
  if (points.empty()) throw ConfigError("grid_search: empty grid");

  SplitPlan plan;
  if (data.task != TaskKind::link_prediction) {
    if (data.splits && !data.splits->folds.empty())
      plan = *data.splits;
    else
      plan = make_splits(data.num_samples(), cfg.k_folds, cfg.val_fraction, cfg.seed,
                         data.sample_labels());
  }
  int64_t folds_used = data.task == TaskKind::link_prediction
                           ? 1
                           : std::min<int64_t>(cfg.grid_folds, static_cast<int64_t>(plan.folds.size()));

  struct Scored {
    double val_loss = std::numeric_limits<double>::infinity();
    int64_t params = 0;
    std::exception_ptr error;
  };
  std::vector<Scored> scored(points.size());

  auto eval_point = [&](size_t i) {
    const GridPoint& p = points[i];
    try {
      ModelSpec spec = spec_for_task(p.spec, data.task);
      TrainConfig point_cfg = cfg;
      point_cfg.lr = p.lr;
      uint64_t point_seed = mix_seed(cfg.seed, fnv1a(p.key));

      std::vector<double> fold_losses;
      int64_t params = 0;
      for (int64_t f = 0; f < folds_used; ++f) {
        Fold fold = data.task == TaskKind::link_prediction ? Fold{} : plan.folds[static_cast<size_t>(f)];
        uint64_t fold_seed = mix_seed(point_seed, 0xf01d + static_cast<uint64_t>(f));
        Model model(spec, data.feat_dim(), out_dim_for(data, spec), mix_seed(fold_seed, 0x30de));
        SingleRun run = fit_single(model, data, point_cfg, fold, fold_seed);
        params = run.param_count;
        const auto& vl = run.outcome.val_losses;
        if (vl.empty())
          fold_losses.push_back(run.outcome.train_losses.at(
              static_cast<size_t>(run.outcome.best_epoch - 1)));
        else
          fold_losses.push_back(vl.at(static_cast<size_t>(run.outcome.best_epoch - 1)));
      }
      scored[i].val_loss = mean_of(fold_losses);
      scored[i].params = params;
    } catch (...) {
      scored[i].error = std::current_exception();
    }
  };

  int64_t threads = std::min<int64_t>(thread_count_from_env(), static_cast<int64_t>(points.size()));
  if (threads <= 1) {
    for (size_t i = 0; i < points.size(); ++i) eval_point(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int64_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1)) eval_point(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& s : scored)
    if (s.error) std::rethrow_exception(s.error);

  size_t best = 0;
  for (size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].val_loss < scored[best].val_loss ||
        (scored[i].val_loss == scored[best].val_loss && scored[i].params < scored[best].params))
      best = i;
  }

  GridResult result;
  result.best_spec = points[best].spec;
  result.best_lr = points[best].lr;
  result.best_val_loss = scored[best].val_loss;
  result.evaluated = static_cast<int64_t>(points.size());

  TrainConfig final_cfg = cfg;
  final_cfg.lr = points[best].lr;
  final_cfg.axes = GridAxes{};
  result.report = train_model(points[best].spec, data, final_cfg);
  return result;
}

// --- timing ----------------------------------------------------------------

double time_epochs(const ModelSpec& tmpl, const Dataset& data, const TrainConfig& cfg,
                   int64_t n_epochs) {
  if (n_epochs < 5) throw ConfigError("time_epochs: need at least 5 timed epochs");

  ModelSpec spec = spec_for_task(tmpl, data.task);
  Model model(spec, data.feat_dim(), out_dim_for(data, spec), mix_seed(cfg.seed, 0x30de));
  Adam opt(model.trainable(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng drop_rng(mix_seed(cfg.seed, 0xd201));

  // All batches are prebuilt: the timed loop is forward+backward+step only.
  std::vector<GraphBatch> batches;
  std::vector<std::pair<int64_t, int64_t>> lp_pairs;
  std::vector<double> lp_y;
  const bool lp = data.task == TaskKind::link_prediction;
  const bool regression = data.task == TaskKind::graph_regression;
  if (data.task == TaskKind::node_classification || lp) {
    batches.push_back(make_batch({&data.graphs.at(0)}));
    if (lp) {
      LpSetup setup = build_lp_setup(data, cfg, cfg.seed);
      batches[0] = setup.msg_batch;
      lp_pairs = setup.train_pairs;
      lp_y = setup.train_y;
    }
  } else {
    auto idx = all_indices(data.num_samples());
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t stop = std::min(idx.size(), start + static_cast<size_t>(cfg.batch_size));
      batches.push_back(make_batch(data.graphs,
                                   {idx.begin() + static_cast<ptrdiff_t>(start),
                                    idx.begin() + static_cast<ptrdiff_t>(stop)}));
    }
  }
  const std::vector<int64_t>* node_labels =
      data.task == TaskKind::node_classification ? &data.graphs.at(0).node_labels : nullptr;

  auto one_epoch = [&] {
    for (const GraphBatch& batch : batches) {
      opt.zero_grad();
      GradTape tape;
      Tensor loss;
      if (lp) {
        Tensor emb = model.forward(batch, Mode::train, &drop_rng);
        loss = bce_with_logits(link_logits(emb, lp_pairs), lp_y);
      } else if (node_labels) {
        Tensor logits = model.forward(batch, Mode::train, &drop_rng);
        loss = cross_entropy(logits, *node_labels);
      } else {
        loss = graph_loss(model, batch, regression, Mode::train, &drop_rng);
      }
      check_finite_loss(loss.item(), 0, 0, cfg.lr);
      tape.backward(loss);
      opt.step();
    }
  };

  for (int i = 0; i < 2; ++i) one_epoch();
  std::vector<double> secs;
  for (int64_t i = 0; i < n_epochs; ++i) {
    auto t0 = Clock::now();
    one_epoch();
    secs.push_back(seconds_since(t0));
  }
  return median_of(secs);
}

// --- standalone evaluation ---------------------------------------------------

double evaluate_model(Model& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.task == TaskKind::link_prediction) {
    LpSetup setup = build_lp_setup(data, cfg, cfg.seed);
    return lp_hooks(setup, cfg).test_metric(model);
  }

  std::vector<int64_t> idx;
  if (data.splits && !data.splits->folds.empty() && !data.splits->folds[0].test.empty())
    idx = data.splits->folds[0].test;
  else
    idx = all_indices(data.num_samples());

  if (data.task == TaskKind::node_classification) {
    const Graph& g = data.graphs.at(0);
    GraphBatch batch = make_batch({&g});
    Tensor logits = model.forward(batch, Mode::eval);
    return accuracy(gather_rows(logits, idx), pick(g.node_labels, idx));
  }
  GraphBatch batch = make_batch(data.graphs, idx);
  return graph_metric(model, batch, data.task == TaskKind::graph_regression);
}

// --- report JSON -------------------------------------------------------------

namespace {

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double from_finite_or_null(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

json report_body(const RunReport& r) {
  json j;
  j["model"] = json::parse(r.spec.to_json());
  j["task"] = r.task;
  j["dataset"] = r.dataset;
  j["loss"] = r.loss_kind;
  j["metric"] = r.metric_kind;
  j["lr"] = r.lr;
  j["max_epochs"] = r.max_epochs;
  j["patience"] = r.patience;
  j["batch_size"] = r.batch_size;
  j["seed"] = r.seed;
  j["repeat_seeds"] = r.repeat_seeds;
  j["repeats"] = r.repeats;
  j["param_count"] = r.param_count;
  j["train_losses"] = r.train_losses;
  j["val_losses"] = r.val_losses;
  j["best_epoch"] = r.best_epoch;
  j["stopped_epoch"] = r.stopped_epoch;
  j["train_metric"] = finite_or_null(r.train_metric);
  j["test_metric_mean"] = finite_or_null(r.test_metric_mean);
  if (r.repeats >= 2) j["test_metric_std"] = r.test_metric_std;
  return j;
}

}  // namespace

std::string RunReport::to_json() const {
  json j = report_body(*this);
  j["timing"] = {{"median_seconds_per_epoch", median_seconds_per_epoch},
                 {"wall_seconds", wall_seconds}};
  return j.dump(2);
}

std::string RunReport::metrics_json() const { return report_body(*this).dump(2); }

RunReport RunReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("RunReport: invalid JSON: ") + e.what());
  }
  RunReport r;
  try {
    r.spec = ModelSpec::from_json(j.at("model").dump());
    r.task = j.at("task").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.loss_kind = j.at("loss").get<std::string>();
    r.metric_kind = j.at("metric").get<std::string>();
    r.lr = j.at("lr").get<double>();
    r.max_epochs = j.at("max_epochs").get<int64_t>();
    r.patience = j.at("patience").get<int64_t>();
    r.batch_size = j.at("batch_size").get<int64_t>();
    r.seed = j.at("seed").get<uint64_t>();
    r.repeat_seeds = j.at("repeat_seeds").get<std::vector<uint64_t>>();
    r.repeats = j.at("repeats").get<int64_t>();
    r.param_count = j.at("param_count").get<int64_t>();
    r.train_losses = j.at("train_losses").get<std::vector<double>>();
    r.val_losses = j.at("val_losses").get<std::vector<double>>();
    r.best_epoch = j.at("best_epoch").get<int64_t>();
    r.stopped_epoch = j.at("stopped_epoch").get<int64_t>();
    r.train_metric = from_finite_or_null(j.at("train_metric"));
    r.test_metric_mean = from_finite_or_null(j.at("test_metric_mean"));
    if (j.contains("test_metric_std")) r.test_metric_std = j["test_metric_std"].get<double>();
    if (j.contains("timing")) {
      r.median_seconds_per_epoch = j["timing"].value("median_seconds_per_epoch", 0.0);
      r.wall_seconds = j["timing"].value("wall_seconds", 0.0);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("RunReport: bad field: ") + e.what());
  }
  return r;
}

// --- bench CSV ----------------------------------------------------------------

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows, bool append) {
  bool write_header = true;
  if (append) {
    std::ifstream probe(path);
    write_header = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  }
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot open bench csv for writing: " + path);
  out.precision(17);
  if (write_header) out << "model,param_count,seconds_per_epoch,metric\n";
  for (const auto& r : rows) {
    if (r.model.find(',') != std::string::npos || r.model.find('\n') != std::string::npos)
      throw IoError("bench csv: model name must not contain commas or newlines");
    out << r.model << ',' << r.param_count << ',' << r.seconds_per_epoch << ',' << r.metric << '\n';
  }
  if (!out) throw IoError("failed writing bench csv: " + path);
}

std::vector<BenchRow> read_bench_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open bench csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("bench csv is empty: " + path);
  if (line != "model,param_count,seconds_per_epoch,metric")
    throw IoError("bench csv has an unexpected header: " + line);
  std::vector<BenchRow> rows;
  int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    BenchRow r;
    std::string field;
    try {
      if (!std::getline(ss, r.model, ',')) throw std::invalid_argument("model");
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("param_count");
      r.param_count = std::stoll(field);
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("seconds_per_epoch");
      r.seconds_per_epoch = std::stod(field);
      if (!std::getline(ss, field)) throw std::invalid_argument("metric");
      r.metric = std::stod(field);
    } catch (const std::exception&) {
      throw IoError("bench csv: malformed row at line " + std::to_string(lineno));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace kagnn
