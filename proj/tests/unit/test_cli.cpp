#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include <unistd.h>

#include "kagnn/cli_config.hpp"
#include "kagnn/error.hpp"

using namespace kagnn;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& text) {
    static int counter = 0;
    path = "/tmp/kagnn_cli_test_" + std::to_string(getpid()) + "_" + std::to_string(counter++) +
           ".json";
    std::ofstream f(path);
    f << text;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("empty config materializes documented defaults") {
  CliConfig cfg = make_cli_config("", {});
  CHECK(cfg.dataset.empty());
  CHECK(cfg.task.empty());
  CHECK(cfg.synth_samples == 0);
  CHECK(cfg.model.layer == LayerKind::gcn);
  CHECK(cfg.model.basis == KanBasis::bspline);
  CHECK(cfg.model.mp_layers == 2);
  CHECK(cfg.model.hidden == 16);
  CHECK(cfg.model.transform_layers == 2);
  CHECK(cfg.model.grid_size == 5);
  CHECK(cfg.model.spline_order == 3);
  CHECK(cfg.model.heads == 4);
  CHECK(cfg.model.dropout == 0.0);
  CHECK_FALSE(cfg.model.batchnorm);
  CHECK(cfg.model.kan_base_path);
  CHECK_FALSE(cfg.model.pooling.has_value());
  CHECK(cfg.train.max_epochs == 200);
  CHECK(cfg.train.patience == 20);
  CHECK(cfg.train.lr == 1e-3);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.seed == 0);
  CHECK(cfg.train.repeats == 1);
  CHECK(cfg.train.k_folds == 5);
  CHECK(cfg.train.val_fraction == 0.1);
  CHECK(cfg.train.train_on_all == false);
  CHECK(cfg.train.axes.empty());
  CHECK(cfg.bench_epochs == 20);
  CHECK_FALSE(cfg.append);
  CHECK_FALSE(cfg.corrupt_adjoint);
}

TEST_CASE("config file values apply and overrides win over the file") {
  TempFile file(R"({"dataset": "sbm_node", "hidden": 32, "lr": 0.01, "batchnorm": true})");
  SUBCASE("file alone") {
    CliConfig cfg = make_cli_config(file.path, {});
    CHECK(cfg.dataset == "sbm_node");
    CHECK(cfg.model.hidden == 32);
    CHECK(cfg.train.lr == 0.01);
    CHECK(cfg.model.batchnorm);
  }
  SUBCASE("flag overrides file") {
    CliConfig cfg = make_cli_config(file.path, {{"hidden", "64"}, {"batchnorm", "false"}});
    CHECK(cfg.model.hidden == 64);
    CHECK_FALSE(cfg.model.batchnorm);
    CHECK(cfg.train.lr == 0.01);  // untouched file value survives
  }
}

TEST_CASE("unknown keys are rejected in both layers") {
  SUBCASE("config file") {
    TempFile file(R"({"hiden": 32})");
    CHECK_THROWS_WITH_AS(make_cli_config(file.path, {}),
                         doctest::Contains("unknown key 'hiden'"), ConfigError);
  }
  SUBCASE("override flag") {
    CHECK_THROWS_WITH_AS(make_cli_config("", {{"learning_rate", "0.1"}}),
                         doctest::Contains("unknown config key 'learning_rate'"), ConfigError);
  }
}

TEST_CASE("type errors name the offending key") {
  SUBCASE("file: string where integer expected") {
    TempFile file(R"({"hidden": "lots"})");
    CHECK_THROWS_WITH_AS(make_cli_config(file.path, {}), doctest::Contains("'hidden'"),
                         ConfigError);
  }
  SUBCASE("file: float where integer expected") {
    TempFile file(R"({"mp_layers": 2.5})");
    CHECK_THROWS_WITH_AS(make_cli_config(file.path, {}), doctest::Contains("'mp_layers'"),
                         ConfigError);
  }
  SUBCASE("file: list with a non-integer element") {
    TempFile file(R"({"grid_hidden": [16, "x"]})");
    CHECK_THROWS_WITH_AS(make_cli_config(file.path, {}), doctest::Contains("'grid_hidden'"),
                         ConfigError);
  }
  SUBCASE("flag: non-numeric integer text") {
    CHECK_THROWS_WITH_AS(make_cli_config("", {{"hidden", "12x"}}), doctest::Contains("'hidden'"),
                         ConfigError);
  }
  SUBCASE("flag: non-numeric real text") {
    CHECK_THROWS_WITH_AS(make_cli_config("", {{"lr", "fast"}}), doctest::Contains("'lr'"),
                         ConfigError);
  }
  SUBCASE("flag: bad boolean text") {
    CHECK_THROWS_WITH_AS(make_cli_config("", {{"append", "yes"}}), doctest::Contains("'append'"),
                         ConfigError);
  }
}

TEST_CASE("boolean flags accept true/false and 1/0") {
  CHECK(make_cli_config("", {{"batchnorm", "true"}}).model.batchnorm);
  CHECK(make_cli_config("", {{"batchnorm", "1"}}).model.batchnorm);
  CHECK_FALSE(make_cli_config("", {{"batchnorm", "false"}}).model.batchnorm);
  CHECK_FALSE(make_cli_config("", {{"batchnorm", "0"}}).model.batchnorm);
}

TEST_CASE("grid axes parse from comma lists and JSON arrays") {
  SUBCASE("flag comma lists") {
    CliConfig cfg = make_cli_config(
        "", {{"grid_lr", "0.1,0.01,0.001"}, {"grid_hidden", "8,16"}, {"grid_dropout", "0.0"}});
    REQUIRE(cfg.train.axes.lr.size() == 3);
    CHECK(cfg.train.axes.lr[0] == 0.1);
    CHECK(cfg.train.axes.lr[2] == 0.001);
    REQUIRE(cfg.train.axes.hidden.size() == 2);
    CHECK(cfg.train.axes.hidden[1] == 16);
    REQUIRE(cfg.train.axes.dropout.size() == 1);
    CHECK_FALSE(cfg.train.axes.empty());
  }
  SUBCASE("file arrays") {
    TempFile file(R"({"grid_grid_size": [3, 5, 8], "grid_spline_order": [1, 3]})");
    CliConfig cfg = make_cli_config(file.path, {});
    REQUIRE(cfg.train.axes.grid_size.size() == 3);
    CHECK(cfg.train.axes.grid_size[2] == 8);
    REQUIRE(cfg.train.axes.spline_order.size() == 2);
  }
  SUBCASE("malformed list element in a flag") {
    CHECK_THROWS_WITH_AS(make_cli_config("", {{"grid_lr", "0.1,,0.01"}}),
                         doctest::Contains("'grid_lr'"), ConfigError);
  }
}

TEST_CASE("config file must exist, parse, and be an object") {
  CHECK_THROWS_WITH_AS(make_cli_config("/tmp/kagnn_no_such_config.json", {}),
                       doctest::Contains("cannot open"), ConfigError);
  TempFile broken("{not json");
  CHECK_THROWS_WITH_AS(make_cli_config(broken.path, {}), doctest::Contains("not valid JSON"),
                       ConfigError);
  TempFile list("[1, 2]");
  CHECK_THROWS_WITH_AS(make_cli_config(list.path, {}), doctest::Contains("object"), ConfigError);
}

TEST_CASE("semantic value checks") {
  CHECK_THROWS_WITH_AS(make_cli_config("", {{"seed", "-3"}}), doctest::Contains("seed"),
                       ConfigError);
  CHECK_THROWS_AS(make_cli_config("", {{"layer", "transformer"}}), ConfigError);
  CHECK_THROWS_AS(make_cli_config("", {{"basis", "wavelet"}}), ConfigError);
  CHECK_THROWS_AS(make_cli_config("", {{"pooling", "max"}}), ConfigError);
  CliConfig cfg = make_cli_config("", {{"pooling", "mean"}, {"layer", "kagat"}});
  REQUIRE(cfg.model.pooling.has_value());
  CHECK(*cfg.model.pooling == Pooling::mean);
  CHECK(cfg.model.layer == LayerKind::kagat);
}

TEST_CASE("cli_config_keys lists every key exactly once") {
  const auto& keys = cli_config_keys();
  CHECK(keys.size() >= 40);
  for (size_t i = 0; i < keys.size(); ++i)
    for (size_t j = i + 1; j < keys.size(); ++j) CHECK(keys[i] != keys[j]);
  // Every advertised key must be settable without error given a valid value.
  for (const auto& key : keys) {
    std::string value = "1";
    if (key == "dataset" || key == "output" || key == "checkpoint" || key == "checkpoint_out")
      value = "x";
    else if (key == "task")
      value = "node_classification";
    else if (key == "layer")
      value = "gin";
    else if (key == "basis")
      value = "rbf";
    else if (key == "pooling")
      value = "sum";
    else if (key == "bench_layers")
      value = "gin,kagin-rbf";
    CHECK_NOTHROW(make_cli_config("", {{key, value}}));
  }
}

TEST_CASE("open_dataset wiring") {
  SUBCASE("no dataset set") {
    CliConfig cfg = make_cli_config("", {});
    CHECK_THROWS_WITH_AS(open_dataset(cfg), doctest::Contains("no dataset"), ConfigError);
  }
  SUBCASE("synthetic name with matching task") {
    CliConfig cfg = make_cli_config(
        "", {{"dataset", "cycles_vs_paths"}, {"task", "graph_classification"}, {"samples", "12"}});
    Dataset data = open_dataset(cfg);
    CHECK(data.task == TaskKind::graph_classification);
    CHECK(data.graphs.size() == 12);
  }
  SUBCASE("synthetic name with contradicting task") {
    CliConfig cfg =
        make_cli_config("", {{"dataset", "cycles_vs_paths"}, {"task", "graph_regression"}});
    CHECK_THROWS_WITH_AS(open_dataset(cfg), doctest::Contains("does not match"), ConfigError);
  }
  SUBCASE("path requires a task") {
    CliConfig cfg = make_cli_config("", {{"dataset", "/tmp/somewhere"}});
    CHECK_THROWS_WITH_AS(open_dataset(cfg), doctest::Contains("requires 'task'"), ConfigError);
  }
}
