#include <cmath>
#include <functional>
#include <sstream>

#include "kagnn/error.hpp"
#include "kagnn/layers.hpp"
#include "kagnn/model.hpp"
#include "kagnn/train.hpp"

namespace kagnn {

namespace detail {
extern bool g_corrupt_silu_backward;
}

namespace testing {
void corrupt_silu_backward(bool enabled) { detail::g_corrupt_silu_backward = enabled; }
}  // namespace testing

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kRelTol = 1e-4;
constexpr double kAbsFloor = 1e-7;

struct Case {
  std::string name;
  std::function<Tensor()> loss;  // re-evaluated at perturbed parameters
  std::vector<std::pair<std::string, Tensor>> params;
};

GradcheckRow run_case(Case& c) {
  GradcheckRow row;
  row.name = c.name;
  row.pass = true;

  for (auto& [name, p] : c.params) p.zero_grad();
  {
    GradTape tape;
    Tensor loss = c.loss();
    if (loss.size() != 1) throw ContractError("gradcheck: loss must be scalar");
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& [name, p] : c.params) {
    if (p.has_grad())
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    else
      analytic.emplace_back(static_cast<size_t>(p.size()), 0.0);
  }

  auto eval = [&c] { return c.loss().item(); };
  for (size_t pi = 0; pi < c.params.size(); ++pi) {
    auto& [pname, p] = c.params[pi];
    auto data = p.mutable_data();
    for (int64_t i = 0; i < p.size(); ++i) {
      double orig = data[static_cast<size_t>(i)];
      data[static_cast<size_t>(i)] = orig + kFdStep;
      double fp = eval();
      data[static_cast<size_t>(i)] = orig - kFdStep;
      double fm = eval();
      data[static_cast<size_t>(i)] = orig;
      double numeric = (fp - fm) / (2.0 * kFdStep);
      double ana = analytic[pi][static_cast<size_t>(i)];
      double diff = std::abs(ana - numeric);
      ++row.params_checked;
      if (diff <= kAbsFloor) continue;
      double rel = diff / std::max(std::abs(ana), std::abs(numeric));
      row.max_err = std::max(row.max_err, rel);
      if (rel >= kRelTol && row.pass) {
        row.pass = false;
        std::ostringstream msg;
        msg.precision(12);
        msg << pname << "[" << i << "]: autodiff " << ana << " vs finite-diff " << numeric;
        row.detail = msg.str();
      }
    }
  }
  return row;
}

Tensor random_features(int64_t n, int64_t d, Rng& rng, double lo = -1.5, double hi = 1.5) {
  std::vector<double> xs(static_cast<size_t>(n * d));
  for (auto& x : xs) x = rng.uniform(lo, hi);
  return Tensor::from_vector({n, d}, std::move(xs));
}

Graph small_graph(int64_t feat_dim, Rng& rng) {
  Graph g = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}, {1, 4}});
  g.feat_dim = feat_dim;
  g.features.resize(static_cast<size_t>(5 * feat_dim));
  for (auto& x : g.features) x = rng.uniform(-1.2, 1.2);
  return g;
}

Tensor squared_sum(const Tensor& t) { return sum_all(mul(t, t)); }

}  // namespace

std::vector<GradcheckRow> gradcheck_suite(uint64_t seed) {
  std::vector<GradcheckRow> rows;
  Rng rng(mix_seed(seed, 0x6c4d));

  {  // standalone MLP
    auto mlp = std::make_shared<Mlp>(std::vector<int64_t>{3, 4, 2}, rng);
    Tensor x = random_features(5, 3, rng);
    Case c;
    c.name = "mlp";
    c.loss = [mlp, x] { return squared_sum(mlp->forward(x)); };
    mlp->collect_params(c.params, "mlp");
    rows.push_back(run_case(c));
  }

  for (KanBasis basis : {KanBasis::bspline, KanBasis::rbf}) {  // standalone KAN layer
    auto kan = std::make_shared<KanLayer>(2, 3, basis, 3, 2, rng);
    Tensor x = random_features(4, 2, rng);
    Case c;
    c.name = std::string("kan-") + basis_name(basis);
    c.loss = [kan, x] { return squared_sum(kan->forward(x)); };
    kan->collect_params(c.params, "kan");
    rows.push_back(run_case(c));
  }

  Graph g = small_graph(3, rng);
  Tensor h = Tensor::from_vector({g.num_nodes, g.feat_dim}, g.features);
  auto ctx = std::make_shared<LayerContext>(LayerContext::build(g, true, true, true));

  auto layer_case = [&](const std::string& name, std::shared_ptr<MpLayer> layer) {
    Case c;
    c.name = name;
    c.loss = [layer, h, ctx] { return squared_sum(layer->forward(h, *ctx)); };
    layer->collect_params(c.params, name);
    rows.push_back(run_case(c));
  };

  layer_case("gcn", std::make_shared<GcnLayer>(3, 4, rng));
  layer_case("gin", std::make_shared<GinLayer>(std::vector<int64_t>{3, 5, 4}, rng));
  layer_case("gat", std::make_shared<GatLayer>(3, 4, 2, /*concat_heads=*/true, rng));
  for (KanBasis basis : {KanBasis::bspline, KanBasis::rbf}) {
    std::string suffix = std::string("-") + basis_name(basis);
    layer_case("kagcn" + suffix, std::make_shared<KagcnLayer>(3, 4, basis, 3, 2, rng));
    layer_case("kagin" + suffix,
               std::make_shared<KaginLayer>(std::vector<int64_t>{3, 5, 4}, basis, 3, 2, rng));
    layer_case("kagat" + suffix, std::make_shared<KagatLayer>(3, 4, 2, true, basis, 3, 2, rng));
  }

  {  // full graph-classification model: KAGIN stack, batchnorm, pooled head
    ModelSpec spec;
    spec.layer = LayerKind::kagin;
    spec.basis = KanBasis::bspline;
    spec.mp_layers = 2;
    spec.hidden = 4;
    spec.transform_layers = 2;
    spec.grid_size = 2;
    spec.spline_order = 1;
    spec.batchnorm = true;
    spec.head = HeadKind::graph_classifier;
    auto model = std::make_shared<Model>(spec, 3, 2, mix_seed(seed, 0xabcd));

    Graph g2 = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    g2.feat_dim = 3;
    g2.features.resize(12);
    for (auto& x : g2.features) x = rng.uniform(-1.2, 1.2);
    Graph g3 = small_graph(3, rng);
    g2.graph_label = 0;
    g3.graph_label = 1;
    auto batch = std::make_shared<GraphBatch>(make_batch({&g2, &g3}));

    Case c;
    c.name = "model-kagin-bspline";
    c.loss = [model, batch] {
      Tensor logits = model->forward(*batch, Mode::train);
      return cross_entropy(logits, batch->graph_labels);
    };
    c.params = model->named_params();
    rows.push_back(run_case(c));
  }

  return rows;
}

}  // namespace kagnn
