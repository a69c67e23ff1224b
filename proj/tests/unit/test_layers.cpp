#include <doctest.h>

#include <cmath>
#include <vector>

#include "kagnn/error.hpp"
#include "kagnn/layers.hpp"
#include "kagnn/rng.hpp"

using namespace kagnn;

namespace {

Tensor features(const std::vector<double>& v, int64_t n, int64_t d) {
  return Tensor::from_vector({n, d}, v);
}

void set_all(Tensor t, double value) {
  for (double& x : t.mutable_data()) x = value;
}

}  // namespace

TEST_CASE("gin with identity transform and eps 0 sums the closed neighborhood") {
  // Star: center 0 with leaves 1,2,3, all features 1. Sum for the center is
  // (1+eps)*1 + 3 = 4; for a leaf 1 + 1 = 2.
  Graph g = Graph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
  LayerContext ctx = LayerContext::build(g, false, true, false);

  Rng rng(51);
  GinLayer layer({1, 1, 1}, rng);
  // Identity MLP: weights 1, biases 0; relu is inert on positive values.
  for (auto& lin : layer.mlp.layers) {
    set_all(lin.weight, 1.0);
    set_all(lin.bias, 0.0);
  }
  Tensor out = layer.forward(features({1, 1, 1, 1}, 4, 1), ctx);
  CHECK(out.at(0, 0) == doctest::Approx(4.0));
  CHECK(out.at(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("gin with eps = -1 ignores the node's own features") {
  Graph g = Graph::from_edges(2, {{0, 1}});
  LayerContext ctx = LayerContext::build(g, false, true, false);
  Rng rng(52);
  GinLayer layer({1, 1, 1}, rng);
  for (auto& lin : layer.mlp.layers) {
    set_all(lin.weight, 1.0);
    set_all(lin.bias, 0.0);
  }
  layer.eps.mutable_data()[0] = -1.0;

  Tensor a = layer.forward(features({5.0, 2.0}, 2, 1), ctx);
  Tensor b = layer.forward(features({9.0, 2.0}, 2, 1), ctx);
  // Node 1 sees only its neighbor, whose feature changed.
  CHECK(a.at(1, 0) != b.at(1, 0));
  // Node 0's output depends only on node 1 now.
  CHECK(a.at(0, 0) == doctest::Approx(b.at(0, 0)));
  CHECK(a.at(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("gcn with identity weights reproduces the normalized average") {
  // Path 0-1: out_0 = h_0/2 + h_1/sqrt(2*2) with relu inert on positives.
  Graph g = Graph::from_edges(2, {{0, 1}});
  LayerContext ctx = LayerContext::build(g, true, false, false);
  Rng rng(53);
  GcnLayer layer(1, 1, rng);
  set_all(layer.lin.weight, 1.0);
  set_all(layer.lin.bias, 0.0);

  Tensor out = layer.forward(features({2.0, 4.0}, 2, 1), ctx);
  CHECK(out.at(0, 0) == doctest::Approx(2.0 / 2.0 + 4.0 / 2.0));
  CHECK(out.at(1, 0) == doctest::Approx(4.0 / 2.0 + 2.0 / 2.0));

  GcnLayer raw(1, 1, rng, /*apply_relu=*/false);
  set_all(raw.lin.weight, 1.0);
  set_all(raw.lin.bias, 0.0);
  Tensor neg = raw.forward(features({-2.0, -4.0}, 2, 1), ctx);
  CHECK(neg.at(0, 0) == doctest::Approx(-3.0));  // no rectification
}

TEST_CASE("kagcn applies its kan map to the normalized aggregate") {
  Graph g = Graph::from_edges(3, {{0, 1}, {1, 2}});
  LayerContext ctx = LayerContext::build(g, true, false, false);
  Rng rng(54);
  KagcnLayer layer(2, 3, KanBasis::rbf, 4, 3, rng);

  Tensor h = features({0.3, -0.2, 0.5, 0.1, -0.4, 0.9}, 3, 2);
  Tensor out = layer.forward(h, ctx);

  // Isolated check: an isolated node's aggregate is its own features halved
  // by nothing (degree 0 -> self weight 1), so out = phi(h).
  Graph iso = Graph::from_edges(1, {});
  LayerContext ictx = LayerContext::build(iso, true, false, false);
  Tensor hv = features({0.3, -0.2}, 1, 2);
  Tensor direct = layer.phi.forward(hv);
  Tensor through = layer.forward(hv, ictx);
  for (int64_t c = 0; c < 3; ++c) CHECK(through.at(0, c) == doctest::Approx(direct.at(0, c)));
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 3);
}

TEST_CASE("gat attention over identical neighbors is uniform") {
  // Triangle: every node attends over {self, two neighbors}; with identical
  // features all scores tie, so every weight is 1/3 and the output equals z.
  Graph g = Graph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  LayerContext ctx = LayerContext::build(g, false, false, true);
  Rng rng(55);
  GatLayer layer(2, 4, 2, /*concat_heads=*/true, rng);

  Tensor h = features({0.7, -0.3, 0.7, -0.3, 0.7, -0.3}, 3, 2);
  Tensor out = layer.forward(h, ctx);
  CHECK(out.cols() == 4);
  // All rows identical by symmetry.
  for (int64_t c = 0; c < 4; ++c) {
    CHECK(out.at(0, c) == doctest::Approx(out.at(1, c)).epsilon(1e-12));
    CHECK(out.at(1, c) == doctest::Approx(out.at(2, c)).epsilon(1e-12));
  }
  // And out = z because the convex combination of identical rows is the row.
  Tensor z = matmul(h, layer.weight[0]);
  CHECK(out.at(0, 0) == doctest::Approx(z.at(0, 0)).epsilon(1e-12));
}

TEST_CASE("gat head averaging halves concatenation width and matches its mean") {
  Graph g = Graph::from_edges(3, {{0, 1}, {1, 2}});
  LayerContext ctx = LayerContext::build(g, false, false, true);
  Rng rng(56);
  GatLayer avg(3, 6, 2, /*concat_heads=*/false, rng);
  CHECK(avg.out_dim() == 6);

  GatLayer cat(3, 6, 2, /*concat_heads=*/true, rng);
  CHECK(cat.out_dim() == 6);  // two heads x 3 each

  Tensor h = features({0.1, 0.2, 0.3, -0.1, 0.0, 0.4, 0.5, -0.2, 0.3}, 3, 3);
  CHECK(avg.forward(h, ctx).cols() == 6);
  CHECK(cat.forward(h, ctx).cols() == 6);

  CHECK_THROWS_AS(GatLayer(3, 5, 2, true, rng), ConfigError);  // 5 not divisible by 2
}

TEST_CASE("attention weights form a simplex over each neighborhood") {
  Graph g = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 3}});
  auto idx = build_attention_index(g);
  Rng rng(57);
  std::vector<double> scores;
  for (size_t i = 0; i < idx->center.size(); ++i) scores.push_back(rng.uniform(-2.0, 2.0));
  Tensor alpha = segment_softmax(Tensor::from_vector({static_cast<int64_t>(scores.size())}, scores),
                                 idx->offsets);
  for (int64_t v = 0; v < 5; ++v) {
    double sum = 0.0;
    for (int64_t e = idx->offsets[static_cast<size_t>(v)]; e < idx->offsets[static_cast<size_t>(v) + 1]; ++e) {
      CHECK(alpha.at(e) >= 0.0);
      sum += alpha.at(e);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("kagat runs one kan map per head for both scores and messages") {
  Graph g = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  LayerContext ctx = LayerContext::build(g, false, false, true);
  Rng rng(58);
  KagatLayer layer(2, 6, 2, true, KanBasis::bspline, 3, 2, rng);
  REQUIRE(layer.phi.size() == 2);
  CHECK(layer.phi[0].out_dim() == 3);

  Tensor h = features({0.1, 0.9, -0.3, 0.2, 0.8, -0.5, 0.0, 0.4}, 4, 2);
  Tensor out = layer.forward(h, ctx);
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 6);
  // Changing a head's kan coefficients must move the output (shared path).
  double before = out.at(0, 0);
  for (double& c : layer.phi[0].spline_coef.mutable_data()) c += 0.3;
  CHECK(layer.forward(h, ctx).at(0, 0) != doctest::Approx(before));
}

TEST_CASE("readout pools per graph and respects the pooling kind") {
  Graph a = Graph::from_edges(2, {{0, 1}});
  a.feat_dim = 1;
  a.features = {1.0, 3.0};
  Graph b = Graph::from_edges(3, {});
  b.feat_dim = 1;
  b.features = {2.0, 4.0, 6.0};
  GraphBatch batch = make_batch({&a, &b});

  Tensor h = Tensor::from_vector({5, 2}, {1, 10, 3, 30, 2, 20, 4, 40, 6, 60});
  Tensor sum = readout(h, batch, Pooling::sum);
  CHECK(sum.at(0, 0) == 4.0);
  CHECK(sum.at(1, 1) == 120.0);
  Tensor mean = readout(h, batch, Pooling::mean);
  CHECK(mean.at(0, 0) == 2.0);
  CHECK(mean.at(1, 1) == 40.0);
}

TEST_CASE("link decoder scores are the logistic of row inner products") {
  Tensor h = Tensor::from_vector({3, 2}, {1.0, 0.0, 0.0, 1.0, 2.0, 2.0});
  std::vector<std::pair<int64_t, int64_t>> pairs{{0, 1}, {0, 2}, {1, 2}};
  Tensor logits = link_logits(h, pairs);
  CHECK(logits.at(0) == doctest::Approx(0.0));
  CHECK(logits.at(1) == doctest::Approx(2.0));
  CHECK(logits.at(2) == doctest::Approx(2.0));

  Tensor scores = link_scores(h, pairs);
  CHECK(scores.at(0) == doctest::Approx(0.5));
  CHECK(scores.at(1) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));

  // Undirected symmetry: swapping the pair endpoints changes nothing.
  Tensor rev = link_logits(h, {{1, 0}, {2, 0}, {2, 1}});
  for (int64_t i = 0; i < 3; ++i) CHECK(rev.at(i) == logits.at(i));
}
