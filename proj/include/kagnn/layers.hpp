#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kagnn/graph.hpp"
#include "kagnn/kan.hpp"
#include "kagnn/nn.hpp"
#include "kagnn/tensor.hpp"

namespace kagnn {

// Batch-level structures shared by every layer of one forward pass. Only the
// pieces a model actually needs are built.
struct LayerContext {
  std::shared_ptr<const AggregationPlan> gcn_plan;
  std::shared_ptr<const AggregationPlan> sum_plan;
  std::shared_ptr<const AttentionIndex> attention;
  int64_t num_nodes = 0;

  static LayerContext build(const Graph& g, bool need_gcn, bool need_sum, bool need_attention);
};

class MpLayer {
 public:
  virtual ~MpLayer() = default;
  virtual Tensor forward(const Tensor& h, const LayerContext& ctx) const = 0;
  virtual int64_t param_count() const = 0;
  virtual void collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                              const std::string& prefix) const = 0;
  virtual int64_t out_dim() const = 0;
};

// h'_v = sigma(W . sum_{u in N(v) u {v}} h_u / sqrt((deg v + 1)(deg u + 1))),
// sigma = ReLU unless disabled.
class GcnLayer : public MpLayer {
 public:
  GcnLayer(int64_t in, int64_t out, Rng& rng, bool apply_relu = true);
  Tensor forward(const Tensor& h, const LayerContext& ctx) const override;
  int64_t param_count() const override { return lin.param_count(); }
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                      const std::string& prefix) const override;
  int64_t out_dim() const override { return lin.out_dim; }

  Linear lin;
  bool apply_relu;
};

// h'_v = Phi(normalized aggregation); the KAN layer is the nonlinearity.
class KagcnLayer : public MpLayer {
 public:
  KagcnLayer(int64_t in, int64_t out, KanBasis basis, int64_t grid_size, int64_t spline_order,
             Rng& rng, bool base_path = true);
  Tensor forward(const Tensor& h, const LayerContext& ctx) const override;
  int64_t param_count() const override { return phi.param_count(); }
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                      const std::string& prefix) const override;
  int64_t out_dim() const override { return phi.out_dim(); }

  KanLayer phi;
};

// h'_v = MLP((1 + eps) h_v + sum_{u in N(v)} h_u), eps trainable from 0.
class GinLayer : public MpLayer {
 public:
  GinLayer(const std::vector<int64_t>& widths, Rng& rng);
  Tensor forward(const Tensor& h, const LayerContext& ctx) const override;
  int64_t param_count() const override { return mlp.param_count() + 1; }
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                      const std::string& prefix) const override;
  int64_t out_dim() const override { return mlp.layers.back().out_dim; }

  Tensor eps;
  Mlp mlp;
};

class KaginLayer : public MpLayer {
 public:
  KaginLayer(const std::vector<int64_t>& widths, KanBasis basis, int64_t grid_size,
             int64_t spline_order, Rng& rng, bool base_path = true);
  Tensor forward(const Tensor& h, const LayerContext& ctx) const override;
  int64_t param_count() const override { return stack.param_count() + 1; }
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                      const std::string& prefix) const override;
  int64_t out_dim() const override { return stack.layers.back().out_dim(); }

  Tensor eps;
  KanStack stack;
};

// Per head: z = W h; e_{vu} = LeakyReLU(a_src . z_u + a_dst . z_v) over
// u in N(v) u {v}; alpha = softmax; h'_v = sum_u alpha_{vu} z_u. Heads are
// concatenated (hidden layers) or averaged (final layer).
class GatLayer : public MpLayer {
 public:
  GatLayer(int64_t in, int64_t out, int64_t heads, bool concat_heads, Rng& rng);
  Tensor forward(const Tensor& h, const LayerContext& ctx) const override;
  int64_t param_count() const override;
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                      const std::string& prefix) const override;
  int64_t out_dim() const override { return out_dim_; }

  std::vector<Tensor> weight;    // per head, [in, head_dim]
  std::vector<Tensor> attn_src;  // per head, [head_dim, 1]
  std::vector<Tensor> attn_dst;  // per head, [head_dim, 1]
  bool concat_heads;

 private:
  int64_t out_dim_, head_dim_;
};

// GAT with Phi(h) in place of W h; one Phi per head feeds both the messages
// and the attention scores.
class KagatLayer : public MpLayer {
 public:
  KagatLayer(int64_t in, int64_t out, int64_t heads, bool concat_heads, KanBasis basis,
             int64_t grid_size, int64_t spline_order, Rng& rng, bool base_path = true);
  Tensor forward(const Tensor& h, const LayerContext& ctx) const override;
  int64_t param_count() const override;
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                      const std::string& prefix) const override;
  int64_t out_dim() const override { return out_dim_; }

  std::vector<KanLayer> phi;     // per head
  std::vector<Tensor> attn_src;  // per head, [head_dim, 1]
  std::vector<Tensor> attn_dst;  // per head, [head_dim, 1]
  bool concat_heads;

 private:
  int64_t out_dim_, head_dim_;
};

enum class Pooling { sum, mean };

// Per-graph pooling of node rows. Sum maps an empty graph to a zero row;
// mean raises a data error on one.
Tensor readout(const Tensor& h, const GraphBatch& batch, Pooling pooling);

// Inner-product link decoder. Logits are h_u . h_v; scores are their logistic.
Tensor link_logits(const Tensor& h, const std::vector<std::pair<int64_t, int64_t>>& pairs);
Tensor link_scores(const Tensor& h, const std::vector<std::pair<int64_t, int64_t>>& pairs);

}  // namespace kagnn
