#include "kagnn/layers.hpp"

#include <cmath>

#include "kagnn/error.hpp"

namespace kagnn {

LayerContext LayerContext::build(const Graph& g, bool need_gcn, bool need_sum, bool need_attention) {
  LayerContext ctx;
  ctx.num_nodes = g.num_nodes;
  if (need_gcn) ctx.gcn_plan = gcn_norm_plan(g);
  if (need_sum) ctx.sum_plan = neighbor_sum_plan(g);
  if (need_attention) ctx.attention = build_attention_index(g);
  return ctx;
}

GcnLayer::GcnLayer(int64_t in, int64_t out, Rng& rng, bool apply_relu)
    : lin(in, out, rng), apply_relu(apply_relu) {}

Tensor GcnLayer::forward(const Tensor& h, const LayerContext& ctx) const {
  if (!ctx.gcn_plan) throw ContractError("GcnLayer: context lacks gcn plan");
  Tensor z = lin.forward(aggregate(ctx.gcn_plan, h));
  return apply_relu ? relu(z) : z;
}

void GcnLayer::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                              const std::string& prefix) const {
  lin.collect_params(out, prefix);
}

KagcnLayer::KagcnLayer(int64_t in, int64_t out, KanBasis basis, int64_t grid_size,
                       int64_t spline_order, Rng& rng, bool base_path)
    : phi(in, out, basis, grid_size, spline_order, rng, base_path) {}

Tensor KagcnLayer::forward(const Tensor& h, const LayerContext& ctx) const {
  if (!ctx.gcn_plan) throw ContractError("KagcnLayer: context lacks gcn plan");
  return phi.forward(aggregate(ctx.gcn_plan, h));
}

void KagcnLayer::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                                const std::string& prefix) const {
  phi.collect_params(out, prefix);
}

GinLayer::GinLayer(const std::vector<int64_t>& widths, Rng& rng)
    : eps(Tensor::parameter_zeros({1})), mlp(widths, rng) {}

Tensor GinLayer::forward(const Tensor& h, const LayerContext& ctx) const {
  if (!ctx.sum_plan) throw ContractError("GinLayer: context lacks sum plan");
  Tensor combined = aggregate(ctx.sum_plan, h) + mul(h, eps + 1.0);
  return mlp.forward(combined);
}

void GinLayer::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                              const std::string& prefix) const {
  out.emplace_back(prefix + ".eps", eps);
  mlp.collect_params(out, prefix + ".mlp");
}

KaginLayer::KaginLayer(const std::vector<int64_t>& widths, KanBasis basis, int64_t grid_size,
                       int64_t spline_order, Rng& rng, bool base_path)
    : eps(Tensor::parameter_zeros({1})),
      stack(widths, basis, grid_size, spline_order, rng, base_path) {}

Tensor KaginLayer::forward(const Tensor& h, const LayerContext& ctx) const {
  if (!ctx.sum_plan) throw ContractError("KaginLayer: context lacks sum plan");
  Tensor combined = aggregate(ctx.sum_plan, h) + mul(h, eps + 1.0);
  return stack.forward(combined);
}

void KaginLayer::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                                const std::string& prefix) const {
  out.emplace_back(prefix + ".eps", eps);
  stack.collect_params(out, prefix + ".kan");
}

namespace {

Tensor glorot_matrix(int64_t rows, int64_t cols, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> w(static_cast<size_t>(rows * cols));
  for (auto& v : w) v = rng.uniform(-limit, limit);
  return Tensor::parameter({rows, cols}, std::move(w));
}

// One attention head over precomputed per-node embeddings z.
Tensor attend(const Tensor& z, const Tensor& a_src, const Tensor& a_dst,
              const AttentionIndex& idx, int64_t num_nodes) {
  Tensor s_src = matmul(z, a_src);  // [n, 1]
  Tensor s_dst = matmul(z, a_dst);  // [n, 1]
  Tensor scores = leaky_relu(add(gather_rows(s_src, idx.source), gather_rows(s_dst, idx.center)), 0.2);
  Tensor alpha = segment_softmax(scores, idx.offsets);
  Tensor weighted = scale_rows(gather_rows(z, idx.source), alpha);
  return segment_sum(weighted, idx.center, num_nodes);
}

Tensor combine_heads(std::vector<Tensor>& heads, bool concat) {
  if (heads.size() == 1) return heads[0];
  if (concat) return concat_cols(heads);
  Tensor acc = heads[0];
  for (size_t k = 1; k < heads.size(); ++k) acc = add(acc, heads[k]);
  return acc * (1.0 / static_cast<double>(heads.size()));
}

}  // namespace

GatLayer::GatLayer(int64_t in, int64_t out, int64_t heads, bool concat_heads, Rng& rng)
    : concat_heads(concat_heads), out_dim_(out) {
  if (heads < 1) throw ConfigError("GatLayer: heads must be >= 1");
  if (concat_heads) {
    if (out % heads != 0)
      throw ConfigError("GatLayer: heads (" + std::to_string(heads) +
                        ") must divide output width (" + std::to_string(out) + ") in concat mode");
    head_dim_ = out / heads;
  } else {
    head_dim_ = out;
  }
  for (int64_t k = 0; k < heads; ++k) {
    weight.push_back(glorot_matrix(in, head_dim_, rng));
    attn_src.push_back(glorot_matrix(head_dim_, 1, rng));
    attn_dst.push_back(glorot_matrix(head_dim_, 1, rng));
  }
}

Tensor GatLayer::forward(const Tensor& h, const LayerContext& ctx) const {
  if (!ctx.attention) throw ContractError("GatLayer: context lacks attention index");
  std::vector<Tensor> outs;
  outs.reserve(weight.size());
  for (size_t k = 0; k < weight.size(); ++k) {
    Tensor z = matmul(h, weight[k]);
    outs.push_back(attend(z, attn_src[k], attn_dst[k], *ctx.attention, ctx.num_nodes));
  }
  return combine_heads(outs, concat_heads);
}

int64_t GatLayer::param_count() const {
  int64_t total = 0;
  for (const auto& w : weight) total += w.size();
  for (const auto& a : attn_src) total += a.size();
  for (const auto& a : attn_dst) total += a.size();
  return total;
}

void GatLayer::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                              const std::string& prefix) const {
  for (size_t k = 0; k < weight.size(); ++k) {
    std::string head = prefix + ".head" + std::to_string(k);
    out.emplace_back(head + ".weight", weight[k]);
    out.emplace_back(head + ".attn_src", attn_src[k]);
    out.emplace_back(head + ".attn_dst", attn_dst[k]);
  }
}

KagatLayer::KagatLayer(int64_t in, int64_t out, int64_t heads, bool concat_heads, KanBasis basis,
                       int64_t grid_size, int64_t spline_order, Rng& rng, bool base_path)
    : concat_heads(concat_heads), out_dim_(out) {
  if (heads < 1) throw ConfigError("KagatLayer: heads must be >= 1");
  if (concat_heads) {
    if (out % heads != 0)
      throw ConfigError("KagatLayer: heads (" + std::to_string(heads) +
                        ") must divide output width (" + std::to_string(out) + ") in concat mode");
    head_dim_ = out / heads;
  } else {
    head_dim_ = out;
  }
  for (int64_t k = 0; k < heads; ++k) {
    phi.emplace_back(in, head_dim_, basis, grid_size, spline_order, rng, base_path);
    attn_src.push_back(glorot_matrix(head_dim_, 1, rng));
    attn_dst.push_back(glorot_matrix(head_dim_, 1, rng));
  }
}

Tensor KagatLayer::forward(const Tensor& h, const LayerContext& ctx) const {
  if (!ctx.attention) throw ContractError("KagatLayer: context lacks attention index");
  std::vector<Tensor> outs;
  outs.reserve(phi.size());
  for (size_t k = 0; k < phi.size(); ++k) {
    Tensor z = phi[k].forward(h);
    outs.push_back(attend(z, attn_src[k], attn_dst[k], *ctx.attention, ctx.num_nodes));
  }
  return combine_heads(outs, concat_heads);
}

int64_t KagatLayer::param_count() const {
  int64_t total = 0;
  for (const auto& p : phi) total += p.param_count();
  for (const auto& a : attn_src) total += a.size();
  for (const auto& a : attn_dst) total += a.size();
  return total;
}

void KagatLayer::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                                const std::string& prefix) const {
  for (size_t k = 0; k < phi.size(); ++k) {
    std::string head = prefix + ".head" + std::to_string(k);
    phi[k].collect_params(out, head + ".kan");
    out.emplace_back(head + ".attn_src", attn_src[k]);
    out.emplace_back(head + ".attn_dst", attn_dst[k]);
  }
}

Tensor readout(const Tensor& h, const GraphBatch& batch, Pooling pooling) {
  if (h.rows() != static_cast<int64_t>(batch.graph_index.size()))
    throw DimensionError("readout: node count does not match batch graph index");
  if (pooling == Pooling::sum) return segment_sum(h, batch.graph_index, batch.num_graphs);
  return segment_mean(h, batch.graph_index, batch.num_graphs);
}

Tensor link_logits(const Tensor& h, const std::vector<std::pair<int64_t, int64_t>>& pairs) {
  std::vector<int64_t> us, vs;
  us.reserve(pairs.size());
  vs.reserve(pairs.size());
  for (auto [u, v] : pairs) {
    us.push_back(u);
    vs.push_back(v);
  }
  Tensor prod = mul(gather_rows(h, us), gather_rows(h, vs));
  return reduce_sum(prod, 1);
}

Tensor link_scores(const Tensor& h, const std::vector<std::pair<int64_t, int64_t>>& pairs) {
  return sigmoid(link_logits(h, pairs));
}

}  // namespace kagnn
