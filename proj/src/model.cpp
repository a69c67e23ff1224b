#include "kagnn/model.hpp"

#include <nlohmann/json.hpp>

#include "kagnn/error.hpp"

namespace kagnn {

using nlohmann::json;

std::string layer_name(LayerKind k) {
  switch (k) {
    case LayerKind::gcn: return "gcn";
    case LayerKind::gin: return "gin";
    case LayerKind::gat: return "gat";
    case LayerKind::kagcn: return "kagcn";
    case LayerKind::kagin: return "kagin";
    case LayerKind::kagat: return "kagat";
  }
  throw ContractError("layer_name: bad enum");
}

LayerKind layer_from_name(const std::string& s) {
  if (s == "gcn") return LayerKind::gcn;
  if (s == "gin") return LayerKind::gin;
  if (s == "gat") return LayerKind::gat;
  if (s == "kagcn") return LayerKind::kagcn;
  if (s == "kagin") return LayerKind::kagin;
  if (s == "kagat") return LayerKind::kagat;
  throw ConfigError("unknown layer kind '" + s + "'");
}

std::string head_name(HeadKind k) {
  switch (k) {
    case HeadKind::node_classifier: return "node_classifier";
    case HeadKind::graph_classifier: return "graph_classifier";
    case HeadKind::graph_regressor: return "graph_regressor";
    case HeadKind::link_decoder: return "link_decoder";
  }
  throw ContractError("head_name: bad enum");
}

HeadKind head_from_name(const std::string& s) {
  if (s == "node_classifier") return HeadKind::node_classifier;
  if (s == "graph_classifier") return HeadKind::graph_classifier;
  if (s == "graph_regressor") return HeadKind::graph_regressor;
  if (s == "link_decoder") return HeadKind::link_decoder;
  throw ConfigError("unknown head kind '" + s + "'");
}

std::string pooling_name(Pooling p) { return p == Pooling::sum ? "sum" : "mean"; }

Pooling pooling_from_name(const std::string& s) {
  if (s == "sum") return Pooling::sum;
  if (s == "mean") return Pooling::mean;
  throw ConfigError("unknown pooling '" + s + "'");
}

std::string basis_name(KanBasis b) { return b == KanBasis::bspline ? "bspline" : "rbf"; }

KanBasis basis_from_name(const std::string& s) {
  if (s == "bspline") return KanBasis::bspline;
  if (s == "rbf") return KanBasis::rbf;
  throw ConfigError("unknown basis '" + s + "'");
}

bool is_kan_kind(LayerKind k) {
  return k == LayerKind::kagcn || k == LayerKind::kagin || k == LayerKind::kagat;
}

Pooling ModelSpec::resolved_pooling() const {
  if (pooling) return *pooling;
  return (layer == LayerKind::gcn || layer == LayerKind::kagcn) ? Pooling::mean : Pooling::sum;
}

void ModelSpec::validate() const {
  if (mp_layers < 1) throw ConfigError("ModelSpec: mp_layers must be >= 1");
  if (hidden < 1) throw ConfigError("ModelSpec: hidden must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("ModelSpec: dropout must be in [0, 1)");
  if (head_layers < 1) throw ConfigError("ModelSpec: head_layers must be >= 1");
  if (head_width < 0) throw ConfigError("ModelSpec: head_width must be >= 0");
  if (layer == LayerKind::gin || layer == LayerKind::kagin) {
    if (transform_layers < 2)
      throw ConfigError("ModelSpec: gin/kagin transforms need transform_layers >= 2");
  }
  if (layer == LayerKind::gat || layer == LayerKind::kagat) {
    if (heads < 1) throw ConfigError("ModelSpec: heads must be >= 1");
    if (mp_layers >= 2 && hidden % heads != 0)
      throw ConfigError("ModelSpec: heads must divide hidden when heads are concatenated");
  }
  if (is_kan_kind(layer)) {
    if (grid_size < 1) throw ConfigError("ModelSpec: grid_size must be >= 1");
    if (basis == KanBasis::bspline && spline_order < 1)
      throw ConfigError("ModelSpec: spline_order must be >= 1");
  }
}

std::string ModelSpec::to_json() const {
  json j;
  j["layer"] = layer_name(layer);
  j["basis"] = basis_name(basis);
  j["mp_layers"] = mp_layers;
  j["hidden"] = hidden;
  j["transform_layers"] = transform_layers;
  j["grid_size"] = grid_size;
  j["spline_order"] = spline_order;
  j["heads"] = heads;
  j["dropout"] = dropout;
  j["batchnorm"] = batchnorm;
  j["kan_base_path"] = kan_base_path;
  j["pooling"] = pooling_name(resolved_pooling());
  j["head"] = head_name(head);
  j["head_layers"] = head_layers;
  j["head_width"] = head_width;
  return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ModelSpec: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("ModelSpec: JSON root must be an object");

  static const char* known[] = {"layer",   "basis",    "mp_layers",        "hidden",
                                "transform_layers", "grid_size", "spline_order", "heads",
                                "dropout", "batchnorm", "kan_base_path",   "pooling",
                                "head",    "head_layers", "head_width"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("ModelSpec: unknown key '" + it.key() + "'");
  }

  ModelSpec spec;
  try {
    if (j.contains("layer")) spec.layer = layer_from_name(j["layer"].get<std::string>());
    if (j.contains("basis")) spec.basis = basis_from_name(j["basis"].get<std::string>());
    if (j.contains("mp_layers")) spec.mp_layers = j["mp_layers"].get<int64_t>();
    if (j.contains("hidden")) spec.hidden = j["hidden"].get<int64_t>();
    if (j.contains("transform_layers")) spec.transform_layers = j["transform_layers"].get<int64_t>();
    if (j.contains("grid_size")) spec.grid_size = j["grid_size"].get<int64_t>();
    if (j.contains("spline_order")) spec.spline_order = j["spline_order"].get<int64_t>();
    if (j.contains("heads")) spec.heads = j["heads"].get<int64_t>();
    if (j.contains("dropout")) spec.dropout = j["dropout"].get<double>();
    if (j.contains("batchnorm")) spec.batchnorm = j["batchnorm"].get<bool>();
    if (j.contains("kan_base_path")) spec.kan_base_path = j["kan_base_path"].get<bool>();
    if (j.contains("pooling")) spec.pooling = pooling_from_name(j["pooling"].get<std::string>());
    if (j.contains("head")) spec.head = head_from_name(j["head"].get<std::string>());
    if (j.contains("head_layers")) spec.head_layers = j["head_layers"].get<int64_t>();
    if (j.contains("head_width")) spec.head_width = j["head_width"].get<int64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ModelSpec: bad field type: ") + e.what());
  }
  spec.validate();
  return spec;
}

namespace {

std::vector<int64_t> transform_widths(int64_t in, int64_t out, int64_t stages, int64_t hidden) {
  std::vector<int64_t> widths{in};
  for (int64_t i = 0; i < stages - 1; ++i) widths.push_back(hidden);
  widths.push_back(out);
  return widths;
}

std::unique_ptr<MpLayer> build_mp_layer(const ModelSpec& s, int64_t in, int64_t out, bool final_mp,
                                        Rng& rng) {
  switch (s.layer) {
    case LayerKind::gcn:
      return std::make_unique<GcnLayer>(in, out, rng);
    case LayerKind::kagcn:
      return std::make_unique<KagcnLayer>(in, out, s.basis, s.grid_size, s.spline_order, rng,
                                          s.kan_base_path);
    case LayerKind::gin:
      return std::make_unique<GinLayer>(transform_widths(in, out, s.transform_layers, s.hidden), rng);
    case LayerKind::kagin:
      return std::make_unique<KaginLayer>(transform_widths(in, out, s.transform_layers, s.hidden),
                                          s.basis, s.grid_size, s.spline_order, rng, s.kan_base_path);
    case LayerKind::gat:
      return std::make_unique<GatLayer>(in, out, s.heads, /*concat_heads=*/!final_mp, rng);
    case LayerKind::kagat:
      return std::make_unique<KagatLayer>(in, out, s.heads, /*concat_heads=*/!final_mp, s.basis,
                                          s.grid_size, s.spline_order, rng, s.kan_base_path);
  }
  throw ContractError("build_mp_layer: bad enum");
}

}  // namespace

Model::Model(const ModelSpec& spec, int64_t in_dim, int64_t out_dim, uint64_t seed)
    : spec_(spec), in_dim_(in_dim), out_dim_(out_dim) {
  spec_.validate();
  if (in_dim < 1) throw ConfigError("Model: in_dim must be >= 1");
  if (out_dim < 1) throw ConfigError("Model: out_dim must be >= 1");

  Rng rng(mix_seed(seed, 0x90de1));
  for (int64_t l = 0; l < spec_.mp_layers; ++l) {
    int64_t in = l == 0 ? in_dim : spec_.hidden;
    bool final_mp = l == spec_.mp_layers - 1;
    mp_.push_back(build_mp_layer(spec_, in, spec_.hidden, final_mp, rng));
    if (spec_.batchnorm) bn_.emplace_back(spec_.hidden);
  }

  std::vector<int64_t> head_widths =
      transform_widths(spec_.hidden, out_dim, spec_.head_layers, spec_.resolved_head_width());
  if (is_kan_kind(spec_.layer)) {
    head_kan_ = std::make_unique<KanStack>(head_widths, spec_.basis, spec_.grid_size,
                                           spec_.spline_order, rng, spec_.kan_base_path);
  } else {
    head_mlp_ = Mlp(head_widths, rng);
  }
}

Tensor Model::forward(const GraphBatch& batch, Mode mode, Rng* rng) {
  const bool gcn_like = spec_.layer == LayerKind::gcn || spec_.layer == LayerKind::kagcn;
  const bool gin_like = spec_.layer == LayerKind::gin || spec_.layer == LayerKind::kagin;
  const bool gat_like = spec_.layer == LayerKind::gat || spec_.layer == LayerKind::kagat;
  LayerContext ctx = LayerContext::build(batch.merged, gcn_like, gin_like, gat_like);

  const Graph& g = batch.merged;
  if (g.feat_dim != in_dim_)
    throw DimensionError("Model: batch feature width " + std::to_string(g.feat_dim) +
                         " does not match model input width " + std::to_string(in_dim_));
  Tensor h = Tensor::from_vector({g.num_nodes, g.feat_dim}, g.features);

  for (size_t l = 0; l < mp_.size(); ++l) {
    h = mp_[l]->forward(h, ctx);
    if (spec_.batchnorm) h = bn_[l].forward(h, mode);
    if (spec_.dropout > 0.0 && mode == Mode::train) {
      if (!rng) throw ContractError("Model: train-mode dropout needs an rng");
      h = dropout(h, spec_.dropout, mode, *rng);
    }
  }

  if (spec_.head == HeadKind::graph_classifier || spec_.head == HeadKind::graph_regressor)
    h = readout(h, batch, spec_.resolved_pooling());

  return head_kan_ ? head_kan_->forward(h) : head_mlp_.forward(h);
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t l = 0; l < mp_.size(); ++l) mp_[l]->collect_params(out, "mp" + std::to_string(l));
  for (size_t l = 0; l < bn_.size(); ++l)
    bn_[l].collect_params(out, "bn" + std::to_string(l));
  if (head_kan_)
    head_kan_->collect_params(out, "head");
  else
    head_mlp_.collect_params(out, "head");
  return out;
}

std::vector<Tensor> Model::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

int64_t Model::param_count() const {
  int64_t total = 0;
  for (const auto& layer : mp_) total += layer->param_count();
  for (const auto& bn : bn_) total += bn.param_count();
  total += head_kan_ ? head_kan_->param_count() : head_mlp_.param_count();
  return total;
}

std::vector<NamedBuffer> Model::state_buffers() {
  std::vector<NamedBuffer> out;
  for (auto& [name, t] : named_params()) {
    NamedBuffer b;
    b.name = name;
    b.shape = t.shape();
    b.data = t.mutable_data().data();
    b.numel = t.size();
    out.push_back(std::move(b));
  }
  for (size_t l = 0; l < bn_.size(); ++l) {
    auto& bn = bn_[l];
    std::string prefix = "bn" + std::to_string(l);
    out.push_back({prefix + ".running_mean",
                   {static_cast<int64_t>(bn.running_mean.size())},
                   bn.running_mean.data(),
                   static_cast<int64_t>(bn.running_mean.size())});
    out.push_back({prefix + ".running_var",
                   {static_cast<int64_t>(bn.running_var.size())},
                   bn.running_var.data(),
                   static_cast<int64_t>(bn.running_var.size())});
  }
  return out;
}

int64_t count_params(const Model& model) { return model.param_count(); }

}  // namespace kagnn
