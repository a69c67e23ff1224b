#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kagnn/layers.hpp"

namespace kagnn {

enum class LayerKind { gcn, gin, gat, kagcn, kagin, kagat };
enum class HeadKind { node_classifier, graph_classifier, graph_regressor, link_decoder };

std::string layer_name(LayerKind k);
LayerKind layer_from_name(const std::string& s);
std::string head_name(HeadKind k);
HeadKind head_from_name(const std::string& s);
std::string pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& s);
std::string basis_name(KanBasis b);
KanBasis basis_from_name(const std::string& s);

bool is_kan_kind(LayerKind k);

// Declarative architecture description. `pooling` left unset resolves to the
// per-kind convention (mean for gcn kinds, sum otherwise); `head_width` 0
// resolves to `hidden`. KAN fields are ignored for the non-KAN kinds, and
// spline_order is ignored by the RBF basis (its center count is grid_size).
struct ModelSpec {
  LayerKind layer = LayerKind::gcn;
  KanBasis basis = KanBasis::bspline;
  int64_t mp_layers = 2;
  int64_t hidden = 16;
  int64_t transform_layers = 2;  // affine/KAN stages inside each gin/kagin transform
  int64_t grid_size = 5;
  int64_t spline_order = 3;
  int64_t heads = 4;
  double dropout = 0.0;
  bool batchnorm = false;
  bool kan_base_path = true;
  std::optional<Pooling> pooling;
  HeadKind head = HeadKind::node_classifier;
  int64_t head_layers = 1;
  int64_t head_width = 0;

  Pooling resolved_pooling() const;
  int64_t resolved_head_width() const { return head_width > 0 ? head_width : hidden; }

  void validate() const;

  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);
};

// Named view over a model's float state: trainable parameters plus batchnorm
// running statistics. Pointers borrow from the model.
struct NamedBuffer {
  std::string name;
  Shape shape;
  double* data = nullptr;
  int64_t numel = 0;
};

class Model {
 public:
  Model(const ModelSpec& spec, int64_t in_dim, int64_t out_dim, uint64_t seed);

  // Task output for a batch: node logits [n, out], graph logits/values
  // [num_graphs, out], or node embeddings [n, out] for the link decoder.
  // Train mode with dropout needs an rng.
  Tensor forward(const GraphBatch& batch, Mode mode, Rng* rng = nullptr);

  const ModelSpec& spec() const { return spec_; }
  int64_t in_dim() const { return in_dim_; }
  int64_t out_dim() const { return out_dim_; }
  int64_t param_count() const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<NamedBuffer> state_buffers();
  std::vector<Tensor> trainable() const;

 private:
  ModelSpec spec_;
  int64_t in_dim_, out_dim_;
  std::vector<std::unique_ptr<MpLayer>> mp_;
  std::vector<BatchNorm> bn_;
  Mlp head_mlp_;
  std::unique_ptr<KanStack> head_kan_;
};

int64_t count_params(const Model& model);

}  // namespace kagnn
