#pragma once

#include <cstdint>
#include <vector>

namespace kagnn {

class GradTape;

namespace detail {

struct TensorImpl {
  std::vector<int64_t> shape;
  int64_t numel = 0;
  std::vector<double> data;

  // Persistent gradient, populated for leaf tensors with requires_grad.
  std::vector<double> grad;

  // Scratch adjoint used while a backward pass is running. Kept separate from
  // grad so repeated backward calls accumulate exactly.
  std::vector<double> adj;

  bool requires_grad = false;
  bool is_leaf = true;
  GradTape* producer = nullptr;  // tape that recorded this tensor, if any
};

// Ensures the scratch adjoint is allocated and zeroed on first touch.
inline std::vector<double>& adj_buf(TensorImpl& t) {
  if (t.adj.size() != static_cast<size_t>(t.numel)) t.adj.assign(static_cast<size_t>(t.numel), 0.0);
  return t.adj;
}

}  // namespace detail
}  // namespace kagnn
