#pragma once

#include <cstdint>
#include <vector>

#include "kagnn/model.hpp"

// Closed-form trainable-scalar count for a ModelSpec, written against the
// architecture definition rather than the Model class so the two can disagree.
namespace kagnn::testing {

inline int64_t oracle_basis_count(const ModelSpec& s) {
  return s.basis == KanBasis::bspline ? s.grid_size + s.spline_order : s.grid_size;
}

inline int64_t oracle_linear(int64_t in, int64_t out) { return in * out + out; }

inline int64_t oracle_kan(const ModelSpec& s, int64_t in, int64_t out) {
  return in * out * oracle_basis_count(s) + (s.kan_base_path ? in * out : 0);
}

inline std::vector<int64_t> oracle_transform_widths(int64_t in, int64_t out, int64_t stages,
                                                    int64_t hidden) {
  std::vector<int64_t> w{in};
  for (int64_t i = 0; i < stages - 1; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

inline int64_t oracle_param_count(const ModelSpec& s, int64_t in_dim, int64_t out_dim) {
  int64_t total = 0;
  for (int64_t l = 0; l < s.mp_layers; ++l) {
    int64_t in = l == 0 ? in_dim : s.hidden;
    bool final_mp = l == s.mp_layers - 1;
    switch (s.layer) {
      case LayerKind::gcn:
        total += oracle_linear(in, s.hidden);
        break;
      case LayerKind::kagcn:
        total += oracle_kan(s, in, s.hidden);
        break;
      case LayerKind::gin:
      case LayerKind::kagin: {
        auto widths = oracle_transform_widths(in, s.hidden, s.transform_layers, s.hidden);
        for (size_t i = 0; i + 1 < widths.size(); ++i)
          total += s.layer == LayerKind::gin ? oracle_linear(widths[i], widths[i + 1])
                                             : oracle_kan(s, widths[i], widths[i + 1]);
        total += 1;  // eps
        break;
      }
      case LayerKind::gat:
      case LayerKind::kagat: {
        int64_t head_dim = final_mp ? s.hidden : s.hidden / s.heads;
        int64_t per_head = s.layer == LayerKind::gat ? in * head_dim : oracle_kan(s, in, head_dim);
        total += s.heads * (per_head + 2 * head_dim);
        break;
      }
    }
    if (s.batchnorm) total += 2 * s.hidden;
  }

  auto head = oracle_transform_widths(s.hidden, out_dim, s.head_layers, s.resolved_head_width());
  for (size_t i = 0; i + 1 < head.size(); ++i)
    total += is_kan_kind(s.layer) ? oracle_kan(s, head[i], head[i + 1])
                                  : oracle_linear(head[i], head[i + 1]);
  return total;
}

}  // namespace kagnn::testing
