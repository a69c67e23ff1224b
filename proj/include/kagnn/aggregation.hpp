#pragma once

#include <cstdint>
#include <vector>

namespace kagnn {

// Sparse weighted neighborhood sum in CSR form. For node v,
//   out[v] = self_weight[v] * h[v] + sum_e w[e] * h[targets[e]]
// over entries e in [offsets[v], offsets[v+1]). Weights are constants with
// respect to differentiation; gradients flow through h only.
struct AggregationPlan {
  int64_t num_nodes = 0;
  std::vector<int64_t> offsets;   // num_nodes + 1
  std::vector<int64_t> targets;   // column index per entry
  std::vector<double> weights;    // one per entry
  std::vector<double> self_weight;  // one per node (0 = no self term)
};

}  // namespace kagnn
