#pragma once

#include <cstdint>
#include <vector>

#include "kagnn/bspline.hpp"
#include "kagnn/rng.hpp"
#include "kagnn/tensor.hpp"

namespace kagnn {

enum class KanBasis { bspline, rbf };

// Gaussian bumps exp(-((x - c_i)/h)^2) at centers uniformly spaced over
// [range_min, range_max]; the bandwidth equals the center spacing.
struct RbfGrid {
  std::vector<double> centers;  // ascending
  double bandwidth = 1.0;

  static RbfGrid make(int64_t count, double range_min = -2.0, double range_max = 2.0);
  int64_t num_basis() const { return static_cast<int64_t>(centers.size()); }
};

std::vector<double> rbf_basis(const RbfGrid& grid, double x);

// Basis expansion of a [n, d] tensor into [n, d * B]: row r holds the B basis
// values of x[r, 0], then of x[r, 1], and so on. Differentiable in x.
Tensor bspline_expand(const Tensor& x, const BsplineGrid& grid);
Tensor rbf_expand(const Tensor& x, const RbfGrid& grid);

// Closed-form trainable-scalar count of a KAN layer: one coefficient per
// (input, output, basis) triple plus the base-path weight matrix.
int64_t kan_param_count(int64_t in_dim, int64_t out_dim, int64_t num_basis);

// One Kolmogorov-Arnold layer: out[:, i] = sum_j phi_ij(x[:, j]) where each
// phi_ij is a learned spline (coefficients linear in the output) plus an
// optional silu base path.
class KanLayer {
 public:
  KanLayer(int64_t in_dim, int64_t out_dim, KanBasis basis, int64_t grid_size, int64_t spline_order,
           Rng& rng, bool base_path = true);

  Tensor forward(const Tensor& x) const;

  int64_t in_dim() const { return in_dim_; }
  int64_t out_dim() const { return out_dim_; }
  int64_t num_basis() const { return num_basis_; }
  int64_t param_count() const;
  KanBasis basis() const { return basis_; }
  bool has_base_path() const { return base_path_; }
  const BsplineGrid& bspline_grid() const { return bgrid_; }
  const RbfGrid& rbf_grid() const { return rgrid_; }

  // Replaces the grid with `new_grid_size` intervals and least-squares refits
  // the spline coefficients so the layer reproduces its current outputs at
  // the sample points. B-spline layers only.
  void refit_grid(int64_t new_grid_size, const std::vector<double>& sample_xs);

  void collect_params(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix) const;

  Tensor spline_coef;  // [in_dim * num_basis, out_dim]
  Tensor base_weight;  // [in_dim, out_dim], absent in pure-spline mode

 private:
  int64_t in_dim_, out_dim_, num_basis_;
  KanBasis basis_;
  bool base_path_;
  BsplineGrid bgrid_;
  RbfGrid rgrid_;
};

// Sequential KAN layers; widths[i] feeds widths[i+1].
class KanStack {
 public:
  KanStack(const std::vector<int64_t>& widths, KanBasis basis, int64_t grid_size,
           int64_t spline_order, Rng& rng, bool base_path = true);

  Tensor forward(const Tensor& x) const;
  int64_t param_count() const;
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix) const;

  std::vector<KanLayer> layers;
};

}  // namespace kagnn
