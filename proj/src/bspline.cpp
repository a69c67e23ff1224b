#include "kagnn/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kagnn/error.hpp"

namespace kagnn {

BsplineGrid BsplineGrid::make(int64_t grid_size, int64_t order, double range_min, double range_max) {
  if (grid_size < 1) throw ConfigError("bspline grid: grid_size must be >= 1");
  if (order < 1) throw ConfigError("bspline grid: order must be >= 1");
  if (!(range_max > range_min)) throw ConfigError("bspline grid: empty range");
  BsplineGrid g;
  g.grid_size = grid_size;
  g.order = order;
  g.range_min = range_min;
  g.range_max = range_max;
  double h = (range_max - range_min) / static_cast<double>(grid_size);
  int64_t count = grid_size + 2 * order + 1;
  g.knots.resize(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i)
    g.knots[static_cast<size_t>(i)] = range_min + h * static_cast<double>(i - order);
  return g;
}

BsplineEvaluator::BsplineEvaluator(const BsplineGrid& grid) : grid_(grid) {
  if (grid_.knots.empty()) grid_ = BsplineGrid::make(grid.grid_size, grid.order, grid.range_min, grid.range_max);
  size_t k = static_cast<size_t>(grid_.order);
  win_.resize(k + 1);
  sub_.resize(k + 1);
  left_.resize(k + 1);
  right_.resize(k + 1);
}

// Cox-de Boor on the local support window. The interval index is clamped to
// the core range so that points outside [range_min, range_max] evaluate the
// boundary interval's polynomials at the true x, which is what extrapolates
// each outermost piece instead of collapsing to zero.
void BsplineEvaluator::eval(double x, double* values, double* derivs) {
  const int64_t k = grid_.order;
  const int64_t G = grid_.grid_size;
  const double h = grid_.spacing();
  const double* t = grid_.knots.data();

  int64_t cell = static_cast<int64_t>(std::floor((x - grid_.range_min) / h));
  cell = std::clamp(cell, int64_t{0}, G - 1);
  const int64_t span = cell + k;  // index into the extended knot vector

  const int64_t nb = grid_.num_basis();
  std::fill(values, values + nb, 0.0);
  if (derivs) std::fill(derivs, derivs + nb, 0.0);

  // win_[r] ends as B_{span-k+r, k}(x); sub_ keeps the degree k-1 values.
  win_[0] = 1.0;
  if (derivs) sub_[0] = 1.0;  // degree-0 window, the final value when k == 1
  for (int64_t d = 1; d <= k; ++d) {
    left_[static_cast<size_t>(d)] = x - t[span + 1 - d];
    right_[static_cast<size_t>(d)] = t[span + d] - x;
    double saved = 0.0;
    for (int64_t r = 0; r < d; ++r) {
      double denom = right_[static_cast<size_t>(r + 1)] + left_[static_cast<size_t>(d - r)];
      double temp = win_[static_cast<size_t>(r)] / denom;
      win_[static_cast<size_t>(r)] = saved + right_[static_cast<size_t>(r + 1)] * temp;
      saved = left_[static_cast<size_t>(d - r)] * temp;
    }
    win_[static_cast<size_t>(d)] = saved;
    if (derivs && d == k - 1) std::copy_n(win_.data(), k, sub_.data());
  }

  for (int64_t r = 0; r <= k; ++r) values[span - k + r] = win_[static_cast<size_t>(r)];

  if (derivs) {
    // d/dx B_{i,k} = (B_{i,k-1} - B_{i+1,k-1}) / h on a uniform knot vector.
    for (int64_t r = 0; r <= k; ++r) {
      double lo = (r >= 1 && r - 1 < k) ? sub_[static_cast<size_t>(r - 1)] : 0.0;
      double hi = (r < k) ? sub_[static_cast<size_t>(r)] : 0.0;
      derivs[span - k + r] = (lo - hi) / h;
    }
  }
}

std::vector<double> bspline_basis(const BsplineGrid& grid, double x) {
  BsplineEvaluator ev(grid);
  std::vector<double> out(static_cast<size_t>(grid.num_basis()));
  ev.eval(x, out.data());
  return out;
}

}  // namespace kagnn
