#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kagnn {

// Uniform B-spline basis of degree `order` over `grid_size` intervals on
// [range_min, range_max]. The knot vector is extended by `order` knots on
// each side, giving grid_size + order basis functions. Inputs outside the
// range are not clamped: evaluation continues the polynomial piece of the
// nearest boundary interval.
struct BsplineGrid {
  int64_t grid_size = 5;
  int64_t order = 3;
  double range_min = -1.0;
  double range_max = 1.0;
  std::vector<double> knots;  // grid_size + 2*order + 1, uniformly spaced

  static BsplineGrid make(int64_t grid_size, int64_t order, double range_min = -1.0,
                          double range_max = 1.0);

  int64_t num_basis() const { return grid_size + order; }
  double spacing() const { return (range_max - range_min) / static_cast<double>(grid_size); }
};

// Evaluates all basis functions at x. `values` (and `derivs`, when given)
// must hold num_basis() entries; entries outside the local support window are
// written as zero. At most order + 1 entries are nonzero.
class BsplineEvaluator {
 public:
  explicit BsplineEvaluator(const BsplineGrid& grid);
  void eval(double x, double* values, double* derivs = nullptr);
  const BsplineGrid& grid() const { return grid_; }

 private:
  BsplineGrid grid_;
  std::vector<double> win_, sub_, left_, right_;
};

// Convenience wrapper for tests and one-off evaluations.
std::vector<double> bspline_basis(const BsplineGrid& grid, double x);

}  // namespace kagnn
