#include "kagnn/kan.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "kagnn/detail/tensor_impl.hpp"
#include "kagnn/error.hpp"

namespace kagnn {

using detail::TensorImpl;
using detail::adj_buf;

// ---------------------------------------------------------------------------
// RBF basis

RbfGrid RbfGrid::make(int64_t count, double range_min, double range_max) {
  if (count < 1) throw ConfigError("rbf grid: need at least one center");
  if (!(range_max > range_min)) throw ConfigError("rbf grid: empty range");
  RbfGrid g;
  if (count == 1) {
    g.centers = {0.5 * (range_min + range_max)};
    g.bandwidth = range_max - range_min;
  } else {
    double step = (range_max - range_min) / static_cast<double>(count - 1);
    g.centers.resize(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i)
      g.centers[static_cast<size_t>(i)] = range_min + step * static_cast<double>(i);
    g.bandwidth = step;
  }
  return g;
}

std::vector<double> rbf_basis(const RbfGrid& grid, double x) {
  std::vector<double> out(grid.centers.size());
  for (size_t i = 0; i < grid.centers.size(); ++i) {
    double u = (x - grid.centers[i]) / grid.bandwidth;
    out[i] = std::exp(-u * u);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Basis expansion ops

namespace {

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->numel = static_cast<int64_t>(data.size());
  impl->data = std::move(data);
  return impl;
}

void check_expand_input(const std::shared_ptr<TensorImpl>& x, const char* op) {
  if (!x) throw ContractError(std::string(op) + ": undefined tensor");
  if (x->shape.size() != 2)
    throw DimensionError(std::string(op) + ": expected [n, d] input, got shape " + shape_str(x->shape));
}

// The backward pass contracts the saved per-entry basis derivatives with the
// adjoint of the expanded block.
Tensor finish_expand(std::shared_ptr<TensorImpl> x, std::vector<double> values,
                     std::vector<double> derivs, int64_t d, int64_t nb, bool recording) {
  int64_t n = x->shape[0];
  auto out_impl = make_impl({n, d * nb}, std::move(values));
  Tensor result(out_impl);
  if (recording) {
    GradTape::active()->record({x}, out_impl, [x, out_impl, derivs = std::move(derivs), n, d, nb]() {
      auto& dx = adj_buf(*x);
      const double* dy = out_impl->adj.data();
      for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < d; ++c) {
          const double* dyp = dy + (r * d + c) * nb;
          const double* dvp = derivs.data() + (r * d + c) * nb;
          double acc = 0.0;
          for (int64_t b = 0; b < nb; ++b) acc += dyp[b] * dvp[b];
          dx[static_cast<size_t>(r * d + c)] += acc;
        }
    });
  }
  return result;
}

}  // namespace

Tensor bspline_expand(const Tensor& tx, const BsplineGrid& grid) {
  auto x = tx.impl();
  check_expand_input(x, "bspline_expand");
  const int64_t n = x->shape[0], d = x->shape[1];
  const int64_t nb = grid.num_basis();
  bool recording = GradTape::active() && x->requires_grad;

  BsplineEvaluator ev(grid);
  std::vector<double> values(static_cast<size_t>(n * d * nb));
  std::vector<double> derivs;
  if (recording) derivs.resize(values.size());
  for (int64_t i = 0; i < n * d; ++i)
    ev.eval(x->data[static_cast<size_t>(i)], values.data() + i * nb,
            recording ? derivs.data() + i * nb : nullptr);

  return finish_expand(x, std::move(values), std::move(derivs), d, nb, recording);
}

Tensor rbf_expand(const Tensor& tx, const RbfGrid& grid) {
  auto x = tx.impl();
  check_expand_input(x, "rbf_expand");
  const int64_t n = x->shape[0], d = x->shape[1];
  const int64_t nb = grid.num_basis();
  bool recording = GradTape::active() && x->requires_grad;

  std::vector<double> values(static_cast<size_t>(n * d * nb));
  std::vector<double> derivs;
  if (recording) derivs.resize(values.size());
  const double inv_h = 1.0 / grid.bandwidth;
  for (int64_t i = 0; i < n * d; ++i) {
    double xv = x->data[static_cast<size_t>(i)];
    double* vp = values.data() + i * nb;
    for (int64_t b = 0; b < nb; ++b) {
      double u = (xv - grid.centers[static_cast<size_t>(b)]) * inv_h;
      double e = std::exp(-u * u);
      vp[b] = e;
      if (recording) derivs[static_cast<size_t>(i * nb + b)] = -2.0 * u * inv_h * e;
    }
  }

  return finish_expand(x, std::move(values), std::move(derivs), d, nb, recording);
}

// ---------------------------------------------------------------------------
// KanLayer

int64_t kan_param_count(int64_t in_dim, int64_t out_dim, int64_t num_basis) {
  return in_dim * out_dim * num_basis + in_dim * out_dim;
}

KanLayer::KanLayer(int64_t in_dim, int64_t out_dim, KanBasis basis, int64_t grid_size,
                   int64_t spline_order, Rng& rng, bool base_path)
    : in_dim_(in_dim), out_dim_(out_dim), basis_(basis), base_path_(base_path) {
  if (in_dim < 1 || out_dim < 1) throw ConfigError("kan layer: dimensions must be positive");
  if (basis == KanBasis::bspline) {
    bgrid_ = BsplineGrid::make(grid_size, spline_order);
    num_basis_ = bgrid_.num_basis();
  } else {
    rgrid_ = RbfGrid::make(grid_size);
    num_basis_ = rgrid_.num_basis();
  }

  double coef_std = 0.1 / static_cast<double>(num_basis_);
  std::vector<double> coef(static_cast<size_t>(in_dim * num_basis_ * out_dim));
  for (double& v : coef) v = rng.normal(0.0, coef_std);
  spline_coef = Tensor::parameter({in_dim * num_basis_, out_dim}, std::move(coef));

  if (base_path_) {
    double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    std::vector<double> w(static_cast<size_t>(in_dim * out_dim));
    for (double& v : w) v = rng.uniform(-bound, bound);
    base_weight = Tensor::parameter({in_dim, out_dim}, std::move(w));
  }
}

Tensor KanLayer::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.cols() != in_dim_)
    throw DimensionError("kan layer: input shape " + shape_str(x.shape()) + " does not match in_dim " +
                         std::to_string(in_dim_));
  Tensor expanded = basis_ == KanBasis::bspline ? bspline_expand(x, bgrid_) : rbf_expand(x, rgrid_);
  Tensor out = matmul(expanded, spline_coef);
  if (base_path_) out = add(out, matmul(silu(x), base_weight));
  return out;
}

int64_t KanLayer::param_count() const {
  int64_t count = in_dim_ * out_dim_ * num_basis_;
  if (base_path_) count += in_dim_ * out_dim_;
  return count;
}

void KanLayer::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                              const std::string& prefix) const {
  out.emplace_back(prefix + ".spline_coef", spline_coef);
  if (base_path_) out.emplace_back(prefix + ".base_weight", base_weight);
}

namespace {

// Solves (A + ridge*I) x = b in place by Gaussian elimination with partial
// pivoting. Small systems only (basis count squared).
void solve_spd(std::vector<double>& a, std::vector<double>& b, int64_t n, int64_t nrhs) {
  for (int64_t col = 0; col < n; ++col) {
    int64_t piv = col;
    double best = std::fabs(a[static_cast<size_t>(col * n + col)]);
    for (int64_t r = col + 1; r < n; ++r) {
      double v = std::fabs(a[static_cast<size_t>(r * n + col)]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) throw DataError("refit_grid: singular normal equations");
    if (piv != col) {
      for (int64_t c = 0; c < n; ++c)
        std::swap(a[static_cast<size_t>(col * n + c)], a[static_cast<size_t>(piv * n + c)]);
      for (int64_t c = 0; c < nrhs; ++c)
        std::swap(b[static_cast<size_t>(col * nrhs + c)], b[static_cast<size_t>(piv * nrhs + c)]);
    }
    double inv = 1.0 / a[static_cast<size_t>(col * n + col)];
    for (int64_t r = col + 1; r < n; ++r) {
      double f = a[static_cast<size_t>(r * n + col)] * inv;
      if (f == 0.0) continue;
      for (int64_t c = col; c < n; ++c)
        a[static_cast<size_t>(r * n + c)] -= f * a[static_cast<size_t>(col * n + c)];
      for (int64_t c = 0; c < nrhs; ++c)
        b[static_cast<size_t>(r * nrhs + c)] -= f * b[static_cast<size_t>(col * nrhs + c)];
    }
  }
  for (int64_t col = n - 1; col >= 0; --col) {
    double inv = 1.0 / a[static_cast<size_t>(col * n + col)];
    for (int64_t c = 0; c < nrhs; ++c) {
      double acc = b[static_cast<size_t>(col * nrhs + c)];
      for (int64_t r = col + 1; r < n; ++r)
        acc -= a[static_cast<size_t>(col * n + r)] * b[static_cast<size_t>(r * nrhs + c)];
      b[static_cast<size_t>(col * nrhs + c)] = acc * inv;
    }
  }
}

}  // namespace

void KanLayer::refit_grid(int64_t new_grid_size, const std::vector<double>& sample_xs) {
  if (basis_ != KanBasis::bspline) throw ConfigError("refit_grid: only b-spline layers can be refit");
  if (sample_xs.empty()) throw DataError("refit_grid: no sample points");

  BsplineGrid new_grid = BsplineGrid::make(new_grid_size, bgrid_.order, bgrid_.range_min, bgrid_.range_max);
  const int64_t s = static_cast<int64_t>(sample_xs.size());
  const int64_t old_nb = num_basis_;
  const int64_t new_nb = new_grid.num_basis();
  if (s < new_nb) throw DataError("refit_grid: need at least as many samples as basis functions");

  // Old and new design matrices at the sample points.
  std::vector<double> phi_old(static_cast<size_t>(s * old_nb));
  std::vector<double> phi_new(static_cast<size_t>(s * new_nb));
  {
    BsplineEvaluator ev_old(bgrid_), ev_new(new_grid);
    for (int64_t i = 0; i < s; ++i) {
      ev_old.eval(sample_xs[static_cast<size_t>(i)], phi_old.data() + i * old_nb);
      ev_new.eval(sample_xs[static_cast<size_t>(i)], phi_new.data() + i * new_nb);
    }
  }

  // Normal equations, one shared Gram matrix for every (input, output) pair.
  std::vector<double> gram(static_cast<size_t>(new_nb * new_nb), 0.0);
  for (int64_t i = 0; i < s; ++i) {
    const double* row = phi_new.data() + i * new_nb;
    for (int64_t a = 0; a < new_nb; ++a)
      for (int64_t b = 0; b < new_nb; ++b)
        gram[static_cast<size_t>(a * new_nb + b)] += row[a] * row[b];
  }
  for (int64_t a = 0; a < new_nb; ++a) gram[static_cast<size_t>(a * new_nb + a)] += 1e-12;

  // Targets: current spline values at the samples, per (j, i) pair. The
  // right-hand side is Phi_new^T * Phi_old * C.
  const int64_t pairs = in_dim_ * out_dim_;
  std::vector<double> rhs(static_cast<size_t>(new_nb * pairs), 0.0);
  const auto coef = spline_coef.data();  // [in_dim * old_nb, out_dim]
  for (int64_t i = 0; i < s; ++i) {
    const double* ro = phi_old.data() + i * old_nb;
    const double* rn = phi_new.data() + i * new_nb;
    for (int64_t j = 0; j < in_dim_; ++j) {
      for (int64_t o = 0; o < out_dim_; ++o) {
        double target = 0.0;
        for (int64_t b = 0; b < old_nb; ++b) target += ro[b] * coef[(j * old_nb + b) * out_dim_ + o];
        double* col = rhs.data() + (j * out_dim_ + o);
        for (int64_t b = 0; b < new_nb; ++b) col[b * pairs] += rn[b] * target;
      }
    }
  }

  solve_spd(gram, rhs, new_nb, pairs);

  std::vector<double> new_coef(static_cast<size_t>(in_dim_ * new_nb * out_dim_));
  for (int64_t j = 0; j < in_dim_; ++j)
    for (int64_t b = 0; b < new_nb; ++b)
      for (int64_t o = 0; o < out_dim_; ++o)
        new_coef[static_cast<size_t>((j * new_nb + b) * out_dim_ + o)] =
            rhs[static_cast<size_t>(b * pairs + (j * out_dim_ + o))];

  bgrid_ = new_grid;
  num_basis_ = new_nb;
  spline_coef = Tensor::parameter({in_dim_ * new_nb, out_dim_}, std::move(new_coef));
}

// ---------------------------------------------------------------------------
// KanStack

KanStack::KanStack(const std::vector<int64_t>& widths, KanBasis basis, int64_t grid_size,
                   int64_t spline_order, Rng& rng, bool base_path) {
  if (widths.size() < 2) throw ConfigError("kan stack: need at least two widths");
  for (size_t i = 0; i + 1 < widths.size(); ++i)
    layers.emplace_back(widths[i], widths[i + 1], basis, grid_size, spline_order, rng, base_path);
}

Tensor KanStack::forward(const Tensor& x) const {
  Tensor h = x;
  for (const KanLayer& layer : layers) h = layer.forward(h);
  return h;
}

int64_t KanStack::param_count() const {
  int64_t count = 0;
  for (const KanLayer& layer : layers) count += layer.param_count();
  return count;
}

void KanStack::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                              const std::string& prefix) const {
  for (size_t i = 0; i < layers.size(); ++i)
    layers[i].collect_params(out, prefix + ".l" + std::to_string(i));
}

}  // namespace kagnn
