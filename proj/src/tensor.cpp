#include "kagnn/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "kagnn/detail/tensor_impl.hpp"
#include "kagnn/error.hpp"

namespace kagnn {

using detail::TensorImpl;
using detail::adj_buf;

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->numel = shape_numel(shape);
  if (static_cast<int64_t>(data.size()) != impl->numel)
    throw DimensionError("value count " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape));
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

thread_local GradTape* g_active_tape = nullptr;

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape) {
  int64_t n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  int64_t n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(static_cast<size_t>(n), value)));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values) {
  return Tensor(make_impl(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return Tensor(make_impl({}, {value})); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(make_impl(std::move(shape), std::move(values)));
  t.impl_->requires_grad = true;
  return t;
}

Tensor Tensor::parameter_zeros(Shape shape) {
  Tensor t = zeros(std::move(shape));
  t.impl_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::ndim() const { return static_cast<int64_t>(impl_->shape.size()); }
int64_t Tensor::size() const { return impl_->numel; }

int64_t Tensor::rows() const {
  if (ndim() != 2) throw DimensionError("rows(): tensor is not 2-d, shape " + shape_str(impl_->shape));
  return impl_->shape[0];
}

int64_t Tensor::cols() const {
  if (ndim() != 2) throw DimensionError("cols(): tensor is not 2-d, shape " + shape_str(impl_->shape));
  return impl_->shape[1];
}

double Tensor::item() const {
  if (impl_->numel != 1)
    throw ContractError("item(): tensor has " + std::to_string(impl_->numel) + " elements");
  return impl_->data[0];
}

double Tensor::at(int64_t i) const {
  if (i < 0 || i >= impl_->numel) throw DimensionError("at(): index out of range");
  return impl_->data[static_cast<size_t>(i)];
}

double Tensor::at(int64_t i, int64_t j) const {
  int64_t c = cols();
  if (i < 0 || i >= rows() || j < 0 || j >= c) throw DimensionError("at(): index out of range");
  return impl_->data[static_cast<size_t>(i * c + j)];
}

std::span<const double> Tensor::data() const { return {impl_->data.data(), impl_->data.size()}; }
std::span<double> Tensor::mutable_data() { return {impl_->data.data(), impl_->data.size()}; }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
bool Tensor::is_leaf() const { return !impl_ || impl_->is_leaf; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("grad(): no gradient has been accumulated");
  return {impl_->grad.data(), impl_->grad.size()};
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone_detached() const {
  return Tensor(make_impl(impl_->shape, impl_->data));
}

// ---------------------------------------------------------------------------
// GradTape

GradTape::GradTape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

GradTape::~GradTape() { g_active_tape = prev_; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::record(std::vector<std::shared_ptr<TensorImpl>> inputs,
                      std::shared_ptr<TensorImpl> output, std::function<void()> backward_fn) {
  output->is_leaf = false;
  output->requires_grad = true;
  output->producer = this;
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward_fn)});
}

void GradTape::backward(const Tensor& loss) {
  const auto& li = loss.impl();
  if (!li) throw ContractError("backward: undefined tensor");
  if (li->numel != 1)
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(li->shape));
  if (li->is_leaf || li->producer != this)
    throw ContractError("backward: loss was not produced on this tape");

  for (auto& n : nodes_) {
    n.output->adj.clear();
    for (auto& in : n.inputs) in->adj.clear();
  }
  li->adj.assign(1, 1.0);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->adj.empty()) continue;  // not reachable from the loss
    it->fn();
  }

  // Flush scratch adjoints into persistent grads, each leaf exactly once.
  std::unordered_set<TensorImpl*> seen;
  for (auto& n : nodes_) {
    for (auto& in : n.inputs) {
      TensorImpl* p = in.get();
      if (!p->is_leaf || !p->requires_grad || p->adj.empty()) continue;
      if (!seen.insert(p).second) continue;
      if (p->grad.size() != static_cast<size_t>(p->numel))
        p->grad.assign(static_cast<size_t>(p->numel), 0.0);
      for (int64_t i = 0; i < p->numel; ++i) p->grad[static_cast<size_t>(i)] += p->adj[static_cast<size_t>(i)];
    }
  }
  for (auto& n : nodes_) {
    n.output->adj.clear();
    for (auto& in : n.inputs) in->adj.clear();
  }
}

void backward(const Tensor& loss) {
  GradTape* t = GradTape::active();
  if (!t) throw ContractError("backward: no active tape");
  t->backward(loss);
}

// ---------------------------------------------------------------------------
// Elementwise ops

namespace {

enum class Bc { same, a_one, b_one, a_row, b_row };

struct BcPlan {
  Bc kind;
  Shape out_shape;
  int64_t rows = 0;
  int64_t cols = 0;
};

bool is_row_vector(const Shape& s) {
  return s.size() == 1 || (s.size() == 2 && s[0] == 1);
}

BcPlan broadcast_plan(const TensorImpl& a, const TensorImpl& b, const char* op) {
  if (a.shape == b.shape) return {Bc::same, a.shape, 0, 0};
  if (a.numel == 1) return {Bc::a_one, b.shape, 0, 0};
  if (b.numel == 1) return {Bc::b_one, a.shape, 0, 0};
  if (b.shape.size() == 2 && is_row_vector(a.shape) && a.numel == b.shape[1])
    return {Bc::a_row, b.shape, b.shape[0], b.shape[1]};
  if (a.shape.size() == 2 && is_row_vector(b.shape) && b.numel == a.shape[1])
    return {Bc::b_row, a.shape, a.shape[0], a.shape[1]};
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a.shape) + " with " +
                       shape_str(b.shape));
}

// Maps the flat output index to operand indices under the broadcast plan.
struct BcIndex {
  Bc kind;
  int64_t cols;
  int64_t a(int64_t i) const {
    switch (kind) {
      case Bc::a_one: return 0;
      case Bc::a_row: return i % cols;
      default: return i;
    }
  }
  int64_t b(int64_t i) const {
    switch (kind) {
      case Bc::b_one: return 0;
      case Bc::b_row: return i % cols;
      default: return i;
    }
  }
};

// f(av, bv) -> out; ga(dy, av, bv) -> d/da contribution; gb likewise.
template <class F, class Ga, class Gb>
Tensor binary_ew(const Tensor& ta, const Tensor& tb, const char* name, F f, Ga ga, Gb gb) {
  auto a = ta.impl();
  auto b = tb.impl();
  if (!a || !b) throw ContractError(std::string(name) + ": undefined tensor");
  BcPlan plan = broadcast_plan(*a, *b, name);
  BcIndex ix{plan.kind, plan.cols};

  int64_t n = shape_numel(plan.out_shape);
  std::vector<double> out(static_cast<size_t>(n));
  const double* pa = a->data.data();
  const double* pb = b->data.data();
  for (int64_t i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = f(pa[ix.a(i)], pb[ix.b(i)]);

  auto out_impl = make_impl(plan.out_shape, std::move(out));
  Tensor result(out_impl);

  GradTape* tape = GradTape::active();
  if (tape && (a->requires_grad || b->requires_grad)) {
    bool need_a = a->requires_grad;
    bool need_b = b->requires_grad;
    tape->record({a, b}, out_impl, [a, b, out_impl, ix, n, need_a, need_b, ga, gb]() {
      const std::vector<double>& dy = out_impl->adj;
      const double* pa = a->data.data();
      const double* pb = b->data.data();
      if (need_a) {
        auto& da = adj_buf(*a);
        for (int64_t i = 0; i < n; ++i)
          da[static_cast<size_t>(ix.a(i))] += ga(dy[static_cast<size_t>(i)], pa[ix.a(i)], pb[ix.b(i)]);
      }
      if (need_b) {
        auto& db = adj_buf(*b);
        for (int64_t i = 0; i < n; ++i)
          db[static_cast<size_t>(ix.b(i))] += gb(dy[static_cast<size_t>(i)], pa[ix.a(i)], pb[ix.b(i)]);
      }
    });
  }
  return result;
}

// f(x) -> y; g(dy, x, y) -> dx contribution.
template <class F, class G>
Tensor unary_ew(const Tensor& tx, const char* name, F f, G g) {
  auto x = tx.impl();
  if (!x) throw ContractError(std::string(name) + ": undefined tensor");
  int64_t n = x->numel;
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = f(x->data[static_cast<size_t>(i)]);

  auto out_impl = make_impl(x->shape, std::move(out));
  Tensor result(out_impl);

  GradTape* tape = GradTape::active();
  if (tape && x->requires_grad) {
    tape->record({x}, out_impl, [x, out_impl, n, g]() {
      const std::vector<double>& dy = out_impl->adj;
      auto& dx = adj_buf(*x);
      for (int64_t i = 0; i < n; ++i) {
        size_t u = static_cast<size_t>(i);
        dx[u] += g(dy[u], x->data[u], out_impl->data[u]);
      }
    });
  }
  return result;
}

double sigmoid_v(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double dy, double, double) { return dy; }, [](double dy, double, double) { return dy; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double dy, double, double) { return dy; }, [](double dy, double, double) { return -dy; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double dy, double, double y) { return dy * y; },
      [](double dy, double x, double) { return dy * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double dy, double, double y) { return dy / y; },
      [](double dy, double x, double y) { return -dy * x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary_ew(
      a, "neg", [](double x) { return -x; }, [](double dy, double, double) { return -dy; });
}

Tensor exp(const Tensor& a) {
  return unary_ew(
      a, "exp", [](double x) { return std::exp(x); },
      [](double dy, double, double y) { return dy * y; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data())
    if (v < 0.0) throw DataError("sqrt: negative input");
  return unary_ew(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double dy, double, double y) { return 0.5 * dy / y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_ew(
      a, "sigmoid", sigmoid_v, [](double dy, double, double y) { return dy * y * (1.0 - y); });
}

namespace detail {
bool g_corrupt_silu_backward = false;
}

Tensor silu(const Tensor& a) {
  return unary_ew(
      a, "silu", [](double x) { return x * sigmoid_v(x); },
      [](double dy, double x, double) {
        double s = sigmoid_v(x);
        double scale = detail::g_corrupt_silu_backward ? 1.01 : 1.0;
        return scale * dy * s * (1.0 + x * (1.0 - s));
      });
}

Tensor relu(const Tensor& a) {
  return unary_ew(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double dy, double x, double) { return x > 0.0 ? dy : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_ew(
      a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double dy, double x, double) { return x > 0.0 ? dy : slope * dy; });
}

// ---------------------------------------------------------------------------
// matmul

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  auto a = ta.impl();
  auto b = tb.impl();
  if (!a || !b) throw ContractError("matmul: undefined tensor");
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw DimensionError("matmul: incompatible shapes " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
  const int64_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  {
    const double* pa = a->data.data();
    const double* pb = b->data.data();
    double* pc = out.data();
    for (int64_t i = 0; i < m; ++i) {
      double* crow = pc + i * n;
      const double* arow = pa + i * k;
      for (int64_t l = 0; l < k; ++l) {
        double av = arow[l];
        if (av == 0.0) continue;
        const double* brow = pb + l * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }

  auto out_impl = make_impl({m, n}, std::move(out));
  Tensor result(out_impl);

  GradTape* tape = GradTape::active();
  if (tape && (a->requires_grad || b->requires_grad)) {
    bool need_a = a->requires_grad;
    bool need_b = b->requires_grad;
    tape->record({a, b}, out_impl, [a, b, out_impl, m, k, n, need_a, need_b]() {
      const double* dc = out_impl->adj.data();
      const double* pa = a->data.data();
      const double* pb = b->data.data();
      if (need_a) {
        auto& da = adj_buf(*a);
        for (int64_t i = 0; i < m; ++i) {
          const double* dcrow = dc + i * n;
          double* darow = da.data() + i * k;
          for (int64_t l = 0; l < k; ++l) {
            const double* brow = pb + l * n;
            double acc = 0.0;
            for (int64_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
            darow[l] += acc;
          }
        }
      }
      if (need_b) {
        auto& db = adj_buf(*b);
        for (int64_t i = 0; i < m; ++i) {
          const double* dcrow = dc + i * n;
          const double* arow = pa + i * k;
          for (int64_t l = 0; l < k; ++l) {
            double av = arow[l];
            if (av == 0.0) continue;
            double* dbrow = db.data() + l * n;
            for (int64_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
          }
        }
      }
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

struct AxisPlan {
  int64_t outer, len, inner;
  Shape out_shape;
};

AxisPlan axis_plan(const TensorImpl& a, int64_t axis, const char* op) {
  int64_t rank = static_cast<int64_t>(a.shape.size());
  if (axis < 0 || axis >= rank)
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(a.shape));
  AxisPlan p{1, a.shape[static_cast<size_t>(axis)], 1, {}};
  for (int64_t i = 0; i < axis; ++i) p.outer *= a.shape[static_cast<size_t>(i)];
  for (int64_t i = axis + 1; i < rank; ++i) p.inner *= a.shape[static_cast<size_t>(i)];
  for (int64_t i = 0; i < rank; ++i)
    if (i != axis) p.out_shape.push_back(a.shape[static_cast<size_t>(i)]);
  return p;
}

}  // namespace

Tensor reduce_sum(const Tensor& ta, int64_t axis) {
  auto a = ta.impl();
  AxisPlan p = axis_plan(*a, axis, "reduce_sum");
  std::vector<double> out(static_cast<size_t>(p.outer * p.inner), 0.0);
  const double* pa = a->data.data();
  for (int64_t o = 0; o < p.outer; ++o)
    for (int64_t l = 0; l < p.len; ++l)
      for (int64_t i = 0; i < p.inner; ++i)
        out[static_cast<size_t>(o * p.inner + i)] += pa[(o * p.len + l) * p.inner + i];

  auto out_impl = make_impl(p.out_shape, std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && a->requires_grad) {
    tape->record({a}, out_impl, [a, out_impl, p]() {
      auto& da = adj_buf(*a);
      const double* dy = out_impl->adj.data();
      for (int64_t o = 0; o < p.outer; ++o)
        for (int64_t l = 0; l < p.len; ++l)
          for (int64_t i = 0; i < p.inner; ++i)
            da[static_cast<size_t>((o * p.len + l) * p.inner + i)] += dy[o * p.inner + i];
    });
  }
  return result;
}

Tensor reduce_mean(const Tensor& ta, int64_t axis) {
  auto a = ta.impl();
  AxisPlan p = axis_plan(*a, axis, "reduce_mean");
  if (p.len == 0) throw DataError("reduce_mean: empty axis");
  std::vector<double> out(static_cast<size_t>(p.outer * p.inner), 0.0);
  const double* pa = a->data.data();
  for (int64_t o = 0; o < p.outer; ++o)
    for (int64_t l = 0; l < p.len; ++l)
      for (int64_t i = 0; i < p.inner; ++i)
        out[static_cast<size_t>(o * p.inner + i)] += pa[(o * p.len + l) * p.inner + i];
  for (double& v : out) v /= static_cast<double>(p.len);

  auto out_impl = make_impl(p.out_shape, std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && a->requires_grad) {
    tape->record({a}, out_impl, [a, out_impl, p]() {
      auto& da = adj_buf(*a);
      const double* dy = out_impl->adj.data();
      const double inv = 1.0 / static_cast<double>(p.len);
      for (int64_t o = 0; o < p.outer; ++o)
        for (int64_t l = 0; l < p.len; ++l)
          for (int64_t i = 0; i < p.inner; ++i)
            da[static_cast<size_t>((o * p.len + l) * p.inner + i)] += dy[o * p.inner + i] * inv;
    });
  }
  return result;
}

Tensor reduce_max(const Tensor& ta, int64_t axis) {
  auto a = ta.impl();
  AxisPlan p = axis_plan(*a, axis, "reduce_max");
  if (p.len == 0) throw DataError("reduce_max: empty axis");
  std::vector<double> out(static_cast<size_t>(p.outer * p.inner));
  std::vector<int64_t> argmax(static_cast<size_t>(p.outer * p.inner));
  const double* pa = a->data.data();
  for (int64_t o = 0; o < p.outer; ++o)
    for (int64_t i = 0; i < p.inner; ++i) {
      double best = pa[(o * p.len) * p.inner + i];
      int64_t best_l = 0;
      for (int64_t l = 1; l < p.len; ++l) {
        double v = pa[(o * p.len + l) * p.inner + i];
        if (v > best) {  // ties keep the lowest index
          best = v;
          best_l = l;
        }
      }
      out[static_cast<size_t>(o * p.inner + i)] = best;
      argmax[static_cast<size_t>(o * p.inner + i)] = best_l;
    }

  auto out_impl = make_impl(p.out_shape, std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && a->requires_grad) {
    tape->record({a}, out_impl, [a, out_impl, p, argmax = std::move(argmax)]() {
      auto& da = adj_buf(*a);
      const double* dy = out_impl->adj.data();
      for (int64_t o = 0; o < p.outer; ++o)
        for (int64_t i = 0; i < p.inner; ++i) {
          int64_t l = argmax[static_cast<size_t>(o * p.inner + i)];
          da[static_cast<size_t>((o * p.len + l) * p.inner + i)] += dy[o * p.inner + i];
        }
    });
  }
  return result;
}

Tensor sum_all(const Tensor& ta) {
  auto a = ta.impl();
  if (!a) throw ContractError("sum_all: undefined tensor");
  double acc = 0.0;
  for (double v : a->data) acc += v;

  auto out_impl = make_impl({}, {acc});
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && a->requires_grad) {
    tape->record({a}, out_impl, [a, out_impl]() {
      auto& da = adj_buf(*a);
      double dy = out_impl->adj[0];
      for (double& v : da) v += dy;
    });
  }
  return result;
}

}  // namespace kagnn
