#include <algorithm>
#include <cmath>

#include "kagnn/detail/tensor_impl.hpp"
#include "kagnn/error.hpp"
#include "kagnn/tensor.hpp"

// Row-indexed ops: gathers, per-row scaling, segment reductions, segment
// softmax and the sparse neighborhood aggregation used by the graph layers.

namespace kagnn {

using detail::TensorImpl;
using detail::adj_buf;

namespace {

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->numel = static_cast<int64_t>(data.size());
  impl->data = std::move(data);
  return impl;
}

// Rows of a 1-d tensor are single elements.
int64_t row_width(const TensorImpl& t, const char* op) {
  if (t.shape.size() == 1) return 1;
  if (t.shape.size() == 2) return t.shape[1];
  throw DimensionError(std::string(op) + ": expected 1-d or 2-d tensor, got shape " +
                       shape_str(t.shape));
}

Shape with_rows(const TensorImpl& t, int64_t n) {
  Shape s = t.shape;
  s[0] = n;
  return s;
}

}  // namespace

Tensor gather_rows(const Tensor& ta, const std::vector<int64_t>& index) {
  auto a = ta.impl();
  if (!a) throw ContractError("gather_rows: undefined tensor");
  int64_t d = row_width(*a, "gather_rows");
  int64_t n = a->shape[0];
  int64_t m = static_cast<int64_t>(index.size());
  std::vector<double> out(static_cast<size_t>(m * d));
  for (int64_t r = 0; r < m; ++r) {
    int64_t src = index[static_cast<size_t>(r)];
    if (src < 0 || src >= n) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(a->data.data() + src * d, d, out.data() + r * d);
  }

  auto out_impl = make_impl(with_rows(*a, m), std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && a->requires_grad) {
    tape->record({a}, out_impl, [a, out_impl, index, m, d]() {
      auto& da = adj_buf(*a);
      const double* dy = out_impl->adj.data();
      for (int64_t r = 0; r < m; ++r) {
        double* dst = da.data() + index[static_cast<size_t>(r)] * d;
        const double* src = dy + r * d;
        for (int64_t c = 0; c < d; ++c) dst[c] += src[c];
      }
    });
  }
  return result;
}

Tensor scale_rows(const Tensor& ta, const Tensor& ts) {
  auto a = ta.impl();
  auto s = ts.impl();
  if (!a || !s) throw ContractError("scale_rows: undefined tensor");
  int64_t d = row_width(*a, "scale_rows");
  int64_t n = a->shape[0];
  bool s_ok = (s->shape.size() == 1 && s->shape[0] == n) ||
              (s->shape.size() == 2 && s->shape[0] == n && s->shape[1] == 1);
  if (!s_ok)
    throw DimensionError("scale_rows: scale shape " + shape_str(s->shape) +
                         " does not match rows of " + shape_str(a->shape));

  std::vector<double> out(static_cast<size_t>(n * d));
  for (int64_t r = 0; r < n; ++r) {
    double w = s->data[static_cast<size_t>(r)];
    const double* src = a->data.data() + r * d;
    double* dst = out.data() + r * d;
    for (int64_t c = 0; c < d; ++c) dst[c] = w * src[c];
  }

  auto out_impl = make_impl(a->shape, std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && (a->requires_grad || s->requires_grad)) {
    bool need_a = a->requires_grad;
    bool need_s = s->requires_grad;
    tape->record({a, s}, out_impl, [a, s, out_impl, n, d, need_a, need_s]() {
      const double* dy = out_impl->adj.data();
      if (need_a) {
        auto& da = adj_buf(*a);
        for (int64_t r = 0; r < n; ++r) {
          double w = s->data[static_cast<size_t>(r)];
          double* dst = da.data() + r * d;
          const double* src = dy + r * d;
          for (int64_t c = 0; c < d; ++c) dst[c] += w * src[c];
        }
      }
      if (need_s) {
        auto& ds = adj_buf(*s);
        for (int64_t r = 0; r < n; ++r) {
          const double* av = a->data.data() + r * d;
          const double* src = dy + r * d;
          double acc = 0.0;
          for (int64_t c = 0; c < d; ++c) acc += av[c] * src[c];
          ds[static_cast<size_t>(r)] += acc;
        }
      }
    });
  }
  return result;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no tensors given");
  std::vector<std::shared_ptr<TensorImpl>> impls;
  int64_t n = -1, total = 0;
  for (const Tensor& t : parts) {
    auto p = t.impl();
    if (!p || p->shape.size() != 2) throw DimensionError("concat_cols: expected 2-d tensors");
    if (n < 0) n = p->shape[0];
    if (p->shape[0] != n)
      throw DimensionError("concat_cols: row count mismatch, " + shape_str(p->shape));
    total += p->shape[1];
    impls.push_back(p);
  }

  std::vector<double> out(static_cast<size_t>(n * total));
  int64_t col0 = 0;
  for (auto& p : impls) {
    int64_t d = p->shape[1];
    for (int64_t r = 0; r < n; ++r)
      std::copy_n(p->data.data() + r * d, d, out.data() + r * total + col0);
    col0 += d;
  }

  auto out_impl = make_impl({n, total}, std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  bool any_grad = false;
  for (auto& p : impls) any_grad = any_grad || p->requires_grad;
  if (tape && any_grad) {
    tape->record(impls, out_impl, [impls, out_impl, n, total]() {
      const double* dy = out_impl->adj.data();
      int64_t col0 = 0;
      for (auto& p : impls) {
        int64_t d = p->shape[1];
        if (p->requires_grad) {
          auto& dp = adj_buf(*p);
          for (int64_t r = 0; r < n; ++r) {
            const double* src = dy + r * total + col0;
            double* dst = dp.data() + r * d;
            for (int64_t c = 0; c < d; ++c) dst[c] += src[c];
          }
        }
        col0 += d;
      }
    });
  }
  return result;
}

namespace {

Tensor segment_reduce(const Tensor& ta, const std::vector<int64_t>& seg, int64_t num_segments,
                      bool mean, const char* name) {
  auto a = ta.impl();
  if (!a) throw ContractError(std::string(name) + ": undefined tensor");
  int64_t d = row_width(*a, name);
  int64_t n = a->shape[0];
  if (static_cast<int64_t>(seg.size()) != n)
    throw DimensionError(std::string(name) + ": segment ids cover " + std::to_string(seg.size()) +
                         " rows, tensor has " + std::to_string(n));

  std::vector<double> out(static_cast<size_t>(num_segments * d), 0.0);
  std::vector<int64_t> count(static_cast<size_t>(num_segments), 0);
  for (int64_t r = 0; r < n; ++r) {
    int64_t g = seg[static_cast<size_t>(r)];
    if (g < 0 || g >= num_segments) throw DimensionError(std::string(name) + ": segment id out of range");
    const double* src = a->data.data() + r * d;
    double* dst = out.data() + g * d;
    for (int64_t c = 0; c < d; ++c) dst[c] += src[c];
    ++count[static_cast<size_t>(g)];
  }
  if (mean) {
    for (int64_t g = 0; g < num_segments; ++g) {
      if (count[static_cast<size_t>(g)] == 0)
        throw DataError(std::string(name) + ": segment " + std::to_string(g) + " is empty");
      double inv = 1.0 / static_cast<double>(count[static_cast<size_t>(g)]);
      double* dst = out.data() + g * d;
      for (int64_t c = 0; c < d; ++c) dst[c] *= inv;
    }
  }

  auto out_impl = make_impl(with_rows(*a, num_segments), std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && a->requires_grad) {
    tape->record({a}, out_impl, [a, out_impl, seg, n, d, mean, count = std::move(count)]() {
      auto& da = adj_buf(*a);
      const double* dy = out_impl->adj.data();
      for (int64_t r = 0; r < n; ++r) {
        int64_t g = seg[static_cast<size_t>(r)];
        double w = mean ? 1.0 / static_cast<double>(count[static_cast<size_t>(g)]) : 1.0;
        const double* src = dy + g * d;
        double* dst = da.data() + r * d;
        for (int64_t c = 0; c < d; ++c) dst[c] += w * src[c];
      }
    });
  }
  return result;
}

}  // namespace

Tensor segment_sum(const Tensor& a, const std::vector<int64_t>& segment_of_row, int64_t num_segments) {
  return segment_reduce(a, segment_of_row, num_segments, false, "segment_sum");
}

Tensor segment_mean(const Tensor& a, const std::vector<int64_t>& segment_of_row, int64_t num_segments) {
  return segment_reduce(a, segment_of_row, num_segments, true, "segment_mean");
}

Tensor segment_softmax(const Tensor& ts, const std::vector<int64_t>& offsets) {
  auto s = ts.impl();
  if (!s) throw ContractError("segment_softmax: undefined tensor");
  int64_t d = row_width(*s, "segment_softmax");
  int64_t n = s->shape[0];
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != n)
    throw DimensionError("segment_softmax: offsets do not cover the rows");
  int64_t num_seg = static_cast<int64_t>(offsets.size()) - 1;

  std::vector<double> out(static_cast<size_t>(n * d));
  const double* ps = s->data.data();
  for (int64_t g = 0; g < num_seg; ++g) {
    int64_t lo = offsets[static_cast<size_t>(g)], hi = offsets[static_cast<size_t>(g) + 1];
    if (hi < lo) throw DimensionError("segment_softmax: offsets not monotone");
    for (int64_t c = 0; c < d; ++c) {
      double mx = -HUGE_VAL;
      for (int64_t r = lo; r < hi; ++r) mx = std::max(mx, ps[r * d + c]);
      double z = 0.0;
      for (int64_t r = lo; r < hi; ++r) {
        double e = std::exp(ps[r * d + c] - mx);
        out[static_cast<size_t>(r * d + c)] = e;
        z += e;
      }
      for (int64_t r = lo; r < hi; ++r) out[static_cast<size_t>(r * d + c)] /= z;
    }
  }

  auto out_impl = make_impl(s->shape, std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && s->requires_grad) {
    tape->record({s}, out_impl, [s, out_impl, offsets, num_seg, d]() {
      auto& ds = adj_buf(*s);
      const double* dy = out_impl->adj.data();
      const double* y = out_impl->data.data();
      for (int64_t g = 0; g < num_seg; ++g) {
        int64_t lo = offsets[static_cast<size_t>(g)], hi = offsets[static_cast<size_t>(g) + 1];
        for (int64_t c = 0; c < d; ++c) {
          double dot = 0.0;
          for (int64_t r = lo; r < hi; ++r) dot += y[r * d + c] * dy[r * d + c];
          for (int64_t r = lo; r < hi; ++r)
            ds[static_cast<size_t>(r * d + c)] += y[r * d + c] * (dy[r * d + c] - dot);
        }
      }
    });
  }
  return result;
}

Tensor aggregate(std::shared_ptr<const AggregationPlan> plan, const Tensor& th) {
  auto h = th.impl();
  if (!h || !plan) throw ContractError("aggregate: undefined tensor or plan");
  if (h->shape.size() != 2 || h->shape[0] != plan->num_nodes)
    throw DimensionError("aggregate: features shape " + shape_str(h->shape) + " does not match " +
                         std::to_string(plan->num_nodes) + " nodes");
  const int64_t n = plan->num_nodes;
  const int64_t d = h->shape[1];

  std::vector<double> out(static_cast<size_t>(n * d), 0.0);
  const double* ph = h->data.data();
  for (int64_t v = 0; v < n; ++v) {
    double* dst = out.data() + v * d;
    double sw = plan->self_weight.empty() ? 0.0 : plan->self_weight[static_cast<size_t>(v)];
    if (sw != 0.0) {
      const double* src = ph + v * d;
      for (int64_t c = 0; c < d; ++c) dst[c] += sw * src[c];
    }
    for (int64_t e = plan->offsets[static_cast<size_t>(v)]; e < plan->offsets[static_cast<size_t>(v) + 1]; ++e) {
      double w = plan->weights[static_cast<size_t>(e)];
      const double* src = ph + plan->targets[static_cast<size_t>(e)] * d;
      for (int64_t c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  }

  auto out_impl = make_impl(h->shape, std::move(out));
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && h->requires_grad) {
    // dL/dh[u] picks up w(v,u) * dL/dout[v] for every entry (v,u).
    tape->record({h}, out_impl, [h, out_impl, p = std::move(plan), n, d]() {
      auto& dh = adj_buf(*h);
      const double* dy = out_impl->adj.data();
      for (int64_t v = 0; v < n; ++v) {
        const double* src = dy + v * d;
        double sw = p->self_weight.empty() ? 0.0 : p->self_weight[static_cast<size_t>(v)];
        if (sw != 0.0) {
          double* dst = dh.data() + v * d;
          for (int64_t c = 0; c < d; ++c) dst[c] += sw * src[c];
        }
        for (int64_t e = p->offsets[static_cast<size_t>(v)]; e < p->offsets[static_cast<size_t>(v) + 1]; ++e) {
          double w = p->weights[static_cast<size_t>(e)];
          double* dst = dh.data() + p->targets[static_cast<size_t>(e)] * d;
          for (int64_t c = 0; c < d; ++c) dst[c] += w * src[c];
        }
      }
    });
  }
  return result;
}

}  // namespace kagnn
