#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kagnn/aggregation.hpp"

namespace kagnn {

namespace detail {
struct TensorImpl;
}

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);

// Dense row-major tensor of doubles. Copies share storage; ops executed while
// a GradTape is active record their adjoints for reverse-mode differentiation.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_vector(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // Leaf tensors that accumulate gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor parameter_zeros(Shape shape);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t ndim() const;
  int64_t size() const;
  int64_t rows() const;  // 2-d only
  int64_t cols() const;  // 2-d only

  double item() const;  // single-element tensors
  double at(int64_t i) const;
  double at(int64_t i, int64_t j) const;

  std::span<const double> data() const;
  std::span<double> mutable_data();

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Deep copy of the values; never on a tape.
  Tensor clone_detached() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Define-by-run tape. Constructing one makes it the active tape for the
// current thread; destruction restores the previous one. Ops record nodes in
// execution order and backward replays them in strictly decreasing order.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active();

  void record(std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
              std::shared_ptr<detail::TensorImpl> output,
              std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and accumulates into the grad of every
  // reachable requires_grad leaf. Calling twice without zero_grad doubles
  // those gradients.
  void backward(const Tensor& loss);

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void()> fn;
  };
  std::vector<Node> nodes_;
  GradTape* prev_ = nullptr;
};

// Backward on the active tape.
void backward(const Tensor& loss);

// Elementwise. Binary ops broadcast identical shapes, a single-element
// operand against anything, or a row vector ([d] or [1,d]) against [n,d].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }

Tensor matmul(const Tensor& a, const Tensor& b);

// Reductions drop the reduced axis. Max routes its gradient to the lowest
// index among ties.
Tensor reduce_sum(const Tensor& a, int64_t axis);
Tensor reduce_mean(const Tensor& a, int64_t axis);
Tensor reduce_max(const Tensor& a, int64_t axis);
Tensor sum_all(const Tensor& a);

// Row-structured ops used by the graph layers.
Tensor gather_rows(const Tensor& a, const std::vector<int64_t>& index);
Tensor scale_rows(const Tensor& a, const Tensor& scale);  // scale: [n] or [n,1]
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor segment_sum(const Tensor& a, const std::vector<int64_t>& segment_of_row, int64_t num_segments);
Tensor segment_mean(const Tensor& a, const std::vector<int64_t>& segment_of_row, int64_t num_segments);
// Softmax within contiguous row segments (max-subtracted). 1-d input or one
// softmax per column of a 2-d input.
Tensor segment_softmax(const Tensor& scores, const std::vector<int64_t>& offsets);

// Sparse neighborhood sum; see AggregationPlan. The plan is kept alive by the
// recorded node, so it must be handed over as a shared_ptr.
Tensor aggregate(std::shared_ptr<const AggregationPlan> plan, const Tensor& h);

}  // namespace kagnn
