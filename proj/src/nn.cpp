#include "kagnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kagnn/detail/tensor_impl.hpp"
#include "kagnn/error.hpp"

namespace kagnn {

// ---------------------------------------------------------------------------
// Linear / Mlp

Linear::Linear(int64_t in, int64_t out, Rng& rng) : in_dim(in), out_dim(out) {
  if (in < 1 || out < 1) throw ConfigError("linear: dimensions must be positive");
  double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(static_cast<size_t>(in * out));
  for (double& v : w) v = rng.uniform(-bound, bound);
  weight = Tensor::parameter({in, out}, std::move(w));
  bias = Tensor::parameter_zeros({out});
}

Tensor Linear::forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                            const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Mlp::Mlp(const std::vector<int64_t>& widths, Rng& rng) {
  if (widths.size() < 2) throw ConfigError("mlp: need at least two widths");
  for (size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

int64_t Mlp::param_count() const {
  int64_t count = 0;
  for (const Linear& l : layers) count += l.param_count();
  return count;
}

void Mlp::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                         const std::string& prefix) const {
  for (size_t i = 0; i < layers.size(); ++i)
    layers[i].collect_params(out, prefix + ".l" + std::to_string(i));
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(int64_t dim) : dim_(dim) {
  if (dim < 1) throw ConfigError("batchnorm: dim must be positive");
  gamma = Tensor::parameter({dim}, std::vector<double>(static_cast<size_t>(dim), 1.0));
  beta = Tensor::parameter_zeros({dim});
  running_mean.assign(static_cast<size_t>(dim), 0.0);
  running_var.assign(static_cast<size_t>(dim), 1.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (x.ndim() != 2 || x.cols() != dim_)
    throw DimensionError("batchnorm: input shape " + shape_str(x.shape()) + " does not match dim " +
                         std::to_string(dim_));
  const int64_t n = x.rows();

  if (mode == Mode::train) {
    if (n < 1) throw DataError("batchnorm: empty batch in train mode");
    Tensor mu = reduce_mean(x, 0);
    Tensor centered = sub(x, mu);
    Tensor var = reduce_mean(mul(centered, centered), 0);  // biased
    Tensor denom = sqrt(add(var, Tensor::scalar(eps)));
    Tensor normalized = div(centered, denom);

    // Running estimates track the batch statistics outside the tape; the
    // variance estimate is unbiased when the batch allows it.
    double correction = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
    auto mu_d = mu.data();
    auto var_d = var.data();
    for (int64_t c = 0; c < dim_; ++c) {
      running_mean[static_cast<size_t>(c)] =
          (1.0 - momentum) * running_mean[static_cast<size_t>(c)] + momentum * mu_d[static_cast<size_t>(c)];
      running_var[static_cast<size_t>(c)] = (1.0 - momentum) * running_var[static_cast<size_t>(c)] +
                                            momentum * correction * var_d[static_cast<size_t>(c)];
    }
    return add(mul(normalized, gamma), beta);
  }

  std::vector<double> denom(static_cast<size_t>(dim_));
  for (int64_t c = 0; c < dim_; ++c)
    denom[static_cast<size_t>(c)] = std::sqrt(running_var[static_cast<size_t>(c)] + eps);
  Tensor mu = Tensor::from_vector({dim_}, running_mean);
  Tensor sd = Tensor::from_vector({dim_}, std::move(denom));
  return add(mul(div(sub(x, mu), sd), gamma), beta);
}

void BatchNorm::collect_params(std::vector<std::pair<std::string, Tensor>>& out,
                               const std::string& prefix) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

// ---------------------------------------------------------------------------
// Dropout

Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
  if (p == 0.0 || mode == Mode::eval) return x;

  const double scale = 1.0 / (1.0 - p);
  std::vector<double> mask(static_cast<size_t>(x.size()));
  for (double& v : mask) v = rng.uniform() < p ? 0.0 : scale;
  return mul(x, Tensor::from_vector(x.shape(), std::move(mask)));
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<size_t>(params_[i].size()), 0.0);
    v_[i].assign(static_cast<size_t>(params_[i].size()), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    if (static_cast<int64_t>(g.size()) != p.size())
      throw DimensionError("adam: gradient size does not match parameter");
    auto data = p.mutable_data();
    for (size_t j = 0; j < g.size(); ++j) {
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      double mhat = m_[i][j] / bc1;
      double vhat = v_[i][j] / bc2;
      data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Losses

using detail::TensorImpl;
using detail::adj_buf;

namespace {

std::shared_ptr<TensorImpl> make_scalar_impl(double v) {
  auto impl = std::make_shared<TensorImpl>();
  impl->numel = 1;
  impl->data = {v};
  return impl;
}

}  // namespace

Tensor cross_entropy(const Tensor& tlogits, const std::vector<int64_t>& labels) {
  auto logits = tlogits.impl();
  if (!logits) throw ContractError("cross_entropy: undefined tensor");
  if (logits->shape.size() != 2)
    throw DimensionError("cross_entropy: logits must be [n, classes], got " + shape_str(logits->shape));
  const int64_t n = logits->shape[0], c = logits->shape[1];
  if (static_cast<int64_t>(labels.size()) != n)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  if (n == 0) throw DataError("cross_entropy: empty batch");

  // Mean negative log softmax probability, max-subtracted per row.
  std::vector<double> probs(static_cast<size_t>(n * c));
  double loss = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    int64_t y = labels[static_cast<size_t>(r)];
    if (y < 0 || y >= c) throw DataError("cross_entropy: label " + std::to_string(y) + " out of range");
    const double* row = logits->data.data() + r * c;
    double mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      double e = std::exp(row[j] - mx);
      probs[static_cast<size_t>(r * c + j)] = e;
      z += e;
    }
    for (int64_t j = 0; j < c; ++j) probs[static_cast<size_t>(r * c + j)] /= z;
    loss -= std::log(probs[static_cast<size_t>(r * c + y)]);
  }
  loss /= static_cast<double>(n);

  auto out_impl = make_scalar_impl(loss);
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && logits->requires_grad) {
    tape->record({logits}, out_impl, [logits, out_impl, labels, probs = std::move(probs), n, c]() {
      double dy = out_impl->adj[0] / static_cast<double>(n);
      auto& dl = adj_buf(*logits);
      for (int64_t r = 0; r < n; ++r) {
        int64_t y = labels[static_cast<size_t>(r)];
        for (int64_t j = 0; j < c; ++j) {
          double p = probs[static_cast<size_t>(r * c + j)];
          dl[static_cast<size_t>(r * c + j)] += dy * (p - (j == y ? 1.0 : 0.0));
        }
      }
    });
  }
  return result;
}

Tensor mae_loss(const Tensor& tpred, const Tensor& ttarget) {
  auto pred = tpred.impl();
  auto target = ttarget.impl();
  if (!pred || !target) throw ContractError("mae_loss: undefined tensor");
  if (pred->shape != target->shape)
    throw DimensionError("mae_loss: shape mismatch " + shape_str(pred->shape) + " vs " +
                         shape_str(target->shape));
  const int64_t n = pred->numel;
  if (n == 0) throw DataError("mae_loss: empty input");

  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i)
    loss += std::fabs(pred->data[static_cast<size_t>(i)] - target->data[static_cast<size_t>(i)]);
  loss /= static_cast<double>(n);

  auto out_impl = make_scalar_impl(loss);
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && (pred->requires_grad || target->requires_grad)) {
    bool need_p = pred->requires_grad;
    bool need_t = target->requires_grad;
    tape->record({pred, target}, out_impl, [pred, target, out_impl, n, need_p, need_t]() {
      double dy = out_impl->adj[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) {
        double diff = pred->data[static_cast<size_t>(i)] - target->data[static_cast<size_t>(i)];
        double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);  // ties get subgradient 0
        if (need_p) adj_buf(*pred)[static_cast<size_t>(i)] += dy * s;
        if (need_t) adj_buf(*target)[static_cast<size_t>(i)] -= dy * s;
      }
    });
  }
  return result;
}

Tensor bce_with_logits(const Tensor& tlogits, const std::vector<double>& targets) {
  auto logits = tlogits.impl();
  if (!logits) throw ContractError("bce_with_logits: undefined tensor");
  const int64_t n = logits->numel;
  if (static_cast<int64_t>(targets.size()) != n)
    throw DimensionError("bce_with_logits: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " logits");
  if (n == 0) throw DataError("bce_with_logits: empty input");

  // mean(max(q,0) - q*t + log(1 + exp(-|q|)))
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double q = logits->data[static_cast<size_t>(i)];
    loss += std::max(q, 0.0) - q * targets[static_cast<size_t>(i)] + std::log1p(std::exp(-std::fabs(q)));
  }
  loss /= static_cast<double>(n);

  auto out_impl = make_scalar_impl(loss);
  Tensor result(out_impl);
  GradTape* tape = GradTape::active();
  if (tape && logits->requires_grad) {
    tape->record({logits}, out_impl, [logits, out_impl, targets, n]() {
      double dy = out_impl->adj[0] / static_cast<double>(n);
      auto& dl = adj_buf(*logits);
      for (int64_t i = 0; i < n; ++i) {
        double q = logits->data[static_cast<size_t>(i)];
        double s = 1.0 / (1.0 + std::exp(-q));
        dl[static_cast<size_t>(i)] += dy * (s - targets[static_cast<size_t>(i)]);
      }
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Metrics

double accuracy(const Tensor& logits, std::span<const int64_t> labels) {
  if (logits.ndim() != 2) throw DimensionError("accuracy: logits must be 2-d");
  const int64_t n = logits.rows(), c = logits.cols();
  if (static_cast<int64_t>(labels.size()) != n)
    throw DimensionError("accuracy: label count does not match rows");
  if (n == 0) throw MetricError("accuracy: empty input");
  auto d = logits.data();
  int64_t hits = 0;
  for (int64_t r = 0; r < n; ++r) {
    int64_t best = 0;
    for (int64_t j = 1; j < c; ++j)
      if (d[static_cast<size_t>(r * c + j)] > d[static_cast<size_t>(r * c + best)]) best = j;
    if (best == labels[static_cast<size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double mae_value(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw DimensionError("mae_value: size mismatch");
  if (pred.empty()) throw MetricError("mae_value: empty input");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - target[i]);
  return acc / static_cast<double>(pred.size());
}

double roc_auc(std::span<const double> scores, std::span<const int64_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: size mismatch");
  const size_t n = scores.size();
  size_t pos = 0;
  for (int64_t y : labels) {
    if (y != 0 && y != 1) throw DataError("roc_auc: labels must be 0 or 1");
    pos += static_cast<size_t>(y);
  }
  size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw MetricError("roc_auc: needs both classes present");

  // Rank-sum with midranks for ties: AUC = (R+ - n+(n+ + 1)/2) / (n+ n-).
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += mid_rank;
    i = j + 1;
  }
  double auc = (rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1)) /
               (static_cast<double>(pos) * static_cast<double>(neg));
  return auc;
}

}  // namespace kagnn
