#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kagnn/rng.hpp"
#include "kagnn/tensor.hpp"

namespace kagnn {

enum class Mode { train, eval };

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  int64_t in_dim = 0, out_dim = 0;

  Linear() = default;
  Linear(int64_t in, int64_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;
  int64_t param_count() const { return in_dim * out_dim + out_dim; }
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix) const;
};

// Affine layers with ReLU between them and none after the last.
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(const std::vector<int64_t>& widths, Rng& rng);
  Tensor forward(const Tensor& x) const;
  int64_t param_count() const;
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix) const;
};

// Per-column batch normalization. Train mode normalizes by batch statistics
// and folds them into the running estimates; eval mode uses the running
// estimates and never mutates them.
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(int64_t dim);

  Tensor forward(const Tensor& x, Mode mode);

  int64_t dim() const { return dim_; }
  int64_t param_count() const { return 2 * dim_; }
  void collect_params(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix) const;

  Tensor gamma, beta;
  std::vector<double> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

 private:
  int64_t dim_ = 0;
};

// Inverted dropout: train mode zeroes entries with probability p and scales
// survivors by 1/(1-p); eval mode is the identity. p >= 1 is a config error.
Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  // One bias-corrected update from the accumulated gradients; the timestep
  // advances once per call. Parameters without a gradient are left alone.
  void step();
  void zero_grad();
  int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

// Losses (scalar outputs).
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels);
Tensor mae_loss(const Tensor& pred, const Tensor& target);
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);

// Metrics (plain doubles, no tape).
double accuracy(const Tensor& logits, std::span<const int64_t> labels);
double mae_value(std::span<const double> pred, std::span<const double> target);
// Mann-Whitney ROC-AUC; tied scores count 1/2. Throws MetricError when only
// one class is present.
double roc_auc(std::span<const double> scores, std::span<const int64_t> labels);

}  // namespace kagnn
