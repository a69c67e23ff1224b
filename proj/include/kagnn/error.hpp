#pragma once

#include <stdexcept>
#include <string>

namespace kagnn {

// Error taxonomy. The CLI maps these onto exit codes: ConfigError and
// ContractError -> 1, DataError/IoError/MetricError -> 2, NumericError -> 3.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatches and other misuse of the tensor/layer APIs.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training. Carries enough context to debug the run.
struct NumericError : std::runtime_error {
  NumericError(const std::string& what, long long epoch_, long long batch_, double lr_)
      : std::runtime_error(what), epoch(epoch_), batch(batch_), lr(lr_) {}
  long long epoch = -1;
  long long batch = -1;
  double lr = 0.0;
};

}  // namespace kagnn
