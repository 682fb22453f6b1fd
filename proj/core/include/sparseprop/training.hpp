#pragma once

// Optimizers and the training loop. A batch is an outer loop over samples
// whose gradients are averaged before one parameter update.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sparseprop/dataset.hpp"
#include "sparseprop/gradients.hpp"

namespace sparseprop {

/// params -= lr * grads. Throws ShapeMismatch.
template <typename T>
void sgd_update(std::span<T> params, std::span<const T> grads, double lr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// Bias-corrected Adam. An empty state is sized on first use.
/// Throws ShapeMismatch.
template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, double lr, AdamState& state, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);

enum class OptimizerKind { sgd, adam };

const char* optimizer_name(OptimizerKind k) noexcept;
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  Method method = Method::eprop_sparse;
  OptimizerConfig optimizer;
  std::size_t epochs = 1;
  std::size_t batch = 1;
  // Stop after this many updates even mid-epoch; 0 means no limit.
  std::size_t max_updates = 0;
  bool shuffle = true;
  std::uint64_t seed = 0;
  GradientOptions gradient;
};

struct MetricsRow {
  std::size_t epoch = 0;
  std::size_t step = 0;  // parameter updates so far
  double loss = 0.0;     // mean over the dataset
  double accuracy = 0.0;
};

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

template <typename T>
EvalMetrics evaluate_network(const Network<T>& net, std::span<const Sample<T>> samples, const EvalOptions& eval = {});

template <typename T>
struct TrainResult {
  Network<T> net;
  // Row 0 evaluates the initial parameters, then one row per finished epoch
  // (plus a final row if max_updates cut an epoch short).
  std::vector<MetricsRow> log;
  std::size_t updates = 0;
};

/// Called after every update with (update index, batch mean loss).
using UpdateCallback = std::function<void(std::size_t, double)>;

template <typename T>
TrainResult<T> train(const NetworkSpec& spec, std::span<const Sample<T>> samples, const TrainConfig& config,
                     const UpdateCallback& on_update = {});

/// Precision dispatch over spec.precision for a whole dataset.
std::vector<MetricsRow> train_dataset(const NetworkSpec& spec, const SpikeDataset& ds, const TrainConfig& config,
                                      const UpdateCallback& on_update = {});

/// Header "epoch,step,loss,accuracy" and one line per row.
void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out);

}  // namespace sparseprop
