#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsprune/datasets.hpp"
#include "fsprune/kernel_mask.hpp"
#include "fsprune/network.hpp"
#include "fsprune/optimizer.hpp"
#include "fsprune/pruner.hpp"
#include "fsprune/sparsity.hpp"

namespace fsprune {

struct TrainConfig {
  std::string model = "lenet";
  std::string dataset = "synthetic";
  int epochs = 10;
  std::size_t batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  RegularizerConfig reg;
  PruneConfig prune;
  bool prune_enabled = true;

  /// Throws std::invalid_argument on out-of-range settings.
  void validate() const;
  SgdOptions sgd() const { return {lr, momentum, StoragePrecision::f32}; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochMetrics {
  int epoch = 0;
  /// Sample-weighted mean task loss over the epoch's batches.
  double loss_task = 0.0;
  /// Regularizer value at the end of the epoch (after pruning).
  double loss_reg = 0.0;
  /// loss_task + lambda * loss_reg.
  double loss_all = 0.0;
  double test_error_pct = 0.0;
  std::vector<std::size_t> active_counts;
  double total_sparsity_pct = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

/// Everything a run mutates. Resuming continues from history.size() + 1.
struct TrainState {
  Network network;
  KernelMask mask;
  /// Momentum buffers parallel to network.parameters().
  std::vector<Tensor> momentum;
  std::vector<EpochMetrics> history;
  std::vector<PruneEvent> events;

  explicit TrainState(Network net);
};

/// Fresh network for config.model, seeded with config.seed.
TrainState initial_state(const TrainConfig& config, const Shape& sample_shape);

struct EpochLosses {
  double task_mean = 0.0;
  double reg_end = 0.0;
};

/// One pass over `data`: per batch, task gradient plus lambda times the
/// regularizer gradient, then an SGD step that leaves frozen kernels untouched.
EpochLosses train_epoch(Network& network, const LabeledDataset& data, const TrainConfig& config,
                        const KernelMask& mask, std::vector<Tensor>& momentum, int epoch);

/// Predicted class per sample (argmax, lowest index on ties).
std::vector<int> predict(const Network& network, const LabeledDataset& data, std::size_t batch_size = 500);
/// Classification error in percent.
double evaluate(const Network& network, const LabeledDataset& data);

using EpochCallback = std::function<void(const TrainState&)>;

/// Runs epochs history.size() + 1 .. config.epochs: train, prune (if enabled),
/// evaluate, record. `on_epoch` fires after each recorded epoch.
void run_training(TrainState& state, const TrainConfig& config, const LabeledDataset& train,
                  const LabeledDataset& test, const EpochCallback& on_epoch = {});
TrainState run_training(const TrainConfig& config, const LabeledDataset& train, const LabeledDataset& test,
                        const EpochCallback& on_epoch = {});

class NoQualifyingModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index of the history entry with maximal total sparsity among those with
/// error <= baseline_error + max_error_delta; ties go to the earliest entry.
std::size_t select_best_tradeoff(const std::vector<EpochMetrics>& history, double baseline_error,
                                 double max_error_delta = std::numeric_limits<double>::infinity());

struct SweepPoint {
  std::size_t removed = 0;
  double error_pct = 0.0;
};

/// Zeroes conv layer `layer`'s kernels one by one in ascending pseudo-norm
/// order on a copy of the network, evaluating after each step. The first point
/// is the unmodified network; there are kernel_count + 1 points.
std::vector<SweepPoint> layer_sweep(const Network& network, const KernelMask& mask, std::size_t layer,
                                    const LabeledDataset& test);

}  // namespace fsprune
