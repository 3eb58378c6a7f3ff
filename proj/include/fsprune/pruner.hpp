#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fsprune/kernel_mask.hpp"
#include "fsprune/network.hpp"
#include "fsprune/sparsity.hpp"

namespace fsprune {

enum class PruneScope { global, per_layer };

/// Cumulative sums within this distance of the threshold count as reaching it,
/// so that decimal boundaries (0.001 + 0.009 vs 0.01) are not decided by
/// round-off.
inline constexpr double kThresholdTolerance = 1e-12;

std::string to_string(PruneScope scope);
PruneScope prune_scope_from_string(const std::string& name);

struct PruneConfig {
  /// Fraction of normalized norm mass below which kernels are removed.
  double threshold = 0.01;
  PruneScope scope = PruneScope::global;
  /// Minimum number of active kernels per layer.
  std::size_t min_keep = 1;

  /// Throws std::invalid_argument unless 0 <= threshold < 1 and min_keep >= 1.
  void validate() const;

  friend bool operator==(const PruneConfig&, const PruneConfig&) = default;
};

struct PruneEvent {
  int epoch = 0;
  std::vector<KernelIndex> removed;
  /// Sum of the removed kernels' normalized norms.
  double norm_mass_removed = 0.0;
  std::vector<std::size_t> active_counts_after;

  friend bool operator==(const PruneEvent&, const PruneEvent&) = default;
};

/// Divides by the global sum (global scope) or each layer block by its own sum
/// (per-layer scope). Throws DegenerateNetworkError on a zero-sum unit.
KernelNormVector normalize_norms(const KernelNormVector& nv, PruneScope scope);

/// Walks active kernels in ascending (norm, layer, kernel) order and selects
/// each one while the running sum of selected mass stays strictly below the
/// threshold (less kThresholdTolerance); the first kernel that would reach it ends the walk. Kernels whose
/// removal would leave their layer under min_keep are passed over without
/// adding to the sum. With per-layer scope every layer runs its own walk.
std::vector<KernelIndex> select_removals(const KernelNormVector& normalized, const KernelMask& mask,
                                         const PruneConfig& config);

/// Zeroes the selected kernels' weights, biases and momentum slices (when
/// `momentum` is given, parallel to network.parameters()) and freezes them.
/// Idempotent.
void apply_mask(Network& network, std::span<const KernelIndex> removals, KernelMask& mask,
                std::span<Tensor> momentum = {});

/// build_norm_vector > normalize_norms > select_removals > apply_mask.
PruneEvent prune_epoch(Network& network, KernelMask& mask, const PruneConfig& config, int epoch,
                       std::span<Tensor> momentum = {});

/// One JSON object, no trailing newline.
std::string prune_event_to_json(const PruneEvent& event);
PruneEvent prune_event_from_json(const std::string& line);

}  // namespace fsprune
