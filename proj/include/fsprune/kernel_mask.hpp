#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fsprune/optimizer.hpp"

namespace fsprune {

class Network;

/// Active (true) / frozen (false) flag for every kernel of every conv layer.
/// Flags only ever go from active to frozen.
class KernelMask {
 public:
  KernelMask() = default;
  explicit KernelMask(const std::vector<std::size_t>& kernels_per_layer);
  /// All kernels of `network` active.
  static KernelMask all_active(const Network& network);

  std::size_t layer_count() const { return active_.size(); }
  std::size_t kernel_count(std::size_t layer) const { return active_.at(layer).size(); }
  bool is_active(std::size_t layer, std::size_t kernel) const { return active_.at(layer).at(kernel) != 0; }
  void freeze(std::size_t layer, std::size_t kernel) { active_.at(layer).at(kernel) = 0; }

  std::size_t active_count(std::size_t layer) const;
  std::vector<std::size_t> active_counts() const;
  std::size_t active_count() const;
  const std::vector<std::vector<std::uint8_t>>& flags() const { return active_; }

  /// True when the layer/kernel counts agree with the network's conv layers.
  bool matches(const Network& network) const;

  /// Per-parameter freeze masks, parallel to network.parameters(): a frozen
  /// kernel freezes its weight slice and its bias entry.
  std::vector<FrozenMask> frozen_parameters(const Network& network) const;

  friend bool operator==(const KernelMask&, const KernelMask&) = default;

 private:
  std::vector<std::vector<std::uint8_t>> active_;
};

}  // namespace fsprune
