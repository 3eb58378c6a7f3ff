#pragma once

#include <cstdint>
#include <vector>

#include "fsprune/kernel_mask.hpp"
#include "fsprune/network.hpp"

namespace fsprune {

/// LeNet as defined for Caffe: conv(20, 5x5) > pool > conv(50, 5x5) > pool >
/// flatten > linear(500) > relu > linear(10). Accepts 1x28x28 or 3x32x32.
/// The conv widths are parameters so that compacted models stay LeNets.
ArchitectureSpec lenet_spec(const Shape& input_shape, std::size_t conv1 = 20, std::size_t conv2 = 50);

/// VGG11 feature stack (8 conv layers, 3x3, padding 1, ReLU after each) with a
/// single linear(512 -> 10) head. Accepts 3x32x32.
ArchitectureSpec vgg11_spec(const Shape& input_shape);

Network build_lenet(const Shape& input_shape, std::uint64_t seed);
Network build_vgg11(const Shape& input_shape, std::uint64_t seed);
/// Dispatches on `name` ("lenet" or "vgg11").
Network build_model(const std::string& name, const Shape& input_shape, std::uint64_t seed);

struct FilterCounts {
  std::vector<std::size_t> active;
  std::vector<std::size_t> original;
  /// Removed / original, in percent.
  std::vector<double> layer_sparsity_pct;
  double total_sparsity_pct = 0.0;
  std::size_t total_active() const;
  std::size_t total_original() const;
};

FilterCounts count_active_filters(const KernelMask& mask);

}  // namespace fsprune
