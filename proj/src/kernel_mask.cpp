#include "fsprune/kernel_mask.hpp"

#include <algorithm>

#include "fsprune/network.hpp"

namespace fsprune {

KernelMask::KernelMask(const std::vector<std::size_t>& kernels_per_layer) {
  for (std::size_t n : kernels_per_layer) active_.emplace_back(n, std::uint8_t{1});
}

KernelMask KernelMask::all_active(const Network& network) {
  return KernelMask(network.spec().conv_filter_counts());
}

std::size_t KernelMask::active_count(std::size_t layer) const {
  const auto& flags = active_.at(layer);
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

std::vector<std::size_t> KernelMask::active_counts() const {
  std::vector<std::size_t> counts;
  for (std::size_t l = 0; l < active_.size(); ++l) counts.push_back(active_count(l));
  return counts;
}
std::size_t KernelMask::active_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < active_.size(); ++l) total += active_count(l);
  return total;
}


bool KernelMask::matches(const Network& network) const {
  if (network.conv_count() != active_.size()) return false;
  for (std::size_t l = 0; l < active_.size(); ++l) {
    if (network.conv(l).kernel_count() != active_[l].size()) return false;
  }
  return true;
}

std::vector<FrozenMask> KernelMask::frozen_parameters(const Network& network) const {
  if (!matches(network)) throw ShapeError("kernel mask does not match the network's conv layers");
  std::vector<FrozenMask> frozen(network.parameters().size());
  for (std::size_t l = 0; l < active_.size(); ++l) {
    if (active_count(l) == active_[l].size()) continue;
    const ConvLayer& conv = network.conv(l);
    const std::size_t w = network.conv_weight_parameter(l);
    const std::size_t volume = conv.kernel_volume();
    FrozenMask weights(conv.weights.size(), 0);
    FrozenMask bias(conv.bias.size(), 0);
    for (std::size_t k = 0; k < active_[l].size(); ++k) {
      if (active_[l][k]) continue;
      std::fill_n(weights.begin() + static_cast<std::ptrdiff_t>(k * volume), volume, std::uint8_t{1});
      bias[k] = 1;
    }
    frozen[w] = std::move(weights);
    frozen[w + 1] = std::move(bias);
  }
  return frozen;
}

}  // namespace fsprune
