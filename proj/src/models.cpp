#include "fsprune/models.hpp"

#include <numeric>
#include <stdexcept>

namespace fsprune {
namespace {

LayerSpec conv(std::size_t kernels, std::size_t size, std::size_t padding) {
  return {LayerKind::conv, kernels, size, 1, padding};
}
LayerSpec pool() { return {LayerKind::maxpool}; }
LayerSpec relu_layer() { return {LayerKind::relu}; }
LayerSpec flatten() { return {LayerKind::flatten}; }
LayerSpec fc(std::size_t outputs) { return {LayerKind::linear, outputs}; }

}  // namespace

ArchitectureSpec lenet_spec(const Shape& input_shape, std::size_t conv1, std::size_t conv2) {
  if (input_shape != Shape{1, 28, 28} && input_shape != Shape{3, 32, 32}) {
    throw ShapeError("lenet: unsupported input shape " + shape_string(input_shape) +
                     " (expected (1, 28, 28) or (3, 32, 32))");
  }
  return {"lenet",
          input_shape,
          {conv(conv1, 5, 0), pool(), conv(conv2, 5, 0), pool(), flatten(), fc(500), relu_layer(), fc(10)}};
}

ArchitectureSpec vgg11_spec(const Shape& input_shape) {
  if (input_shape != Shape{3, 32, 32}) {
    throw ShapeError("vgg11: unsupported input shape " + shape_string(input_shape) + " (expected (3, 32, 32))");
  }
  ArchitectureSpec spec{"vgg11", input_shape, {}};
  auto block = [&spec](std::size_t kernels) {
    spec.layers.push_back(conv(kernels, 3, 1));
    spec.layers.push_back(relu_layer());
  };
  block(64);
  spec.layers.push_back(pool());
  block(128);
  spec.layers.push_back(pool());
  block(256);
  block(256);
  spec.layers.push_back(pool());
  block(512);
  block(512);
  spec.layers.push_back(pool());
  block(512);
  block(512);
  spec.layers.push_back(pool());
  spec.layers.push_back(flatten());
  spec.layers.push_back(fc(10));
  return spec;
}

Network build_lenet(const Shape& input_shape, std::uint64_t seed) {
  Network net(lenet_spec(input_shape));
  initialize(net, seed);
  return net;
}

Network build_vgg11(const Shape& input_shape, std::uint64_t seed) {
  Network net(vgg11_spec(input_shape));
  initialize(net, seed);
  return net;
}

Network build_model(const std::string& name, const Shape& input_shape, std::uint64_t seed) {
  if (name == "lenet") return build_lenet(input_shape, seed);
  if (name == "vgg11") return build_vgg11(input_shape, seed);
  throw std::invalid_argument("unknown model '" + name + "'");
}

std::size_t FilterCounts::total_active() const { return std::accumulate(active.begin(), active.end(), std::size_t{0}); }

std::size_t FilterCounts::total_original() const {
  return std::accumulate(original.begin(), original.end(), std::size_t{0});
}

FilterCounts count_active_filters(const KernelMask& mask) {
  FilterCounts counts;
  for (std::size_t l = 0; l < mask.layer_count(); ++l) {
    const std::size_t orig = mask.kernel_count(l);
    const std::size_t act = mask.active_count(l);
    counts.active.push_back(act);
    counts.original.push_back(orig);
    counts.layer_sparsity_pct.push_back(100.0 * static_cast<double>(orig - act) / static_cast<double>(orig));
  }
  const std::size_t total = counts.total_original();
  counts.total_sparsity_pct =
      total == 0 ? 0.0 : 100.0 * static_cast<double>(total - counts.total_active()) / static_cast<double>(total);
  return counts;
}

}  // namespace fsprune
