#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fsprune/tensor.hpp"

namespace fsprune {

/// Convolution (cross-correlation, no kernel flip).
/// weights: (kernels, channels, kernel_h, kernel_w); bias: (kernels).
struct ConvLayer {
  Tensor weights;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  ConvLayer() = default;
  ConvLayer(std::size_t kernels, std::size_t channels, std::size_t kernel_h, std::size_t kernel_w,
            std::size_t stride = 1, std::size_t padding = 0);

  std::size_t kernel_count() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel_h() const { return weights.dim(2); }
  std::size_t kernel_w() const { return weights.dim(3); }
  /// Number of weights in one kernel (channels * kernel_h * kernel_w).
  std::size_t kernel_volume() const { return in_channels() * kernel_h() * kernel_w(); }
};

/// Affine map: weights (in_features, out_features), bias (out_features).
struct LinearLayer {
  Tensor weights;
  Tensor bias;

  LinearLayer() = default;
  LinearLayer(std::size_t in_features, std::size_t out_features);

  std::size_t in_features() const { return weights.dim(0); }
  std::size_t out_features() const { return weights.dim(1); }
};

struct ConvGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

struct LinearGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

/// Output spatial extent of a convolution; throws ShapeError when the padded
/// input is smaller than the kernel.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

Tensor conv2d(const Tensor& input, const ConvLayer& layer);
ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& upstream);

struct PoolResult {
  Tensor output;
  /// Flat input offset of the selected maximum for every output element.
  std::vector<std::size_t> argmax;
};

/// 2x2 max pooling with stride 2. Ties go to the first element in row-major order.
PoolResult maxpool2(const Tensor& input);
Tensor maxpool2_backward(const Shape& input_shape, std::span<const std::size_t> argmax, const Tensor& upstream);

Tensor relu(const Tensor& input);
/// Masks `upstream` by (input > 0); the subgradient at exactly zero is zero.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

Tensor linear(const Tensor& input, const LinearLayer& layer);
LinearGrads linear_backward(const Tensor& input, const LinearLayer& layer, const Tensor& upstream);

struct LossResult {
  double loss = 0.0;
  /// d(mean loss)/d(logits).
  Tensor grad;
};

/// Mean softmax cross-entropy over the batch, using log-sum-exp for stability.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace fsprune
