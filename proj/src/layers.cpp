#include "fsprune/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace fsprune {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t kernels, kernel_h, kernel_w, stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kernel_h * kernel_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Tensor& input, const ConvLayer& layer) {
  if (input.rank() != 4) {
    throw ShapeError("conv2d: input must be NCHW, got " + shape_string(input.shape()));
  }
  require_shape(layer.bias, {layer.kernel_count()}, "conv2d bias");
  if (input.dim(1) != layer.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) + " channels, kernels expect " +
                     std::to_string(layer.in_channels()));
  }
  if (layer.stride == 0) throw ShapeError("conv2d: stride must be positive");
  ConvGeometry g{input.dim(0),          input.dim(1),       input.dim(2),   input.dim(3),
                 layer.kernel_count(),  layer.kernel_h(),   layer.kernel_w(), layer.stride,
                 layer.padding,         0,                  0};
  g.out_h = conv_output_extent(g.height, g.kernel_h, g.stride, g.padding);
  g.out_w = conv_output_extent(g.width, g.kernel_w, g.stride, g.padding);
  return g;
}

// Unrolls one sample into a (patch, out_plane) matrix.
void im2col(const double* image, const ConvGeometry& g, double* col) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = image + c * g.height * g.width;
    for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel_w; ++kw, ++row) {
        double* out = col + row * g.out_plane();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - pad;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - pad;
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(g.height) &&
                                iw < static_cast<std::ptrdiff_t>(g.width);
            out[oh * g.out_w + ow] = inside ? plane[ih * static_cast<std::ptrdiff_t>(g.width) + iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, const ConvGeometry& g, double* image) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = image + c * g.height * g.width;
    for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel_w; ++kw, ++row) {
        const double* in = col + row * g.out_plane();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - pad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - pad;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) continue;
            plane[ih * static_cast<std::ptrdiff_t>(g.width) + iw] += in[oh * g.out_w + ow];
          }
        }
      }
    }
  }
}

}  // namespace

ConvLayer::ConvLayer(std::size_t kernels, std::size_t channels, std::size_t kernel_h, std::size_t kernel_w,
                     std::size_t stride_, std::size_t padding_)
    : weights({kernels, channels, kernel_h, kernel_w}), bias({kernels}), stride(stride_), padding(padding_) {}

LinearLayer::LinearLayer(std::size_t in, std::size_t out) : weights({in, out}), bias({out}) {}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (in + 2 * padding < kernel) {
    throw ShapeError("conv2d: padded input extent " + std::to_string(in + 2 * padding) +
                     " is smaller than kernel extent " + std::to_string(kernel));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const ConvLayer& layer) {
  const ConvGeometry g = conv_geometry(input, layer);
  Tensor output({g.batch, g.kernels, g.out_h, g.out_w});
  std::vector<double> col(g.patch() * g.out_plane());
  ConstMatrixMap w(layer.weights.data(), g.kernels, g.patch());
  ConstMatrixMap colmat(col.data(), g.patch(), g.out_plane());
  const auto bias = Eigen::Map<const Eigen::VectorXd>(layer.bias.data(), g.kernels);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input.data() + n * g.channels * g.height * g.width, g, col.data());
    MatrixMap out(output.data() + n * g.kernels * g.out_plane(), g.kernels, g.out_plane());
    out.noalias() = w * colmat;
    out.colwise() += bias;
  }
  return output;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& upstream) {
  const ConvGeometry g = conv_geometry(input, layer);
  require_shape(upstream, {g.batch, g.kernels, g.out_h, g.out_w}, "conv2d backward upstream");
  ConvGrads grads{Tensor(input.shape()), Tensor(layer.weights.shape()), Tensor(layer.bias.shape())};
  std::vector<double> col(g.patch() * g.out_plane());
  ConstMatrixMap w(layer.weights.data(), g.kernels, g.patch());
  MatrixMap dw(grads.weights.data(), g.kernels, g.patch());
  MatrixMap colmat(col.data(), g.patch(), g.out_plane());
  auto db = Eigen::Map<Eigen::VectorXd>(grads.bias.data(), g.kernels);
  for (std::size_t n = 0; n < g.batch; ++n) {
    ConstMatrixMap dout(upstream.data() + n * g.kernels * g.out_plane(), g.kernels, g.out_plane());
    im2col(input.data() + n * g.channels * g.height * g.width, g, col.data());
    dw.noalias() += dout * colmat.transpose();
    db += dout.rowwise().sum();
    colmat.noalias() = w.transpose() * dout;
    col2im(col.data(), g, grads.input.data() + n * g.channels * g.height * g.width);
  }
  return grads;
}

PoolResult maxpool2(const Tensor& input) {
  if (input.rank() != 4) throw ShapeError("maxpool2: input must be NCHW, got " + shape_string(input.shape()));
  const std::size_t h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial dims must be even, got " + shape_string(input.shape()));
  }
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult result{Tensor({input.dim(0), input.dim(1), oh, ow}), {}};
  result.argmax.resize(result.output.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t top = base + 2 * y * w + 2 * x;
        const std::size_t candidates[4] = {top, top + 1, top + w, top + w + 1};
        std::size_t best = candidates[0];
        for (std::size_t c : candidates) {
          if (input[c] > input[best]) best = c;
        }
        const std::size_t o = (p * oh + y) * ow + x;
        result.output[o] = input[best];
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

Tensor maxpool2_backward(const Shape& input_shape, std::span<const std::size_t> argmax, const Tensor& upstream) {
  if (argmax.size() != upstream.size()) throw ShapeError("maxpool2 backward: argmax/upstream size mismatch");
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < upstream.size(); ++i) grad[argmax[i]] += upstream[i];
  return grad;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  require_shape(upstream, input.shape(), "relu backward upstream");
  Tensor grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > 0.0 ? upstream[i] : 0.0;
  return grad;
}

Tensor linear(const Tensor& input, const LinearLayer& layer) {
  if (input.rank() != 2 || input.dim(1) != layer.in_features()) {
    throw ShapeError("linear: input " + shape_string(input.shape()) + " incompatible with weights " +
                     shape_string(layer.weights.shape()));
  }
  require_shape(layer.bias, {layer.out_features()}, "linear bias");
  const std::size_t n = input.dim(0);
  Tensor output({n, layer.out_features()});
  ConstMatrixMap x(input.data(), n, layer.in_features());
  ConstMatrixMap w(layer.weights.data(), layer.in_features(), layer.out_features());
  MatrixMap y(output.data(), n, layer.out_features());
  y.noalias() = x * w;
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), layer.out_features());
  return output;
}

LinearGrads linear_backward(const Tensor& input, const LinearLayer& layer, const Tensor& upstream) {
  if (input.rank() != 2 || input.dim(1) != layer.in_features()) {
    throw ShapeError("linear backward: input " + shape_string(input.shape()) + " incompatible with weights " +
                     shape_string(layer.weights.shape()));
  }
  const std::size_t n = input.dim(0);
  require_shape(upstream, {n, layer.out_features()}, "linear backward upstream");
  LinearGrads grads{Tensor(input.shape()), Tensor(layer.weights.shape()), Tensor(layer.bias.shape())};
  ConstMatrixMap x(input.data(), n, layer.in_features());
  ConstMatrixMap w(layer.weights.data(), layer.in_features(), layer.out_features());
  ConstMatrixMap dy(upstream.data(), n, layer.out_features());
  MatrixMap(grads.input.data(), n, layer.in_features()).noalias() = dy * w.transpose();
  MatrixMap(grads.weights.data(), layer.in_features(), layer.out_features()).noalias() = x.transpose() * dy;
  Eigen::Map<Eigen::RowVectorXd>(grads.bias.data(), layer.out_features()) = dy.colwise().sum();
  return grads;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be (batch, classes)");
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  LossResult result{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    const double* row = logits.data() + i * classes;
    const double peak = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - peak);
    const double log_sum = peak + std::log(sum);
    result.loss += (log_sum - row[label]) * inv_n;
    double* g = result.grad.data() + i * classes;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(row[c] - log_sum);
      g[c] = (p - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) * inv_n;
    }
  }
  return result;
}

}  // namespace fsprune
