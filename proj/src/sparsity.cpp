#include "fsprune/sparsity.hpp"

#include <cmath>
#include <stdexcept>

namespace fsprune {

std::size_t KernelNormVector::layer_end(std::size_t layer) const {
  return layer + 1 < layer_offsets.size() ? layer_offsets[layer + 1] : values.size();
}

std::string to_string(RegMode mode) {
  switch (mode) {
    case RegMode::none: return "none";
    case RegMode::l1: return "l1";
    case RegMode::l2: return "l2";
    case RegMode::ratio: return "ratio";
  }
  return "?";
}

RegMode reg_mode_from_string(const std::string& name) {
  for (RegMode m : {RegMode::none, RegMode::l1, RegMode::l2, RegMode::ratio}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown regularizer '" + name + "' (expected none, l1, l2 or ratio)");
}

double kernel_pseudo_norm(const ConvLayer& layer, std::size_t kernel) {
  if (kernel >= layer.kernel_count()) throw std::out_of_range("kernel index out of range");
  const std::size_t volume = layer.kernel_volume();
  const double* w = layer.weights.data() + kernel * volume;
  double sum = 0.0;
  for (std::size_t i = 0; i < volume; ++i) sum += std::abs(w[i]);
  return sum / static_cast<double>(layer.kernel_count());
}

KernelNormVector build_norm_vector(const Network& network) {
  if (network.conv_count() == 0) throw std::invalid_argument("build_norm_vector: network has no conv layers");
  KernelNormVector nv;
  for (std::size_t l = 0; l < network.conv_count(); ++l) {
    const ConvLayer& conv = network.conv(l);
    nv.layer_offsets.push_back(nv.values.size());
    for (std::size_t k = 0; k < conv.kernel_count(); ++k) {
      nv.values.push_back(kernel_pseudo_norm(conv, k));
      nv.index.push_back({l, k});
    }
  }
  return nv;
}

double l1_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += std::abs(v);
  return sum;
}

double l2_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

namespace {

double nonzero_l2(const KernelNormVector& nv, const char* what) {
  const double l2 = l2_norm(nv.values);
  if (!(l2 > 0.0)) throw DegenerateNetworkError(std::string(what) + ": kernel norm vector is all zero");
  return l2;
}

}  // namespace

double ratio_loss(const KernelNormVector& nv) { return l1_norm(nv.values) / nonzero_l2(nv, "ratio_loss"); }

double l1_reg(const KernelNormVector& nv) { return l1_norm(nv.values); }

double l2_reg(const KernelNormVector& nv) { return l2_norm(nv.values); }

std::vector<double> ratio_loss_norm_gradient(const KernelNormVector& nv) {
  const double l2 = nonzero_l2(nv, "ratio_loss_gradient");
  const double l1 = l1_norm(nv.values);
  const double l2_cubed = l2 * l2 * l2;
  std::vector<double> grad(nv.size());
  for (std::size_t i = 0; i < nv.size(); ++i) grad[i] = 1.0 / l2 - l1 * nv.values[i] / l2_cubed;
  return grad;
}

std::vector<double> l1_reg_norm_gradient(const KernelNormVector& nv) { return std::vector<double>(nv.size(), 1.0); }

std::vector<double> l2_reg_norm_gradient(const KernelNormVector& nv) {
  const double l2 = nonzero_l2(nv, "l2_reg_gradient");
  std::vector<double> grad(nv.size());
  for (std::size_t i = 0; i < nv.size(); ++i) grad[i] = nv.values[i] / l2;
  return grad;
}

std::vector<Tensor> chain_norm_gradient(const Network& network, const KernelNormVector& nv,
                                        std::span<const double> norm_grad, const KernelMask* mask) {
  if (norm_grad.size() != nv.size() || nv.layer_count() != network.conv_count()) {
    throw ShapeError("chain_norm_gradient: norm vector does not match the network");
  }
  if (mask && !mask->matches(network)) throw ShapeError("chain_norm_gradient: mask does not match the network");
  std::vector<Tensor> grads;
  for (std::size_t l = 0; l < network.conv_count(); ++l) {
    const ConvLayer& conv = network.conv(l);
    if (nv.layer_end(l) - nv.layer_begin(l) != conv.kernel_count()) {
      throw ShapeError("chain_norm_gradient: layer block size differs from kernel count");
    }
    Tensor g(conv.weights.shape());
    const std::size_t volume = conv.kernel_volume();
    const double inv_kernels = 1.0 / static_cast<double>(conv.kernel_count());
    for (std::size_t k = 0; k < conv.kernel_count(); ++k) {
      if (mask && !mask->is_active(l, k)) continue;
      const double scale = norm_grad[nv.layer_begin(l) + k] * inv_kernels;
      const double* w = conv.weights.data() + k * volume;
      double* out = g.data() + k * volume;
      for (std::size_t i = 0; i < volume; ++i) {
        out[i] = w[i] > 0.0 ? scale : (w[i] < 0.0 ? -scale : 0.0);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<Tensor> ratio_loss_gradient(const Network& network, const KernelNormVector& nv, const KernelMask* mask) {
  return chain_norm_gradient(network, nv, ratio_loss_norm_gradient(nv), mask);
}

std::vector<Tensor> l1_reg_gradient(const Network& network, const KernelNormVector& nv, const KernelMask* mask) {
  return chain_norm_gradient(network, nv, l1_reg_norm_gradient(nv), mask);
}

std::vector<Tensor> l2_reg_gradient(const Network& network, const KernelNormVector& nv, const KernelMask* mask) {
  return chain_norm_gradient(network, nv, l2_reg_norm_gradient(nv), mask);
}

double regularizer_value(RegMode mode, const KernelNormVector& nv) {
  switch (mode) {
    case RegMode::l1: return l1_reg(nv);
    case RegMode::l2: return l2_reg(nv);
    case RegMode::none:
    case RegMode::ratio: return ratio_loss(nv);
  }
  return 0.0;
}

std::vector<Tensor> regularizer_gradient(RegMode mode, const Network& network, const KernelNormVector& nv,
                                         const KernelMask* mask) {
  switch (mode) {
    case RegMode::none: return {};
    case RegMode::l1: return l1_reg_gradient(network, nv, mask);
    case RegMode::l2: return l2_reg_gradient(network, nv, mask);
    case RegMode::ratio: return ratio_loss_gradient(network, nv, mask);
  }
  return {};
}

double combined_loss(double task_loss, double reg_value, const RegularizerConfig& config) {
  if (config.lambda < 0.0) throw std::invalid_argument("regularizer lambda must be non-negative");
  return task_loss + config.effective_lambda() * reg_value;
}

}  // namespace fsprune
