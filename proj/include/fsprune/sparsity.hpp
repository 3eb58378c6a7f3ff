#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fsprune/kernel_mask.hpp"
#include "fsprune/network.hpp"

namespace fsprune {

struct KernelIndex {
  std::size_t layer = 0;
  std::size_t kernel = 0;
  friend bool operator==(const KernelIndex&, const KernelIndex&) = default;
  friend auto operator<=>(const KernelIndex&, const KernelIndex&) = default;
};

/// Concatenated per-kernel pseudo-norms of all conv layers, in layer order.
struct KernelNormVector {
  std::vector<double> values;
  std::vector<KernelIndex> index;
  /// Start of each layer's block in `values`.
  std::vector<std::size_t> layer_offsets;

  std::size_t size() const { return values.size(); }
  std::size_t layer_count() const { return layer_offsets.size(); }
  std::size_t layer_begin(std::size_t layer) const { return layer_offsets.at(layer); }
  std::size_t layer_end(std::size_t layer) const;
};

enum class RegMode { none, l1, l2, ratio };

std::string to_string(RegMode mode);
RegMode reg_mode_from_string(const std::string& name);

struct RegularizerConfig {
  RegMode mode = RegMode::none;
  double lambda = 0.0;

  /// The weight actually applied: 0 when mode is none.
  double effective_lambda() const { return mode == RegMode::none ? 0.0 : lambda; }

  friend bool operator==(const RegularizerConfig&, const RegularizerConfig&) = default;
};

/// Sum of |w| over the kernel, divided by the layer's kernel count. Bias excluded.
double kernel_pseudo_norm(const ConvLayer& layer, std::size_t kernel);

/// Throws std::invalid_argument for a network without conv layers.
KernelNormVector build_norm_vector(const Network& network);

double l1_norm(std::span<const double> values);
double l2_norm(std::span<const double> values);

/// ||N||_1 / ||N||_2. Throws DegenerateNetworkError for an all-zero vector.
double ratio_loss(const KernelNormVector& nv);
double l1_reg(const KernelNormVector& nv);
double l2_reg(const KernelNormVector& nv);

/// d(loss)/d(n_k) for each entry of the norm vector.
std::vector<double> ratio_loss_norm_gradient(const KernelNormVector& nv);
std::vector<double> l1_reg_norm_gradient(const KernelNormVector& nv);
std::vector<double> l2_reg_norm_gradient(const KernelNormVector& nv);

/// Chains d(loss)/d(n) through the pseudo-norm: dL/dW = dL/dn_k * sign(W) / N_k,
/// with sign(0) = 0. Returns one tensor per conv layer, shaped like its
/// weights. Frozen kernels (when a mask is given) get exactly zero.
std::vector<Tensor> chain_norm_gradient(const Network& network, const KernelNormVector& nv,
                                        std::span<const double> norm_grad, const KernelMask* mask = nullptr);

std::vector<Tensor> ratio_loss_gradient(const Network& network, const KernelNormVector& nv,
                                        const KernelMask* mask = nullptr);
std::vector<Tensor> l1_reg_gradient(const Network& network, const KernelNormVector& nv,
                                    const KernelMask* mask = nullptr);
std::vector<Tensor> l2_reg_gradient(const Network& network, const KernelNormVector& nv,
                                    const KernelMask* mask = nullptr);

/// Value of the configured regularizer. Mode none reports the ratio loss so
/// that the sparsity measure is tracked in unregularized runs as well.
double regularizer_value(RegMode mode, const KernelNormVector& nv);
/// Gradient of the configured regularizer (unweighted). Empty for mode none.
std::vector<Tensor> regularizer_gradient(RegMode mode, const Network& network, const KernelNormVector& nv,
                                         const KernelMask* mask = nullptr);

/// task_loss + lambda * reg_value, lambda taken from config.effective_lambda().
double combined_loss(double task_loss, double reg_value, const RegularizerConfig& config);

}  // namespace fsprune
