#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fsprune/tensor.hpp"

namespace fsprune {

/// Per-element freeze flags for one parameter tensor (1 = frozen).
/// An empty mask freezes nothing.
using FrozenMask = std::vector<std::uint8_t>;

enum class StoragePrecision { f64, f32 };

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  /// f32 rounds updated weights and velocities to single precision so that the
  /// checkpoint format (32-bit) reproduces them exactly.
  StoragePrecision storage = StoragePrecision::f64;
};

/// Gradients and momentum buffers parallel to a parameter list.
struct GradientStore {
  std::vector<Tensor> grads;
  std::vector<Tensor> momentum;

  GradientStore() = default;
  explicit GradientStore(std::span<const Tensor* const> params);

  void zero_grads();
};

/// v <- momentum * v + g;  w <- w - lr * v.
/// Frozen entries keep their exact bit pattern and get a zero velocity.
void sgd_momentum_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                       std::span<Tensor> momentum, const SgdOptions& options,
                       std::span<const FrozenMask> frozen = {});

}  // namespace fsprune
