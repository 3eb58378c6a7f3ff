#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "fsprune/tensor.hpp"

namespace fsprune {

struct GradCheckReport {
  bool passed = true;
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  /// Position of the worst entry: which tensor of the list, and flat index.
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// dominating on round-off alone.
double gradient_relative_error(double analytic, double numeric, double floor = 1e-4);

/// Compares `analytic[i]` against central differences of `loss` taken on every
/// entry of `*inputs[i]`. Each entry is restored to its exact value afterwards.
/// `inputs` may mix layer parameters and layer inputs.
GradCheckReport gradient_check(std::span<Tensor* const> inputs, std::span<const Tensor> analytic,
                               const std::function<double()>& loss, double tolerance, double step = 1e-5);

}  // namespace fsprune
