#include "fsprune/optimizer.hpp"

#include <stdexcept>

namespace fsprune {

GradientStore::GradientStore(std::span<const Tensor* const> params) {
  grads.reserve(params.size());
  momentum.reserve(params.size());
  for (const Tensor* p : params) {
    grads.emplace_back(p->shape());
    momentum.emplace_back(p->shape());
  }
}

void GradientStore::zero_grads() {
  for (Tensor& g : grads) g.fill(0.0);
}

void sgd_momentum_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                       std::span<Tensor> momentum, const SgdOptions& options,
                       std::span<const FrozenMask> frozen) {
  if (!(options.lr > 0.0)) throw std::invalid_argument("sgd: learning rate must be positive");
  if (options.momentum < 0.0 || options.momentum >= 1.0) {
    throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
  }
  if (grads.size() != params.size() || momentum.size() != params.size()) {
    throw ShapeError("sgd: parameter, gradient and momentum lists differ in length");
  }
  if (!frozen.empty() && frozen.size() != params.size()) {
    throw ShapeError("sgd: frozen mask list differs in length from parameter list");
  }
  const bool round32 = options.storage == StoragePrecision::f32;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = grads[p];
    Tensor& v = momentum[p];
    require_shape(g, w.shape(), "sgd gradient");
    require_shape(v, w.shape(), "sgd momentum buffer");
    const FrozenMask* mask = frozen.empty() || frozen[p].empty() ? nullptr : &frozen[p];
    if (mask && mask->size() != w.size()) throw ShapeError("sgd: frozen mask size differs from parameter size");
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (mask && (*mask)[i]) {
        v[i] = 0.0;
        continue;
      }
      double vel = options.momentum * v[i] + g[i];
      double next = w[i] - options.lr * vel;
      if (round32) {
        vel = static_cast<float>(vel);
        next = static_cast<float>(next);
      }
      v[i] = vel;
      w[i] = next;
    }
  }
}

}  // namespace fsprune
