#include "fsprune/compact.hpp"

#include <algorithm>
#include <stdexcept>

namespace fsprune {

Network compact_network(const Network& network, const KernelMask& mask) {
  if (!mask.matches(network)) throw std::invalid_argument("export: mask does not match the network");
  for (std::size_t l = 0; l < network.conv_count(); ++l) {
    if (mask.active_count(l) == 0) throw std::invalid_argument("export: conv layer " + std::to_string(l + 1) + " has no active kernels");
    const ConvLayer& conv = network.conv(l);
    for (std::size_t k = 0; k < conv.kernel_count(); ++k) {
      if (mask.is_active(l, k)) continue;
      bool zero = conv.bias[k] == 0.0;
      for (std::size_t i = 0; i < conv.kernel_volume() && zero; ++i) zero = conv.weights[k * conv.kernel_volume() + i] == 0.0;
      if (!zero) {
        throw std::invalid_argument("export: inconsistent mask, frozen kernel " + std::to_string(k) + " of conv layer " +
                                    std::to_string(l + 1) + " is not zero");
      }
    }
  }

  const ArchitectureSpec& spec = network.spec();
  const std::vector<Shape> shapes = infer_shapes(spec);
  ArchitectureSpec out_spec = spec;
  std::vector<std::vector<std::size_t>> kept_in(spec.layers.size());
  std::vector<std::vector<std::size_t>> kept_out(spec.layers.size());

  // Kept indices of the current activation's channels (or features after flatten).
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < spec.input_shape[0]; ++c) kept.push_back(c);
  std::size_t conv_index = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    kept_in[i] = kept;
    switch (spec.layers[i].kind) {
      case LayerKind::conv: {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < spec.layers[i].outputs; ++k) {
          if (mask.is_active(conv_index, k)) out.push_back(k);
        }
        out_spec.layers[i].outputs = out.size();
        kept_out[i] = out;
        kept = std::move(out);
        ++conv_index;
        break;
      }
      case LayerKind::flatten: {
        const Shape& before = i == 0 ? spec.input_shape : shapes[i - 1];
        const std::size_t plane = before[1] * before[2];
        std::vector<std::size_t> features;
        for (std::size_t c : kept) {
          for (std::size_t s = 0; s < plane; ++s) features.push_back(c * plane + s);
        }
        kept = std::move(features);
        break;
      }
      case LayerKind::linear: {
        std::vector<std::size_t> all(spec.layers[i].outputs);
        for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
        kept = std::move(all);
        break;
      }
      default: break;
    }
  }

  Network out(out_spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& src = network.layers()[i];
    Layer& dst = out.layers()[i];
    if (const auto* c = std::get_if<ConvLayer>(&src)) {
      ConvLayer& d = std::get<ConvLayer>(dst);
      const std::vector<std::size_t>& in = kept_in[i];
      const std::size_t plane = c->kernel_h() * c->kernel_w();
      const std::vector<std::size_t>& outs = kept_out[i];
      for (std::size_t o = 0; o < outs.size(); ++o) {
        d.bias[o] = c->bias[outs[o]];
        for (std::size_t j = 0; j < in.size(); ++j) {
          const double* from = c->weights.data() + (outs[o] * c->in_channels() + in[j]) * plane;
          double* to = d.weights.data() + (o * in.size() + j) * plane;
          std::copy_n(from, plane, to);
        }
      }
    } else if (const auto* f = std::get_if<LinearLayer>(&src)) {
      LinearLayer& d = std::get<LinearLayer>(dst);
      const std::vector<std::size_t>& rows = kept_in[i];
      const std::size_t cols = f->out_features();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(f->weights.data() + rows[r] * cols, cols, d.weights.data() + r * cols);
      }
      d.bias = f->bias;
    }
  }
  return out;
}

Checkpoint export_pruned(const Checkpoint& checkpoint) {
  Network compact = compact_network(checkpoint.network, checkpoint.mask);
  KernelMask mask = KernelMask::all_active(compact);
  std::vector<Tensor> momentum;
  for (const Tensor* p : compact.parameters()) momentum.emplace_back(p->shape());
  return {std::move(compact), std::move(mask), std::move(momentum), checkpoint.config, checkpoint.history};
}

}  // namespace fsprune
