#include "fsprune/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace fsprune {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::linear: return "linear";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::conv, LayerKind::maxpool, LayerKind::relu, LayerKind::flatten, LayerKind::linear}) {
    if (to_string(k) == name) return k;
  }
  throw FormatError("unknown layer kind '" + name + "'");
}

std::size_t ArchitectureSpec::conv_layer_count() const { return conv_filter_counts().size(); }

std::vector<std::size_t> ArchitectureSpec::conv_filter_counts() const {
  std::vector<std::size_t> counts;
  for (const LayerSpec& l : layers) {
    if (l.kind == LayerKind::conv) counts.push_back(l.outputs);
  }
  return counts;
}

std::vector<Shape> infer_shapes(const ArchitectureSpec& spec) {
  if (spec.input_shape.size() != 3) {
    throw ShapeError("architecture input must be (channels, height, width), got " + shape_string(spec.input_shape));
  }
  std::vector<Shape> shapes;
  Shape cur = spec.input_shape;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        if (cur.size() != 3) throw ShapeError("conv layer after flatten");
        if (l.outputs == 0 || l.kernel == 0 || l.stride == 0) throw ShapeError("conv layer with zero dimension");
        cur = {l.outputs, conv_output_extent(cur[1], l.kernel, l.stride, l.padding),
               conv_output_extent(cur[2], l.kernel, l.stride, l.padding)};
        break;
      case LayerKind::maxpool:
        if (cur.size() != 3 || cur[1] % 2 || cur[2] % 2) {
          throw ShapeError("maxpool2 needs even spatial dims, got " + shape_string(cur));
        }
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::relu:
        break;
      case LayerKind::flatten:
        cur = {shape_size(cur)};
        break;
      case LayerKind::linear:
        if (cur.size() != 1) throw ShapeError("linear layer needs a flattened input, got " + shape_string(cur));
        if (l.outputs == 0) throw ShapeError("linear layer with zero outputs");
        cur = {l.outputs};
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

Network::Network(ArchitectureSpec spec) : spec_(std::move(spec)) {
  const std::vector<Shape> shapes = infer_shapes(spec_);
  Shape in = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    switch (l.kind) {
      case LayerKind::conv:
        conv_positions_.push_back(layers_.size());
        layers_.emplace_back(ConvLayer(l.outputs, in[0], l.kernel, l.kernel, l.stride, l.padding));
        break;
      case LayerKind::maxpool: layers_.emplace_back(MaxPoolLayer{}); break;
      case LayerKind::relu: layers_.emplace_back(ReluLayer{}); break;
      case LayerKind::flatten: layers_.emplace_back(FlattenLayer{}); break;
      case LayerKind::linear: layers_.emplace_back(LinearLayer(in[0], l.outputs)); break;
    }
    in = shapes[i];
  }
}

ConvLayer& Network::conv(std::size_t index) { return std::get<ConvLayer>(layers_.at(conv_positions_.at(index))); }

const ConvLayer& Network::conv(std::size_t index) const {
  return std::get<ConvLayer>(layers_.at(conv_positions_.at(index)));
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (Layer& layer : layers_) {
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      out.push_back(&c->weights);
      out.push_back(&c->bias);
    } else if (auto* f = std::get_if<LinearLayer>(&layer)) {
      out.push_back(&f->weights);
      out.push_back(&f->bias);
    }
  }
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<Network*>(this)->parameters()) out.push_back(t);
  return out;
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> names;
  std::size_t conv_i = 0, fc_i = 0;
  for (const Layer& layer : layers_) {
    std::string prefix;
    if (std::holds_alternative<ConvLayer>(layer)) {
      prefix = "conv" + std::to_string(++conv_i);
    } else if (std::holds_alternative<LinearLayer>(layer)) {
      prefix = "fc" + std::to_string(++fc_i);
    } else {
      continue;
    }
    names.push_back(prefix + ".weight");
    names.push_back(prefix + ".bias");
  }
  return names;
}

std::size_t Network::conv_weight_parameter(std::size_t index) const {
  const std::size_t pos = conv_positions_.at(index);
  std::size_t param = 0;
  for (std::size_t i = 0; i < pos; ++i) {
    if (std::holds_alternative<ConvLayer>(layers_[i]) || std::holds_alternative<LinearLayer>(layers_[i])) param += 2;
  }
  return param;
}

Tensor Network::forward(const Tensor& input) const {
  Tensor x = input;
  for (const Layer& layer : layers_) {
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      x = conv2d(x, *c);
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      x = maxpool2(x).output;
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      x = relu(x);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      x = x.reshaped({x.dim(0), x.size() / x.dim(0)});
    } else {
      x = linear(x, std::get<LinearLayer>(layer));
    }
  }
  return x;
}

Network::Trace Network::forward_trace(const Tensor& input) const {
  Trace trace;
  trace.inputs.reserve(layers_.size());
  trace.argmax.resize(layers_.size());
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    trace.inputs.push_back(x);
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      x = conv2d(x, *c);
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      PoolResult pooled = maxpool2(x);
      trace.argmax[i] = std::move(pooled.argmax);
      x = std::move(pooled.output);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      x = relu(x);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      x = x.reshaped({x.dim(0), x.size() / x.dim(0)});
    } else {
      x = linear(x, std::get<LinearLayer>(layer));
    }
  }
  trace.output = std::move(x);
  return trace;
}

std::vector<Tensor> Network::backward(const Trace& trace, const Tensor& upstream) const {
  if (trace.inputs.size() != layers_.size()) throw std::logic_error("backward: trace does not match network");
  require_shape(upstream, trace.output.shape(), "network backward upstream");
  // Filled back to front, then reversed into parameter order.
  std::vector<Tensor> reversed;
  Tensor grad = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Layer& layer = layers_[i];
    const Tensor& in = trace.inputs[i];
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      ConvGrads g = conv2d_backward(in, *c, grad);
      reversed.push_back(std::move(g.bias));
      reversed.push_back(std::move(g.weights));
      grad = std::move(g.input);
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      grad = maxpool2_backward(in.shape(), trace.argmax[i], grad);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      grad = relu_backward(in, grad);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      grad = grad.reshaped(in.shape());
    } else {
      LinearGrads g = linear_backward(in, std::get<LinearLayer>(layer), grad);
      reversed.push_back(std::move(g.bias));
      reversed.push_back(std::move(g.weights));
      grad = std::move(g.input);
    }
  }
  return {std::make_move_iterator(reversed.rbegin()), std::make_move_iterator(reversed.rend())};
}

void initialize(Network& network, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double bound) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return static_cast<double>(static_cast<float>((2.0 * u - 1.0) * bound));
  };
  for (Layer& layer : network.layers()) {
    Tensor* weights = nullptr;
    Tensor* bias = nullptr;
    std::size_t fan_in = 0;
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      weights = &c->weights;
      bias = &c->bias;
      fan_in = c->kernel_volume();
    } else if (auto* f = std::get_if<LinearLayer>(&layer)) {
      weights = &f->weights;
      bias = &f->bias;
      fan_in = f->in_features();
    } else {
      continue;
    }
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (double& w : weights->values()) w = uniform(bound);
    bias->fill(0.0);
  }
}

}  // namespace fsprune
