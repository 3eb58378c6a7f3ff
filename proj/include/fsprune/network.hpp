#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fsprune/layers.hpp"

namespace fsprune {

enum class LayerKind { conv, maxpool, relu, flatten, linear };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// One entry of an architecture. `outputs` is the kernel count for conv and
/// the feature count for linear; unused for the other kinds.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t outputs = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchitectureSpec {
  std::string name;
  /// Per-sample input shape (channels, height, width).
  Shape input_shape;
  std::vector<LayerSpec> layers;

  std::size_t conv_layer_count() const;
  std::vector<std::size_t> conv_filter_counts() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Per-sample output shape of every layer. Throws ShapeError when the chain
/// does not fit together.
std::vector<Shape> infer_shapes(const ArchitectureSpec& spec);

struct MaxPoolLayer {};
struct ReluLayer {};
struct FlattenLayer {};

using Layer = std::variant<ConvLayer, MaxPoolLayer, ReluLayer, FlattenLayer, LinearLayer>;

/// A sequential network with a fixed forward/backward call order.
class Network {
 public:
  /// Allocates zero-valued parameters for `spec`.
  explicit Network(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t conv_count() const { return conv_positions_.size(); }
  ConvLayer& conv(std::size_t index);
  const ConvLayer& conv(std::size_t index) const;

  /// Parameters in layer order: weights then bias for each conv/linear layer.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;
  /// Position in parameters() of conv layer `index`'s weights (its bias follows).
  std::size_t conv_weight_parameter(std::size_t index) const;

  struct Trace {
    std::vector<Tensor> inputs;  // input of every layer
    std::vector<std::vector<std::size_t>> argmax;
    Tensor output;
  };

  /// Logits for a (batch, C, H, W) input.
  Tensor forward(const Tensor& input) const;
  Trace forward_trace(const Tensor& input) const;
  /// Gradients parallel to parameters() for the upstream gradient on the output.
  std::vector<Tensor> backward(const Trace& trace, const Tensor& upstream) const;

 private:
  ArchitectureSpec spec_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> conv_positions_;
};

/// Uniform(-a, a) weights with a = sqrt(3 / fan_in), zero biases. Values are
/// single-precision representable. Deterministic in `seed`.
void initialize(Network& network, std::uint64_t seed);

}  // namespace fsprune
