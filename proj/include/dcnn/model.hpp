#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcnn/layers.hpp"

namespace dcnn {

/// Ordered CNN layer graph with parameters attached by layer name.
struct ModelGraph {
  std::string name;
  Shape input_shape;
  std::vector<LayerSpec> layers;
  std::map<std::string, LayerParams> params;

  int layer_count() const { return static_cast<int>(layers.size()); }

  /// Validates name uniqueness, end-to-end shape compatibility, and that
  /// parametric layers (and only those) carry correctly-shaped parameters.
  /// Fills the per-layer input shape cache used by input_shape_of().
  void validate();

  /// Input shape expected by layer i (0 = model input). validate() first.
  const Shape& input_shape_of(int layer) const;
  Shape final_output_shape() const;

  const LayerSpec& layer_by_name(const std::string& name) const;
  int layer_index(const std::string& name) const;

  /// Names of parametric layers in network order.
  std::vector<std::string> parametric_layer_names() const;
  std::size_t parameter_count() const;
  uint64_t params_hash() const;

private:
  std::vector<Shape> input_shapes_;  // per layer, plus final output at the end
};

/// Run layers [from_layer, to_layer] inclusive. forward(m, x, 0, L-1) is
/// full inference. Layer errors are rethrown with the layer name attached.
Tensor forward(const ModelGraph& model, const Tensor& input, int from_layer, int to_layer);
Tensor forward(const ModelGraph& model, const Tensor& input);

/// LeNet for 1x28x28 inputs: Conv1(6@5x5) - ReLU - MaxPool2 - Conv2(16@5x5,p1)
/// - ReLU - MaxPool2 - Conv3(120@5x5) - ReLU - Flatten - FC1(120->84) - ReLU
/// - FC2(84->10) - Softmax. Seeded He-uniform init, zero biases.
ModelGraph build_lenet(uint64_t seed = 42);

/// AlexNet-shaped graph (5 conv + 3 dense, 3x227x227 input). Used to show the
/// graph machinery generalizes; nothing here trains or evaluates it.
ModelGraph build_alexnet_shape(uint64_t seed = 1);

/// The slice of the model a single node is allowed to see: layer specs and
/// parameters for [from_layer, to_layer] only. An empty slice (to < from)
/// passes data through untouched.
struct ModelSlice {
  int from_layer = 0;
  int to_layer = -1;
  std::vector<LayerSpec> layers;
  std::map<std::string, LayerParams> params;

  bool empty() const { return to_layer < from_layer; }
};

ModelSlice slice_model(const ModelGraph& model, int from_layer, int to_layer);

}  // namespace dcnn
