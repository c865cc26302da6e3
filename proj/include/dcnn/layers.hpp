#pragma once

#include "dcnn/tensor.hpp"

namespace dcnn {

enum class LayerKind { Conv2D, MaxPool2D, AvgPool2D, ReLU, Flatten, Dense, Softmax };

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& s);
bool layer_has_params(LayerKind k);

/// Static description of one layer. Hyperparameter fields are meaningful
/// only for the kinds that use them.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::string name;
  // Conv2D
  int out_channels = 0;
  int in_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  // Dense
  int out_dim = 0;
  int in_dim = 0;

  static LayerSpec conv2d(std::string name, int out_ch, int in_ch, int k, int stride = 1,
                          int padding = 0);
  static LayerSpec maxpool(std::string name, int k, int stride);
  static LayerSpec avgpool(std::string name, int k, int stride);
  static LayerSpec relu(std::string name);
  static LayerSpec flatten(std::string name);
  static LayerSpec dense(std::string name, int out_dim, int in_dim);
  static LayerSpec softmax(std::string name);
};

/// Deterministic output shape for a given input shape; throws ShapeError on
/// incompatible input.
Shape output_shape(const LayerSpec& spec, const Shape& input);

/// Weights and bias of one parametric layer. Conv2D: weights
/// [C_out,C_in,K,K], bias [C_out]. Dense: weights [M,N], bias [M].
struct LayerParams {
  Tensor weights;
  Tensor bias;
};

// Layer forward ops. Zero padding, floor division for pooled sizes,
// 64-bit accumulation inside the reductions.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
              int padding);
Tensor maxpool2d(const Tensor& input, int k, int stride);
Tensor avgpool2d(const Tensor& input, int k, int stride);
Tensor relu(const Tensor& input);
Tensor softmax(const Tensor& input);
Tensor flatten(const Tensor& input);
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Dispatch on spec.kind; params must be non-null exactly for parametric
/// kinds.
Tensor apply_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& input);

}  // namespace dcnn
