#include "dcnn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace dcnn {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::AvgPool2D: return "AvgPool2D";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Softmax: return "Softmax";
  }
  return "?";
}

LayerKind layer_kind_from_name(const std::string& s) {
  if (s == "Conv2D") return LayerKind::Conv2D;
  if (s == "MaxPool2D") return LayerKind::MaxPool2D;
  if (s == "AvgPool2D") return LayerKind::AvgPool2D;
  if (s == "ReLU") return LayerKind::ReLU;
  if (s == "Flatten") return LayerKind::Flatten;
  if (s == "Dense") return LayerKind::Dense;
  if (s == "Softmax") return LayerKind::Softmax;
  throw std::invalid_argument("unknown layer kind '" + s + "'");
}

bool layer_has_params(LayerKind k) {
  return k == LayerKind::Conv2D || k == LayerKind::Dense;
}

LayerSpec LayerSpec::conv2d(std::string name, int out_ch, int in_ch, int k, int stride,
                            int padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.name = std::move(name);
  s.out_channels = out_ch;
  s.in_channels = in_ch;
  s.kernel = k;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::maxpool(std::string name, int k, int stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2D;
  s.name = std::move(name);
  s.kernel = k;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::avgpool(std::string name, int k, int stride) {
  LayerSpec s;
  s.kind = LayerKind::AvgPool2D;
  s.name = std::move(name);
  s.kernel = k;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::ReLU;
  s.name = std::move(name);
  return s;
}

LayerSpec LayerSpec::flatten(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.name = std::move(name);
  return s;
}

LayerSpec LayerSpec::dense(std::string name, int out_dim, int in_dim) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.name = std::move(name);
  s.out_dim = out_dim;
  s.in_dim = in_dim;
  return s;
}

LayerSpec LayerSpec::softmax(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  s.name = std::move(name);
  return s;
}

static void require_chw(const Shape& s, const char* op) {
  if (s.size() != 3) {
    throw ShapeError(std::string(op) + " expects a CxHxW input, got " + shape_str(s));
  }
}

Shape output_shape(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::Conv2D: {
      require_chw(input, "conv2d");
      if (input[0] != spec.in_channels) {
        throw ShapeError("conv2d '" + spec.name + "' input channels " +
                         std::to_string(input[0]) + " do not match weight channels " +
                         std::to_string(spec.in_channels));
      }
      if (spec.stride < 1 || spec.padding < 0 || spec.kernel < 1) {
        throw ShapeError("conv2d '" + spec.name + "' bad hyperparams");
      }
      int h = input[1] + 2 * spec.padding;
      int w = input[2] + 2 * spec.padding;
      if (h < spec.kernel || w < spec.kernel) {
        throw ShapeError("conv2d '" + spec.name + "' kernel " + std::to_string(spec.kernel) +
                         " larger than padded input " + shape_str(input));
      }
      return {spec.out_channels, (h - spec.kernel) / spec.stride + 1,
              (w - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: {
      require_chw(input, "pool2d");
      if (spec.kernel < 1 || spec.stride < 1) {
        throw ShapeError("pool '" + spec.name + "' bad hyperparams");
      }
      if (input[1] < spec.kernel || input[2] < spec.kernel) {
        throw ShapeError("pool '" + spec.name + "' window " + std::to_string(spec.kernel) +
                         " larger than input " + shape_str(input));
      }
      return {input[0], (input[1] - spec.kernel) / spec.stride + 1,
              (input[2] - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::ReLU:
      return input;
    case LayerKind::Flatten:
      return {static_cast<int>(shape_elems(input))};
    case LayerKind::Dense: {
      if (input.size() != 1 || input[0] != spec.in_dim) {
        throw ShapeError("dense '" + spec.name + "' expects [" + std::to_string(spec.in_dim) +
                         "], got " + shape_str(input));
      }
      return {spec.out_dim};
    }
    case LayerKind::Softmax: {
      if (input.size() != 1) {
        throw ShapeError("softmax '" + spec.name + "' expects a 1-D input, got " +
                         shape_str(input));
      }
      return input;
    }
  }
  throw ShapeError("unreachable layer kind");
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
              int padding) {
  if (input.shape.size() != 3) {
    throw ShapeError("conv2d input must be CxHxW, got " + shape_str(input.shape));
  }
  if (weights.shape.size() != 4 || weights.shape[2] != weights.shape[3]) {
    throw ShapeError("conv2d weights must be [C_out,C_in,K,K], got " + shape_str(weights.shape));
  }
  const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
  const int c_out = weights.shape[0], k = weights.shape[2];
  if (weights.shape[1] != c_in) {
    throw ShapeError("conv2d input channels " + shape_str(input.shape) +
                     " do not match weight channels " + shape_str(weights.shape));
  }
  if (bias.shape != Shape{c_out}) {
    throw ShapeError("conv2d bias must be [" + std::to_string(c_out) + "], got " +
                     shape_str(bias.shape));
  }
  if (stride < 1 || padding < 0 || h + 2 * padding < k || w + 2 * padding < k) {
    throw ShapeError("conv2d bad stride/padding for input " + shape_str(input.shape));
  }

  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  Tensor out({c_out, oh, ow});

  for (int o = 0; o < c_out; ++o) {
    const float b = bias.data[o];
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = b;
        for (int c = 0; c < c_in; ++c) {
          const float* in_c = input.data.data() + static_cast<std::size_t>(c) * h * w;
          const float* w_oc =
              weights.data.data() + (static_cast<std::size_t>(o) * c_in + c) * k * k;
          for (int u = 0; u < k; ++u) {
            const int y = i * stride + u - padding;
            if (y < 0 || y >= h) continue;
            for (int v = 0; v < k; ++v) {
              const int x = j * stride + v - padding;
              if (x < 0 || x >= w) continue;
              acc += static_cast<double>(in_c[y * w + x]) * w_oc[u * k + v];
            }
          }
        }
        out.data[(static_cast<std::size_t>(o) * oh + i) * ow + j] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

template <bool kMax>
static Tensor pool2d(const Tensor& input, int k, int stride) {
  if (input.shape.size() != 3) {
    throw ShapeError("pool2d input must be CxHxW, got " + shape_str(input.shape));
  }
  const int c = input.shape[0], h = input.shape[1], w = input.shape[2];
  if (k < 1 || stride < 1 || h < k || w < k) {
    throw ShapeError("pool2d window " + std::to_string(k) + " larger than input " +
                     shape_str(input.shape));
  }
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    const float* in_c = input.data.data() + static_cast<std::size_t>(ch) * h * w;
    float* out_c = out.data.data() + static_cast<std::size_t>(ch) * oh * ow;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        if constexpr (kMax) {
          float m = in_c[(i * stride) * w + j * stride];
          for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
              m = std::max(m, in_c[(i * stride + u) * w + (j * stride + v)]);
            }
          }
          out_c[i * ow + j] = m;
        } else {
          double acc = 0.0;
          for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
              acc += in_c[(i * stride + u) * w + (j * stride + v)];
            }
          }
          out_c[i * ow + j] = static_cast<float>(acc / (k * k));
        }
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, int k, int stride) { return pool2d<true>(input, k, stride); }
Tensor avgpool2d(const Tensor& input, int k, int stride) { return pool2d<false>(input, k, stride); }

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data) v = std::max(v, 0.0f);
  return out;
}

Tensor softmax(const Tensor& input) {
  if (input.shape.size() != 1) {
    throw ShapeError("softmax expects a 1-D input, got " + shape_str(input.shape));
  }
  Tensor out(input.shape);
  float mx = input.data[0];
  for (float v : input.data) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    const double e = std::exp(static_cast<double>(input.data[i]) - mx);
    out.data[i] = static_cast<float>(e);
    sum += e;
  }
  for (float& v : out.data) v = static_cast<float>(v / sum);
  return out;
}

Tensor flatten(const Tensor& input) {
  return input.reshaped({static_cast<int>(input.size())});
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.shape.size() != 2) {
    throw ShapeError("dense weights must be [M,N], got " + shape_str(weights.shape));
  }
  const int m = weights.shape[0], n = weights.shape[1];
  if (input.shape != Shape{n}) {
    throw ShapeError("dense input " + shape_str(input.shape) + " does not match weights " +
                     shape_str(weights.shape));
  }
  if (bias.shape != Shape{m}) {
    throw ShapeError("dense bias " + shape_str(bias.shape) + " does not match weights " +
                     shape_str(weights.shape));
  }
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    const float* row = weights.data.data() + static_cast<std::size_t>(i) * n;
    double acc = bias.data[i];
    for (int j = 0; j < n; ++j) {
      acc += static_cast<double>(row[j]) * input.data[j];
    }
    out.data[i] = static_cast<float>(acc);
  }
  return out;
}

Tensor apply_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& input) {
  if (layer_has_params(spec.kind) && params == nullptr) {
    throw ShapeError("layer '" + spec.name + "' requires parameters");
  }
  switch (spec.kind) {
    case LayerKind::Conv2D:
      return conv2d(input, params->weights, params->bias, spec.stride, spec.padding);
    case LayerKind::MaxPool2D:
      return maxpool2d(input, spec.kernel, spec.stride);
    case LayerKind::AvgPool2D:
      return avgpool2d(input, spec.kernel, spec.stride);
    case LayerKind::ReLU:
      return relu(input);
    case LayerKind::Flatten:
      return flatten(input);
    case LayerKind::Dense:
      return dense(input, params->weights, params->bias);
    case LayerKind::Softmax:
      return softmax(input);
  }
  throw ShapeError("unreachable layer kind");
}

}  // namespace dcnn
