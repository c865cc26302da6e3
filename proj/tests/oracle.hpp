// Test-only reference implementations, independent of the library's forward
// path: straightforward nested loops in double precision. Used to generate
// expected values and as the target of finite-difference gradient checks.
#pragma once

#include <cmath>
#include <vector>

#include "dcnn/model.hpp"

namespace oracle {

using dcnn::LayerKind;
using dcnn::LayerSpec;
using dcnn::ModelGraph;
using dcnn::Shape;
using dcnn::Tensor;

using DVec = std::vector<double>;

inline DVec to_double(const Tensor& t) {
  return DVec(t.data.begin(), t.data.end());
}

inline DVec conv2d_ref(const DVec& in, int c_in, int h, int w, const DVec& weights,
                       const DVec& bias, int c_out, int k, int stride, int padding) {
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  DVec out(static_cast<std::size_t>(c_out) * oh * ow, 0.0);
  for (int o = 0; o < c_out; ++o) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (int c = 0; c < c_in; ++c) {
          for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
              const int y = i * stride + u - padding;
              const int x = j * stride + v - padding;
              if (y < 0 || y >= h || x < 0 || x >= w) continue;
              acc += in[(static_cast<std::size_t>(c) * h + y) * w + x] *
                     weights[((static_cast<std::size_t>(o) * c_in + c) * k + u) * k + v];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * oh + i) * ow + j] = acc;
      }
    }
  }
  return out;
}

inline DVec pool2d_ref(const DVec& in, int c, int h, int w, int k, int stride, bool is_max) {
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  DVec out(static_cast<std::size_t>(c) * oh * ow, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = is_max ? -1e300 : 0.0;
        for (int u = 0; u < k; ++u) {
          for (int v = 0; v < k; ++v) {
            const double val =
                in[(static_cast<std::size_t>(ch) * h + i * stride + u) * w + j * stride + v];
            acc = is_max ? std::max(acc, val) : acc + val;
          }
        }
        out[(static_cast<std::size_t>(ch) * oh + i) * ow + j] = is_max ? acc : acc / (k * k);
      }
    }
  }
  return out;
}

inline DVec dense_ref(const DVec& in, const DVec& weights, const DVec& bias, int m, int n) {
  DVec out(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = bias[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      acc += weights[static_cast<std::size_t>(i) * n + j] * in[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

inline DVec softmax_ref(const DVec& in) {
  double mx = in[0];
  for (double v : in) mx = std::max(mx, v);
  DVec out(in.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

/// Full-model forward in double precision from the model's float32
/// parameters. Shapes are taken from the validated graph.
inline DVec forward_ref(const ModelGraph& model, const Tensor& input) {
  DVec cur = to_double(input);
  for (int i = 0; i < model.layer_count(); ++i) {
    const LayerSpec& l = model.layers[static_cast<std::size_t>(i)];
    const Shape& in_shape = model.input_shape_of(i);
    switch (l.kind) {
      case LayerKind::Conv2D: {
        const auto& p = model.params.at(l.name);
        cur = conv2d_ref(cur, in_shape[0], in_shape[1], in_shape[2], to_double(p.weights),
                         to_double(p.bias), l.out_channels, l.kernel, l.stride, l.padding);
        break;
      }
      case LayerKind::MaxPool2D:
        cur = pool2d_ref(cur, in_shape[0], in_shape[1], in_shape[2], l.kernel, l.stride, true);
        break;
      case LayerKind::AvgPool2D:
        cur = pool2d_ref(cur, in_shape[0], in_shape[1], in_shape[2], l.kernel, l.stride, false);
        break;
      case LayerKind::ReLU:
        for (double& v : cur) v = std::max(v, 0.0);
        break;
      case LayerKind::Flatten:
        break;  // row-major order is already flat
      case LayerKind::Dense: {
        const auto& p = model.params.at(l.name);
        cur = dense_ref(cur, to_double(p.weights), to_double(p.bias), l.out_dim, l.in_dim);
        break;
      }
      case LayerKind::Softmax:
        cur = softmax_ref(cur);
        break;
    }
  }
  return cur;
}

/// Mean cross-entropy over a batch, computed against the double forward.
inline double batch_loss_ref(const ModelGraph& model, const std::vector<Tensor>& images,
                             const std::vector<int>& labels) {
  double loss = 0.0;
  for (std::size_t s = 0; s < images.size(); ++s) {
    const DVec probs = forward_ref(model, images[s]);
    loss += -std::log(probs[static_cast<std::size_t>(labels[s])]);
  }
  return loss / static_cast<double>(images.size());
}

}  // namespace oracle
