#include "dcnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dcnn {

namespace {

GradTensor grad_zeros(const Shape& s) {
  GradTensor g;
  g.shape = s;
  g.data.assign(shape_elems(s), 0.0);
  return g;
}

// d(input) of one layer given d(output), accumulating parameter gradients.
Tensor backward_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& input,
                      const Tensor& delta_out, LayerGrads* grads) {
  switch (spec.kind) {
    case LayerKind::ReLU: {
      Tensor dx(input.shape);
      for (std::size_t i = 0; i < input.size(); ++i) {
        dx.data[i] = input.data[i] > 0.0f ? delta_out.data[i] : 0.0f;
      }
      return dx;
    }
    case LayerKind::Flatten:
      return delta_out.reshaped(input.shape);
    case LayerKind::Dense: {
      const int m = spec.out_dim, n = spec.in_dim;
      Tensor dx({n});
      for (int i = 0; i < m; ++i) {
        const double d = delta_out.data[static_cast<std::size_t>(i)];
        grads->bias.data[static_cast<std::size_t>(i)] += d;
        double* gw = grads->weights.data.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) gw[j] += d * input.data[static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
          acc += static_cast<double>(params->weights.data[static_cast<std::size_t>(i) * n + j]) *
                 delta_out.data[static_cast<std::size_t>(i)];
        }
        dx.data[static_cast<std::size_t>(j)] = static_cast<float>(acc);
      }
      return dx;
    }
    case LayerKind::MaxPool2D: {
      const int c = input.shape[0], h = input.shape[1], w = input.shape[2];
      const int k = spec.kernel, s = spec.stride;
      const int oh = (h - k) / s + 1, ow = (w - k) / s + 1;
      Tensor dx(input.shape);
      for (int ch = 0; ch < c; ++ch) {
        const float* in_c = input.data.data() + static_cast<std::size_t>(ch) * h * w;
        float* dx_c = dx.data.data() + static_cast<std::size_t>(ch) * h * w;
        const float* d_c = delta_out.data.data() + static_cast<std::size_t>(ch) * oh * ow;
        for (int i = 0; i < oh; ++i) {
          for (int j = 0; j < ow; ++j) {
            // Route to the first maximum in window scan order, matching the
            // forward op's tie behavior.
            int by = i * s, bx = j * s;
            float best = in_c[by * w + bx];
            for (int u = 0; u < k; ++u) {
              for (int v = 0; v < k; ++v) {
                const float val = in_c[(i * s + u) * w + (j * s + v)];
                if (val > best) {
                  best = val;
                  by = i * s + u;
                  bx = j * s + v;
                }
              }
            }
            dx_c[by * w + bx] += d_c[i * ow + j];
          }
        }
      }
      return dx;
    }
    case LayerKind::AvgPool2D: {
      const int c = input.shape[0], h = input.shape[1], w = input.shape[2];
      const int k = spec.kernel, s = spec.stride;
      const int oh = (h - k) / s + 1, ow = (w - k) / s + 1;
      const float inv = 1.0f / static_cast<float>(k * k);
      Tensor dx(input.shape);
      for (int ch = 0; ch < c; ++ch) {
        float* dx_c = dx.data.data() + static_cast<std::size_t>(ch) * h * w;
        const float* d_c = delta_out.data.data() + static_cast<std::size_t>(ch) * oh * ow;
        for (int i = 0; i < oh; ++i) {
          for (int j = 0; j < ow; ++j) {
            const float d = d_c[i * ow + j] * inv;
            for (int u = 0; u < k; ++u) {
              for (int v = 0; v < k; ++v) {
                dx_c[(i * s + u) * w + (j * s + v)] += d;
              }
            }
          }
        }
      }
      return dx;
    }
    case LayerKind::Conv2D: {
      const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
      const int c_out = spec.out_channels, k = spec.kernel;
      const int s = spec.stride, p = spec.padding;
      const int oh = (h + 2 * p - k) / s + 1, ow = (w + 2 * p - k) / s + 1;
      Tensor dx(input.shape);
      std::vector<double> dx_acc(input.size(), 0.0);
      for (int o = 0; o < c_out; ++o) {
        const float* d_o = delta_out.data.data() + static_cast<std::size_t>(o) * oh * ow;
        double db = 0.0;
        for (int i = 0; i < oh * ow; ++i) db += d_o[i];
        grads->bias.data[static_cast<std::size_t>(o)] += db;
        for (int c = 0; c < c_in; ++c) {
          const float* in_c = input.data.data() + static_cast<std::size_t>(c) * h * w;
          const float* w_oc =
              params->weights.data.data() + (static_cast<std::size_t>(o) * c_in + c) * k * k;
          double* gw_oc =
              grads->weights.data.data() + (static_cast<std::size_t>(o) * c_in + c) * k * k;
          double* dx_c = dx_acc.data() + static_cast<std::size_t>(c) * h * w;
          for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
              const double d = d_o[i * ow + j];
              if (d == 0.0) continue;
              for (int u = 0; u < k; ++u) {
                const int y = i * s + u - p;
                if (y < 0 || y >= h) continue;
                for (int v = 0; v < k; ++v) {
                  const int x = j * s + v - p;
                  if (x < 0 || x >= w) continue;
                  gw_oc[u * k + v] += d * in_c[y * w + x];
                  dx_c[y * w + x] += d * w_oc[u * k + v];
                }
              }
            }
          }
        }
      }
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] = static_cast<float>(dx_acc[i]);
      return dx;
    }
    case LayerKind::Softmax:
      throw TrainError("softmax backward is only supported fused with cross-entropy at the "
                       "final layer");
  }
  throw TrainError("unreachable layer kind");
}

// Stable -log p[label] from the logits, in double.
double cross_entropy_from_logits(const Tensor& logits, int label) {
  double mx = logits.data[0];
  for (float v : logits.data) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (float v : logits.data) sum += std::exp(static_cast<double>(v) - mx);
  return std::log(sum) - (static_cast<double>(logits.data[static_cast<std::size_t>(label)]) - mx);
}

}  // namespace

BatchGradients backprop_batch(const ModelGraph& model, const std::vector<Tensor>& images,
                              const std::vector<int>& labels) {
  if (images.size() != labels.size() || images.empty()) {
    throw TrainError("backprop batch needs matching, nonempty images/labels");
  }
  const int layer_n = model.layer_count();
  if (layer_n < 2 || model.layers.back().kind != LayerKind::Softmax) {
    throw TrainError("training requires a Softmax final layer");
  }

  BatchGradients out;
  for (const auto& [name, p] : model.params) {
    out.by_layer[name] = {grad_zeros(p.weights.shape), grad_zeros(p.bias.shape)};
  }

  const double inv_batch = 1.0 / static_cast<double>(images.size());
  for (std::size_t s = 0; s < images.size(); ++s) {
    // Forward, caching the input of every layer.
    std::vector<Tensor> acts;
    acts.reserve(static_cast<std::size_t>(layer_n) + 1);
    acts.push_back(images[s]);
    for (int i = 0; i < layer_n; ++i) {
      const LayerSpec& spec = model.layers[static_cast<std::size_t>(i)];
      const LayerParams* p = layer_has_params(spec.kind) ? &model.params.at(spec.name) : nullptr;
      acts.push_back(apply_layer(spec, p, acts.back()));
    }

    const Tensor& probs = acts.back();
    const Tensor& logits = acts[static_cast<std::size_t>(layer_n) - 1];
    const int label = labels[s];
    if (label < 0 || label >= static_cast<int>(probs.size())) {
      throw TrainError("label " + std::to_string(label) + " out of range for " +
                       std::to_string(probs.size()) + " classes");
    }
    out.mean_loss += cross_entropy_from_logits(logits, label) * inv_batch;

    // Fused softmax + cross-entropy gradient at the logits.
    Tensor delta(logits.shape);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      delta.data[i] = static_cast<float>(
          (static_cast<double>(probs.data[i]) - (static_cast<int>(i) == label ? 1.0 : 0.0)) *
          inv_batch);
    }

    for (int i = layer_n - 2; i >= 0; --i) {
      const LayerSpec& spec = model.layers[static_cast<std::size_t>(i)];
      const LayerParams* p = layer_has_params(spec.kind) ? &model.params.at(spec.name) : nullptr;
      LayerGrads* g = p ? &out.by_layer.at(spec.name) : nullptr;
      delta = backward_layer(spec, p, acts[static_cast<std::size_t>(i)], delta, g);
    }
  }
  return out;
}

namespace {

void sgd_update(ModelGraph& model, const BatchGradients& grads, float lr) {
  for (auto& [name, p] : model.params) {
    const LayerGrads& g = grads.by_layer.at(name);
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      p.weights.data[i] =
          static_cast<float>(p.weights.data[i] - static_cast<double>(lr) * g.weights.data[i]);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      p.bias.data[i] =
          static_cast<float>(p.bias.data[i] - static_cast<double>(lr) * g.bias.data[i]);
    }
  }
}

}  // namespace

ModelGraph train(ModelGraph model, const Dataset& train_set, const TrainOptions& opt,
                 TrainLog* log) {
  if (train_set.size() == 0) throw TrainError("empty training set");
  if (opt.lr < 0.0f) throw TrainError("negative learning rate");
  if (opt.batch < 1) throw TrainError("batch size must be >= 1");
  model.validate();

  std::mt19937_64 eng(opt.seed);
  std::vector<int> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    // Fisher-Yates; std::shuffle's draw sequence is implementation-defined.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(eng() % i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    int batches = 0;
    for (int base = 0; base < train_set.size(); base += opt.batch) {
      const int bsz = std::min(opt.batch, train_set.size() - base);
      std::vector<Tensor> images;
      std::vector<int> labels;
      images.reserve(static_cast<std::size_t>(bsz));
      for (int i = 0; i < bsz; ++i) {
        const int idx = order[static_cast<std::size_t>(base + i)];
        images.push_back(train_set.image(idx));
        labels.push_back(train_set.labels[static_cast<std::size_t>(idx)]);
      }
      const BatchGradients grads = backprop_batch(model, images, labels);
      if (!std::isfinite(grads.mean_loss)) {
        throw TrainError("training diverged (loss not finite) at epoch " +
                         std::to_string(epoch) + ", batch " + std::to_string(batches));
      }
      sgd_update(model, grads, opt.lr);
      epoch_loss += grads.mean_loss;
      ++batches;
    }
    if (log) log->epoch_mean_loss.push_back(epoch_loss / std::max(batches, 1));
  }
  return model;
}

double evaluate(const ModelGraph& model, const Dataset& test_set) {
  if (test_set.size() == 0) throw TrainError("cannot evaluate on an empty dataset");
  const Shape out_shape = model.final_output_shape();
  const int classes = static_cast<int>(shape_elems(out_shape));
  const int max_label = *std::max_element(test_set.labels.begin(), test_set.labels.end());
  if (classes < max_label + 1) {
    throw TrainError("model outputs " + std::to_string(classes) + " classes but labels reach " +
                     std::to_string(max_label));
  }
  int correct = 0;
  for (int i = 0; i < test_set.size(); ++i) {
    const Tensor probs = forward(model, test_set.image(i));
    const int pred = argmax_lowest(probs.data.data(), static_cast<int>(probs.size()));
    if (pred == test_set.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / test_set.size();
}

}  // namespace dcnn
