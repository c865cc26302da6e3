#include "dcnn/model.hpp"

#include <cmath>
#include <random>
#include <set>

namespace dcnn {

void ModelGraph::validate() {
  std::set<std::string> names;
  for (const auto& l : layers) {
    if (l.name.empty()) throw ShapeError("model '" + name + "' has an unnamed layer");
    if (!names.insert(l.name).second) {
      throw ShapeError("model '" + name + "' has duplicate layer name '" + l.name + "'");
    }
  }
  input_shapes_.clear();
  input_shapes_.reserve(layers.size() + 1);
  Shape cur = input_shape;
  for (const auto& l : layers) {
    input_shapes_.push_back(cur);
    cur = output_shape(l, cur);  // throws on incompatibility
  }
  input_shapes_.push_back(cur);

  for (const auto& l : layers) {
    const bool has = params.count(l.name) > 0;
    if (layer_has_params(l.kind) && !has) {
      throw ShapeError("parametric layer '" + l.name + "' has no parameters");
    }
    if (!layer_has_params(l.kind) && has) {
      throw ShapeError("non-parametric layer '" + l.name + "' has parameters attached");
    }
    if (!has) continue;
    const LayerParams& p = params.at(l.name);
    Shape want_w, want_b;
    if (l.kind == LayerKind::Conv2D) {
      want_w = {l.out_channels, l.in_channels, l.kernel, l.kernel};
      want_b = {l.out_channels};
    } else {
      want_w = {l.out_dim, l.in_dim};
      want_b = {l.out_dim};
    }
    if (p.weights.shape != want_w || p.bias.shape != want_b) {
      throw ShapeError("layer '" + l.name + "' parameter shapes " + shape_str(p.weights.shape) +
                       "/" + shape_str(p.bias.shape) + " do not match spec " + shape_str(want_w) +
                       "/" + shape_str(want_b));
    }
  }
  for (const auto& [n, p] : params) {
    if (!names.count(n)) throw ShapeError("parameters for unknown layer '" + n + "'");
    (void)p;
  }
}

const Shape& ModelGraph::input_shape_of(int layer) const {
  if (input_shapes_.size() != layers.size() + 1) {
    throw ShapeError("model '" + name + "' not validated");
  }
  if (layer < 0 || layer > layer_count()) {
    throw ShapeError("layer index " + std::to_string(layer) + " out of range");
  }
  return input_shapes_[static_cast<std::size_t>(layer)];
}

Shape ModelGraph::final_output_shape() const { return input_shape_of(layer_count()); }

const LayerSpec& ModelGraph::layer_by_name(const std::string& n) const {
  for (const auto& l : layers) {
    if (l.name == n) return l;
  }
  throw ShapeError("model '" + name + "' has no layer '" + n + "'");
}

int ModelGraph::layer_index(const std::string& n) const {
  for (int i = 0; i < layer_count(); ++i) {
    if (layers[static_cast<std::size_t>(i)].name == n) return i;
  }
  throw ShapeError("model '" + name + "' has no layer '" + n + "'");
}

std::vector<std::string> ModelGraph::parametric_layer_names() const {
  std::vector<std::string> out;
  for (const auto& l : layers) {
    if (layer_has_params(l.kind)) out.push_back(l.name);
  }
  return out;
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params) n += p.weights.size() + p.bias.size();
  return n;
}

uint64_t ModelGraph::params_hash() const {
  uint64_t h = 14695981039346656037ull;  // FNV-1a 64
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [n, p] : params) {
    mix(n.data(), n.size());
    mix(p.weights.data.data(), p.weights.data.size() * sizeof(float));
    mix(p.bias.data.data(), p.bias.data.size() * sizeof(float));
  }
  return h;
}

Tensor forward(const ModelGraph& model, const Tensor& input, int from_layer, int to_layer) {
  if (from_layer < 0 || to_layer >= model.layer_count() || from_layer > to_layer) {
    throw ShapeError("forward range [" + std::to_string(from_layer) + "," +
                     std::to_string(to_layer) + "] invalid for " +
                     std::to_string(model.layer_count()) + " layers");
  }
  Tensor cur = input;
  for (int i = from_layer; i <= to_layer; ++i) {
    const LayerSpec& spec = model.layers[static_cast<std::size_t>(i)];
    const LayerParams* p =
        layer_has_params(spec.kind) ? &model.params.at(spec.name) : nullptr;
    try {
      cur = apply_layer(spec, p, cur);
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + spec.name + "': " + e.what());
    }
  }
  return cur;
}

Tensor forward(const ModelGraph& model, const Tensor& input) {
  return forward(model, input, 0, model.layer_count() - 1);
}

namespace {

// He-style uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero bias.
// Explicit u64->double mapping keeps draws identical across standard
// library implementations.
double next_unit(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
}

void init_he_uniform(ModelGraph& m, uint64_t seed) {
  std::mt19937_64 eng(seed);
  for (const auto& l : m.layers) {
    if (!layer_has_params(l.kind)) continue;
    LayerParams p;
    int fan_in;
    if (l.kind == LayerKind::Conv2D) {
      fan_in = l.in_channels * l.kernel * l.kernel;
      p.weights = Tensor({l.out_channels, l.in_channels, l.kernel, l.kernel});
      p.bias = Tensor({l.out_channels});
    } else {
      fan_in = l.in_dim;
      p.weights = Tensor({l.out_dim, l.in_dim});
      p.bias = Tensor({l.out_dim});
    }
    const double bound = std::sqrt(6.0 / fan_in);
    for (float& w : p.weights.data) {
      w = static_cast<float>((2.0 * next_unit(eng) - 1.0) * bound);
    }
    m.params[l.name] = std::move(p);
  }
}

}  // namespace

ModelGraph build_lenet(uint64_t seed) {
  ModelGraph m;
  m.name = "lenet";
  m.input_shape = {1, 28, 28};
  m.layers = {
      LayerSpec::conv2d("Conv1", 6, 1, 5, 1, 0),
      LayerSpec::relu("ReLU1"),
      LayerSpec::maxpool("Pool1", 2, 2),
      LayerSpec::conv2d("Conv2", 16, 6, 5, 1, 1),
      LayerSpec::relu("ReLU2"),
      LayerSpec::maxpool("Pool2", 2, 2),
      LayerSpec::conv2d("Conv3", 120, 16, 5, 1, 0),
      LayerSpec::relu("ReLU3"),
      LayerSpec::flatten("Flatten"),
      LayerSpec::dense("FC1", 84, 120),
      LayerSpec::relu("ReLU4"),
      LayerSpec::dense("FC2", 10, 84),
      LayerSpec::softmax("Softmax"),
  };
  init_he_uniform(m, seed);
  m.validate();
  return m;
}

ModelGraph build_alexnet_shape(uint64_t seed) {
  ModelGraph m;
  m.name = "alexnet";
  m.input_shape = {3, 227, 227};
  m.layers = {
      LayerSpec::conv2d("Conv1", 96, 3, 11, 4, 0),
      LayerSpec::relu("ReLU1"),
      LayerSpec::maxpool("Pool1", 3, 2),
      LayerSpec::conv2d("Conv2", 256, 96, 5, 1, 2),
      LayerSpec::relu("ReLU2"),
      LayerSpec::maxpool("Pool2", 3, 2),
      LayerSpec::conv2d("Conv3", 384, 256, 3, 1, 1),
      LayerSpec::relu("ReLU3"),
      LayerSpec::conv2d("Conv4", 384, 384, 3, 1, 1),
      LayerSpec::relu("ReLU4"),
      LayerSpec::conv2d("Conv5", 256, 384, 3, 1, 1),
      LayerSpec::relu("ReLU5"),
      LayerSpec::maxpool("Pool3", 3, 2),
      LayerSpec::flatten("Flatten"),
      LayerSpec::dense("FC6", 4096, 9216),
      LayerSpec::relu("ReLU6"),
      LayerSpec::dense("FC7", 4096, 4096),
      LayerSpec::relu("ReLU7"),
      LayerSpec::dense("FC8", 1000, 4096),
      LayerSpec::softmax("Softmax"),
  };
  init_he_uniform(m, seed);
  m.validate();
  return m;
}

ModelSlice slice_model(const ModelGraph& model, int from_layer, int to_layer) {
  ModelSlice s;
  s.from_layer = from_layer;
  s.to_layer = to_layer;
  if (to_layer < from_layer) return s;  // empty slice
  if (from_layer < 0 || to_layer >= model.layer_count()) {
    throw ShapeError("slice [" + std::to_string(from_layer) + "," + std::to_string(to_layer) +
                     "] out of range");
  }
  for (int i = from_layer; i <= to_layer; ++i) {
    const LayerSpec& spec = model.layers[static_cast<std::size_t>(i)];
    s.layers.push_back(spec);
    if (layer_has_params(spec.kind)) {
      s.params[spec.name] = model.params.at(spec.name);
    }
  }
  return s;
}

}  // namespace dcnn
