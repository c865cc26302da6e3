#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcnn/dataset.hpp"
#include "dcnn/model.hpp"

namespace dcnn {

/// Raised when training diverges; message carries the epoch/batch index.
class TrainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  int epochs = 2;
  float lr = 0.05f;
  int batch = 32;
  uint64_t seed = 42;
};

struct TrainLog {
  std::vector<double> epoch_mean_loss;
};

/// Gradient tensors accumulate in 64-bit.
struct GradTensor {
  Shape shape;
  std::vector<double> data;
};

struct LayerGrads {
  GradTensor weights;
  GradTensor bias;
};

struct BatchGradients {
  std::map<std::string, LayerGrads> by_layer;
  double mean_loss = 0.0;
};

/// Analytic gradients of the mean softmax-cross-entropy loss over a batch,
/// with respect to every parameter. The model's last layer must be Softmax.
BatchGradients backprop_batch(const ModelGraph& model, const std::vector<Tensor>& images,
                              const std::vector<int>& labels);

/// Minibatch SGD with cross-entropy loss. Deterministic given the seed:
/// per-epoch shuffles use a hand-rolled Fisher-Yates over mt19937_64.
ModelGraph train(ModelGraph model, const Dataset& train_set, const TrainOptions& opt,
                 TrainLog* log = nullptr);

/// Fraction of argmax-correct predictions; ties break toward the lower
/// class index. Empty dataset is an error.
double evaluate(const ModelGraph& model, const Dataset& test_set);

}  // namespace dcnn
