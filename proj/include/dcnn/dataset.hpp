#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcnn/tensor.hpp"

namespace dcnn {

class DatasetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Labeled image set. Images are [N,1,28,28] floats in [0,1].
struct Dataset {
  Tensor images;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  Tensor image(int i) const;
  Dataset slice(int offset, int count) const;
  uint64_t content_hash() const;
};

/// MNIST IDX readers: big-endian magic 0x00000803 (images) / 0x00000801
/// (labels); pixels scaled by 1/255. Parse errors report the byte offset.
Dataset load_mnist(const std::string& images_path, const std::string& labels_path);

/// Offline fallback: seeded digit-glyph images (10 separable classes,
/// 28x28), with per-sample translation jitter, intensity scaling and pixel
/// noise. Label of sample i is deterministic given the seed.
Dataset synthetic_digits(int count, uint64_t seed);

}  // namespace dcnn
