#include "dcnn/tensor.hpp"

#include <cmath>
#include <cstring>

namespace dcnn {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

std::size_t shape_elems(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(shape_elems(shape), 0.0f) {}

Tensor::Tensor(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_elems(shape)) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::full(Shape s, float v) {
  Tensor t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

bool Tensor::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::reshaped(Shape s) const {
  if (shape_elems(s) != data.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape) + " to " + shape_str(s));
  }
  return Tensor(std::move(s), data);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    throw ShapeError("shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  float m = 0.0f;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  }
  return m;
}

int argmax_lowest(const float* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace dcnn
