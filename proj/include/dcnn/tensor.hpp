#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcnn {

/// Thrown when tensor shapes do not satisfy an operation's contract.
/// The message names the offending shapes.
class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_elems(const Shape& s);

/// N-dimensional row-major array of 32-bit floats. Carries input images,
/// feature-map blobs and layer parameters alike.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<float> d);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, float v);

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  /// Reshape without copying data; element count must be preserved.
  Tensor reshaped(Shape s) const;
};

/// Exact comparison at the bit level (distinguishes -0.0 from 0.0, etc).
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Max |a-b| over all elements; shapes must agree.
float max_abs_diff(const Tensor& a, const Tensor& b);

/// Index of the largest element, ties broken toward the lower index.
int argmax_lowest(const float* v, int n);

}  // namespace dcnn
