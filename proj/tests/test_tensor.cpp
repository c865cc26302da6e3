#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dcnn/layers.hpp"
#include "dcnn/model.hpp"
#include "oracle.hpp"

using namespace dcnn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& eng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (float& v : t.data) {
    v = lo + (hi - lo) * static_cast<float>(eng() >> 11) / 9007199254740992.0f;
  }
  return t;
}

}  // namespace

TEST_CASE("tensor shape/data invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
  CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape == Shape{3, 2});
}

TEST_CASE("conv2d 1x1 example") {
  const Tensor in({1, 1, 1}, {2.0f});
  const Tensor w({1, 1, 1, 1}, {3.0f});
  const Tensor b({1}, {1.0f});
  const Tensor out = conv2d(in, w, b, 1, 0);
  CHECK(out.shape == Shape{1, 1, 1});
  CHECK(out.data[0] == doctest::Approx(7.0f));  // 2*3+1
}

TEST_CASE("conv2d zero input yields bias everywhere") {
  const Tensor in = Tensor::zeros({1, 3, 3});
  std::mt19937_64 eng(7);
  const Tensor w = random_tensor({2, 1, 2, 2}, eng);
  const Tensor b({2}, {0.25f, -1.5f});
  const Tensor out = conv2d(in, w, b, 1, 0);
  CHECK(out.shape == Shape{2, 2, 2});
  for (int o = 0; o < 2; ++o) {
    for (int i = 0; i < 4; ++i) {
      CHECK(out.data[static_cast<std::size_t>(o * 4 + i)] == b.data[static_cast<std::size_t>(o)]);
    }
  }
}

TEST_CASE("conv2d matches the naive oracle on a LeNet Conv1 shaped case") {
  std::mt19937_64 eng(42);
  const Tensor in = random_tensor({1, 28, 28}, eng, 0.0f, 1.0f);
  const Tensor w = random_tensor({6, 1, 5, 5}, eng);
  const Tensor b = random_tensor({6}, eng);
  const Tensor out = conv2d(in, w, b, 1, 0);
  CHECK(out.shape == Shape{6, 24, 24});
  const auto ref = oracle::conv2d_ref(oracle::to_double(in), 1, 28, 28, oracle::to_double(w),
                                      oracle::to_double(b), 6, 5, 1, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.data[i] == doctest::Approx(ref[i]).epsilon(1e-5));
  }
}

TEST_CASE("conv2d channel mismatch names both shapes") {
  const Tensor in = Tensor::zeros({2, 4, 4});
  const Tensor w = Tensor::zeros({3, 1, 3, 3});
  const Tensor b = Tensor::zeros({3});
  CHECK_THROWS_WITH_AS(conv2d(in, w, b, 1, 0),
                       doctest::Contains("[2x4x4]"), ShapeError);
  try {
    conv2d(in, w, b, 1, 0);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[3x1x3x3]") != std::string::npos);
  }
}

TEST_CASE("pooling 2x2 example") {
  const Tensor in({1, 2, 2}, {1, 2, 3, 4});
  const Tensor mx = maxpool2d(in, 2, 2);
  const Tensor av = avgpool2d(in, 2, 2);
  CHECK(mx.shape == Shape{1, 1, 1});
  CHECK(mx.data[0] == 4.0f);
  CHECK(av.data[0] == doctest::Approx(2.5f));
}

TEST_CASE("pooling a constant tensor is the identity on values") {
  const Tensor in = Tensor::full({3, 6, 6}, 0.7f);
  for (const Tensor& out : {maxpool2d(in, 2, 2), avgpool2d(in, 2, 2)}) {
    CHECK(out.shape == Shape{3, 3, 3});
    for (float v : out.data) CHECK(v == doctest::Approx(0.7f));
  }
}

TEST_CASE("pooling matches the window-scan oracle") {
  std::mt19937_64 eng(3);
  const Tensor in = random_tensor({6, 24, 24}, eng);
  const Tensor mx = maxpool2d(in, 2, 2);
  const Tensor av = avgpool2d(in, 2, 2);
  const auto ref_mx = oracle::pool2d_ref(oracle::to_double(in), 6, 24, 24, 2, 2, true);
  const auto ref_av = oracle::pool2d_ref(oracle::to_double(in), 6, 24, 24, 2, 2, false);
  for (std::size_t i = 0; i < mx.size(); ++i) {
    CHECK(mx.data[i] == doctest::Approx(ref_mx[i]).epsilon(1e-6));
    CHECK(av.data[i] == doctest::Approx(ref_av[i]).epsilon(1e-6));
  }
}

TEST_CASE("pool window larger than input is an error") {
  CHECK_THROWS_AS(maxpool2d(Tensor::zeros({1, 2, 2}), 3, 1), ShapeError);
}

TEST_CASE("relu, softmax, flatten basics") {
  const Tensor r = relu(Tensor({3}, {-1.0f, 0.0f, 2.0f}));
  CHECK(r.data == std::vector<float>{0.0f, 0.0f, 2.0f});

  const Tensor s = softmax(Tensor({2}, {0.0f, 0.0f}));
  CHECK(s.data[0] == doctest::Approx(0.5f));
  CHECK(s.data[1] == doctest::Approx(0.5f));

  const Tensor big = softmax(Tensor({2}, {1000.0f, 0.0f}));
  CHECK(big.all_finite());
  CHECK(big.data[0] == doctest::Approx(1.0f).epsilon(1e-6));
  CHECK(big.data[1] == doctest::Approx(0.0f).epsilon(1e-6));

  CHECK_THROWS_AS(softmax(Tensor::zeros({2, 2})), ShapeError);

  const Tensor f = flatten(Tensor({2, 2}, {1, 2, 3, 4}));
  CHECK(f.shape == Shape{4});
  CHECK(f.data == std::vector<float>{1, 2, 3, 4});
}

TEST_CASE("softmax sums to one") {
  std::mt19937_64 eng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const Tensor in = random_tensor({10}, eng, -8.0f, 8.0f);
    const Tensor out = softmax(in);
    double sum = 0.0;
    for (float v : out.data) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("dense identity and zero-weight examples") {
  const Tensor id_w({2, 2}, {1, 0, 0, 1});
  const Tensor zero_b({2}, {0, 0});
  const Tensor out = dense(Tensor({2}, {1, 2}), id_w, zero_b);
  CHECK(out.data == std::vector<float>{1, 2});

  const Tensor zw = Tensor::zeros({2, 3});
  const Tensor b({2}, {5, 6});
  const Tensor out2 = dense(Tensor({3}, {9, 9, 9}), zw, b);
  CHECK(out2.data == std::vector<float>{5, 6});

  CHECK_THROWS_AS(dense(Tensor({3}, {1, 2, 3}), id_w, zero_b), ShapeError);
}

TEST_CASE("dense matches the double-loop oracle on an 84x120 case") {
  std::mt19937_64 eng(5);
  const Tensor in = random_tensor({120}, eng);
  const Tensor w = random_tensor({84, 120}, eng);
  const Tensor b = random_tensor({84}, eng);
  const Tensor out = dense(in, w, b);
  const auto ref =
      oracle::dense_ref(oracle::to_double(in), oracle::to_double(w), oracle::to_double(b), 84, 120);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.data[i] == doctest::Approx(ref[i]).epsilon(1e-5));
  }
}

TEST_CASE("shape formulas hold for random hyperparameters") {
  std::mt19937_64 eng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const int c_in = 1 + static_cast<int>(eng() % 4);
    const int h = 4 + static_cast<int>(eng() % 20);
    const int w = 4 + static_cast<int>(eng() % 20);
    const int k = 1 + static_cast<int>(eng() % 4);
    const int stride = 1 + static_cast<int>(eng() % 3);
    const int pad = static_cast<int>(eng() % 3);
    const int c_out = 1 + static_cast<int>(eng() % 5);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;

    const Tensor in = random_tensor({c_in, h, w}, eng);
    const Tensor cw = random_tensor({c_out, c_in, k, k}, eng);
    const Tensor cb = random_tensor({c_out}, eng);
    const Tensor out = conv2d(in, cw, cb, stride, pad);
    CHECK(out.shape == Shape{c_out, (h + 2 * pad - k) / stride + 1,
                             (w + 2 * pad - k) / stride + 1});
    const LayerSpec spec = LayerSpec::conv2d("c", c_out, c_in, k, stride, pad);
    CHECK(output_shape(spec, in.shape) == out.shape);

    if (h >= k && w >= k) {
      const Tensor pooled = maxpool2d(in, k, stride);
      CHECK(pooled.shape == Shape{c_in, (h - k) / stride + 1, (w - k) / stride + 1});
    }
  }
}

TEST_CASE("conv and dense are linear in their parameters") {
  std::mt19937_64 eng(23);
  for (float s : {-2.0f, -0.5f, 0.6f, 1.4f, 2.0f}) {
    const Tensor in = random_tensor({3, 9, 9}, eng);
    const Tensor w = random_tensor({4, 3, 3, 3}, eng);
    const Tensor b = random_tensor({4}, eng);
    Tensor ws = w, bs = b;
    for (float& v : ws.data) v *= s;
    for (float& v : bs.data) v *= s;
    const Tensor lhs = conv2d(in, ws, bs, 1, 1);
    Tensor rhs = conv2d(in, w, b, 1, 1);
    for (float& v : rhs.data) v *= s;
    CHECK(max_abs_diff(lhs, rhs) < 1e-5f);

    const Tensor din = random_tensor({20}, eng);
    const Tensor dw = random_tensor({10, 20}, eng);
    const Tensor db = random_tensor({10}, eng);
    Tensor dws = dw, dbs = db;
    for (float& v : dws.data) v *= s;
    for (float& v : dbs.data) v *= s;
    const Tensor dlhs = dense(din, dws, dbs);
    Tensor drhs = dense(din, dw, db);
    for (float& v : drhs.data) v *= s;
    CHECK(max_abs_diff(dlhs, drhs) < 1e-5f);
  }
}

TEST_CASE("forward over a single-layer slice equals calling the op directly") {
  ModelGraph m = build_lenet(1);
  std::mt19937_64 eng(9);
  const Tensor in = random_tensor({1, 28, 28}, eng, 0.0f, 1.0f);
  const Tensor via_forward = forward(m, in, 0, 0);
  const auto& p = m.params.at("Conv1");
  const Tensor direct = conv2d(in, p.weights, p.bias, 1, 0);
  CHECK(bitwise_equal(via_forward, direct));
}

TEST_CASE("pipeline compositionality: any split point changes nothing") {
  ModelGraph m = build_lenet(2);
  std::mt19937_64 eng(31);
  const Tensor in = random_tensor({1, 28, 28}, eng, 0.0f, 1.0f);
  const Tensor whole = forward(m, in, 0, m.layer_count() - 1);
  for (int k = 0; k + 1 < m.layer_count(); ++k) {
    const Tensor head = forward(m, in, 0, k);
    const Tensor tail = forward(m, head, k + 1, m.layer_count() - 1);
    CHECK(max_abs_diff(whole, tail) <= 1e-6f);
  }
}

TEST_CASE("forward is deterministic and finite on finite inputs") {
  ModelGraph m = build_lenet(42);
  const Tensor zero = Tensor::zeros({1, 28, 28});
  const Tensor a = forward(m, zero);
  const Tensor b = forward(m, zero);
  CHECK(bitwise_equal(a, b));
  CHECK(a.all_finite());
  CHECK(a.shape == Shape{10});
  double sum = 0.0;
  for (float v : a.data) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("forward attaches layer names to errors") {
  ModelGraph m = build_lenet(3);
  try {
    forward(m, Tensor::zeros({1, 14, 14}), 3, 5);  // Conv2 expects 6 channels
    CHECK(false);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("Conv2") != std::string::npos);
  }
}
