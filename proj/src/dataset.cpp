#include "dcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace dcnn {

Tensor Dataset::image(int i) const {
  if (i < 0 || i >= size()) {
    throw DatasetError("image index " + std::to_string(i) + " out of range");
  }
  const int c = images.shape[1], h = images.shape[2], w = images.shape[3];
  const std::size_t n = static_cast<std::size_t>(c) * h * w;
  Tensor t({c, h, w});
  std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(n * i), n, t.data.begin());
  return t;
}

Dataset Dataset::slice(int offset, int count) const {
  if (offset < 0 || count < 0 || offset + count > size()) {
    throw DatasetError("slice [" + std::to_string(offset) + "," +
                       std::to_string(offset + count) + ") out of range for " +
                       std::to_string(size()) + " samples");
  }
  const int c = images.shape[1], h = images.shape[2], w = images.shape[3];
  const std::size_t per = static_cast<std::size_t>(c) * h * w;
  Dataset out;
  out.images = Tensor({count, c, h, w});
  std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(per * offset), per * count,
              out.images.data.begin());
  out.labels.assign(labels.begin() + offset, labels.begin() + offset + count);
  return out;
}

uint64_t Dataset::content_hash() const {
  uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  mix(images.data.data(), images.data.size() * sizeof(float));
  for (int l : labels) mix(&l, sizeof(l));
  return h;
}

namespace {

uint32_t read_be32(const unsigned char* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot open '" + path + "'");
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

Dataset load_mnist(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  if (img.size() < 16) {
    throw DatasetError("'" + images_path + "': truncated IDX header at byte " +
                       std::to_string(img.size()));
  }
  if (read_be32(img.data()) != 0x00000803u) {
    throw DatasetError("'" + images_path + "': bad IDX magic at byte 0");
  }
  const uint32_t n = read_be32(img.data() + 4);
  const uint32_t rows = read_be32(img.data() + 8);
  const uint32_t cols = read_be32(img.data() + 12);
  if (rows != 28 || cols != 28) {
    throw DatasetError("'" + images_path + "': expected 28x28 images, got " +
                       std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::size_t want = 16 + static_cast<std::size_t>(n) * rows * cols;
  if (img.size() < want) {
    throw DatasetError("'" + images_path + "': truncated image data at byte " +
                       std::to_string(img.size()) + " (need " + std::to_string(want) + ")");
  }

  if (lab.size() < 8) {
    throw DatasetError("'" + labels_path + "': truncated IDX header at byte " +
                       std::to_string(lab.size()));
  }
  if (read_be32(lab.data()) != 0x00000801u) {
    throw DatasetError("'" + labels_path + "': bad IDX magic at byte 0");
  }
  const uint32_t nl = read_be32(lab.data() + 4);
  if (nl != n) {
    throw DatasetError("image/label count mismatch: " + std::to_string(n) + " vs " +
                       std::to_string(nl));
  }
  if (lab.size() < 8 + nl) {
    throw DatasetError("'" + labels_path + "': truncated label data at byte " +
                       std::to_string(lab.size()));
  }

  Dataset d;
  d.images = Tensor({static_cast<int>(n), 1, 28, 28});
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * 784; ++i) {
    d.images.data[i] = static_cast<float>(img[16 + i]) / 255.0f;
  }
  d.labels.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    const unsigned char v = lab[8 + i];
    if (v > 9) {
      throw DatasetError("'" + labels_path + "': label " + std::to_string(v) + " at byte " +
                         std::to_string(8 + i) + " out of range");
    }
    d.labels[i] = v;
  }
  return d;
}

namespace {

// 5x7 digit glyphs, one bit per cell, row-major top to bottom.
constexpr uint8_t kGlyphs[10][7] = {
    {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110},  // 0
    {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110},  // 1
    {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111},  // 2
    {0b11111, 0b00001, 0b00010, 0b00110, 0b00001, 0b10001, 0b01110},  // 3
    {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010},  // 4
    {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110},  // 5
    {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110},  // 6
    {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000},  // 7
    {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110},  // 8
    {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100},  // 9
};

// Generator tuning. A fifth of the samples carry a fainter overlay glyph of
// another class, which keeps decision margins tight enough that parameter
// corruption is measurable while a two-epoch training run still clears 99%.
constexpr double GP_HARD = 0.22;        // fraction of overlay samples
constexpr double GP_MORPH_LO = 0.42;    // overlay contrast relative to main
constexpr double GP_MORPH_HI = 0.62;
constexpr double GP_NOISE_E = 0.04;     // additive Gaussian pixel noise
constexpr double GP_NOISE_H = 0.06;
constexpr double GP_CONTRAST_E = 0.50;  // glyph contrast against the canvas
constexpr double GP_CONTRAST_H = 0.38;
constexpr double GP_DROP_E = 0.02;      // glyph pixel dropout
constexpr double GP_DROP_H = 0.05;
constexpr double GP_CLUT_AMP = 0.16;    // clutter stroke contrast
constexpr int GP_CLUT_E = 1;            // clutter strokes per image
constexpr int GP_CLUT_H = 2;

double unit_draw(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * (1.0 / 9007199254740992.0);
}

double gauss_draw(std::mt19937_64& eng) {
  double u1 = unit_draw(eng);
  while (u1 <= 0.0) u1 = unit_draw(eng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.141592653589793 * unit_draw(eng));
}

void draw_glyph(float* px, int cls, int x0, int y0, double value, double dropout,
                std::mt19937_64& eng) {
  for (int r = 0; r < 21; ++r) {
    for (int c = 0; c < 15; ++c) {
      if ((kGlyphs[cls][r / 3] >> (4 - c / 3)) & 1) {
        if (unit_draw(eng) < dropout) continue;
        const int xi = x0 + c, yi = y0 + r;
        if (xi >= 0 && xi < 28 && yi >= 0 && yi < 28) px[yi * 28 + xi] = static_cast<float>(value);
      }
    }
  }
}

}  // namespace

Dataset synthetic_digits(int count, uint64_t seed) {
  if (count < 0) throw DatasetError("negative sample count");
  Dataset d;
  d.images = Tensor({count, 1, 28, 28});
  d.labels.resize(static_cast<std::size_t>(count));
  std::mt19937_64 eng(seed);
  for (int i = 0; i < count; ++i) {
    const int cls = static_cast<int>(eng() % 10);
    d.labels[static_cast<std::size_t>(i)] = cls;
    float* px = d.images.data.data() + static_cast<std::size_t>(i) * 784;
    for (int p = 0; p < 784; ++p) px[p] = 0.5f;

    const bool hard = unit_draw(eng) < GP_HARD;

    // Clutter strokes; half snap to the axes so bar-like false strokes are
    // common and single-stroke shortcuts never become class evidence.
    const int strokes = (hard ? GP_CLUT_H : GP_CLUT_E) + static_cast<int>(eng() % 2);
    for (int s = 0; s < strokes; ++s) {
      const double amp = GP_CLUT_AMP * (0.5 + 0.5 * unit_draw(eng));
      const double sgn = unit_draw(eng) < 0.5 ? -1.0 : 1.0;
      double x = 1 + unit_draw(eng) * 26, y = 1 + unit_draw(eng) * 26;
      double ang = unit_draw(eng) * 6.283185307179586;
      if (unit_draw(eng) < 0.5) ang = (eng() % 2) ? 1.5707963267948966 : 0.0;
      const int len = 8 + static_cast<int>(eng() % 12);
      const double dx = std::cos(ang), dy = std::sin(ang);
      for (int t = 0; t < len; ++t) {
        const int xi = static_cast<int>(x + t * dx), yi = static_cast<int>(y + t * dy);
        if (xi >= 0 && xi < 28 && yi >= 0 && yi < 28) {
          px[yi * 28 + xi] = static_cast<float>(0.5 + sgn * amp);
        }
      }
    }

    // Main glyph: 15x21, signed contrast against the gray canvas so contrast
    // polarity alone carries no class signal.
    const double contrast = (hard ? GP_CONTRAST_H : GP_CONTRAST_E) + 0.08 * unit_draw(eng);
    const double sgn = unit_draw(eng) < 0.5 ? -1.0 : 1.0;
    const int x0 = 2 + static_cast<int>(eng() % 9);
    const int y0 = static_cast<int>(eng() % 6);
    draw_glyph(px, cls, x0, y0, 0.5 + sgn * contrast, hard ? GP_DROP_H : GP_DROP_E, eng);

    // Overlay samples carry a fainter glyph of another class; the label is
    // decided by which pattern dominates.
    if (hard) {
      int other = static_cast<int>(eng() % 10);
      while (other == cls) other = static_cast<int>(eng() % 10);
      const double lam = GP_MORPH_LO + (GP_MORPH_HI - GP_MORPH_LO) * unit_draw(eng);
      draw_glyph(px, other, x0, y0, 0.5 + sgn * contrast * lam, 0.35, eng);
    }

    const double sigma = hard ? GP_NOISE_H : GP_NOISE_E;
    for (int p = 0; p < 784; ++p) {
      px[p] = static_cast<float>(
          std::clamp(static_cast<double>(px[p]) + sigma * gauss_draw(eng), 0.0, 1.0));
    }
  }
  return d;
}

}  // namespace dcnn
