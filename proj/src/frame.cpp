#include "dcnn/frame.hpp"

#include <zlib.h>

#include <cstring>

namespace dcnn {

const char* frame_error_kind_name(FrameErrorKind k) {
  switch (k) {
    case FrameErrorKind::BadMagic: return "bad magic";
    case FrameErrorKind::BadChecksum: return "bad checksum";
    case FrameErrorKind::Truncated: return "truncated frame";
    case FrameErrorKind::BadHeader: return "bad header";
  }
  return "?";
}

namespace {

constexpr uint8_t kMagic[4] = {'D', 'C', 'N', 'N'};

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint16_t get_u16le(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (static_cast<uint16_t>(p[1]) << 8));
}

uint32_t get_u32le(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

uint64_t get_u64le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

uint32_t payload_crc(const float* data, std::size_t n) {
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n * sizeof(float))));
}

}  // namespace

Tensor BlobFrame::to_tensor() const {
  Shape s;
  s.reserve(dims.size());
  for (uint32_t d : dims) s.push_back(static_cast<int>(d));
  return Tensor(std::move(s), payload);
}

BlobFrame BlobFrame::from_tensor(uint64_t inference_id, uint16_t layer_index, const Tensor& t) {
  BlobFrame f;
  f.inference_id = inference_id;
  f.layer_index = layer_index;
  f.dims.reserve(t.shape.size());
  for (int d : t.shape) f.dims.push_back(static_cast<uint32_t>(d));
  f.payload = t.data;
  return f;
}

std::vector<uint8_t> encode_frame(const BlobFrame& frame) {
  if (frame.dims.empty()) {
    throw std::invalid_argument("frame must carry at least one dimension");
  }
  std::size_t elems = 1;
  for (uint32_t d : frame.dims) {
    if (d == 0) throw std::invalid_argument("frame dimension of zero");
    elems *= d;
  }
  if (elems != frame.payload.size()) {
    throw std::invalid_argument("frame payload length " + std::to_string(frame.payload.size()) +
                                " does not match dims product " + std::to_string(elems));
  }

  const std::size_t body_len =
      4 + 1 + 8 + 2 + 1 + 4 * frame.dims.size() + 4 * frame.payload.size() + 4;
  if (body_len > kMaxFrameBody) throw std::invalid_argument("frame too large");

  std::vector<uint8_t> out;
  out.reserve(4 + body_len);
  put_u32le(out, static_cast<uint32_t>(body_len));
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(frame.version);
  put_u64le(out, frame.inference_id);
  put_u16le(out, frame.layer_index);
  out.push_back(static_cast<uint8_t>(frame.dims.size()));
  for (uint32_t d : frame.dims) put_u32le(out, d);
  const std::size_t payload_at = out.size();
  out.resize(out.size() + 4 * frame.payload.size());
  std::memcpy(out.data() + payload_at, frame.payload.data(), 4 * frame.payload.size());
  put_u32le(out, payload_crc(frame.payload.data(), frame.payload.size()));
  return out;
}

BlobFrame decode_frame(const uint8_t* body, std::size_t len) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > len) {
      throw FrameError(FrameErrorKind::Truncated,
                       "need " + std::to_string(pos + n) + " bytes, have " + std::to_string(len));
    }
  };

  need(4);
  if (std::memcmp(body, kMagic, 4) != 0) {
    throw FrameError(FrameErrorKind::BadMagic, "first bytes are not DCNN");
  }
  pos = 4;
  need(1 + 8 + 2 + 1);
  BlobFrame f;
  f.version = body[pos];
  if (f.version != 1) {
    throw FrameError(FrameErrorKind::BadHeader,
                     "unsupported version " + std::to_string(f.version));
  }
  pos += 1;
  f.inference_id = get_u64le(body + pos);
  pos += 8;
  f.layer_index = get_u16le(body + pos);
  pos += 2;
  const uint8_t ndims = body[pos];
  pos += 1;
  if (ndims == 0) throw FrameError(FrameErrorKind::BadHeader, "ndims is zero");

  need(4 * static_cast<std::size_t>(ndims));
  std::size_t elems = 1;
  f.dims.reserve(ndims);
  for (uint8_t i = 0; i < ndims; ++i) {
    const uint32_t d = get_u32le(body + pos);
    pos += 4;
    if (d == 0) throw FrameError(FrameErrorKind::BadHeader, "zero dimension");
    if (elems > kMaxFrameBody / 4 / d) {
      throw FrameError(FrameErrorKind::BadHeader, "dims product too large");
    }
    elems *= d;
    f.dims.push_back(d);
  }

  need(4 * elems + 4);
  f.payload.resize(elems);
  std::memcpy(f.payload.data(), body + pos, 4 * elems);
  pos += 4 * elems;
  const uint32_t want_crc = get_u32le(body + pos);
  pos += 4;
  if (pos != len) {
    throw FrameError(FrameErrorKind::BadHeader,
                     std::to_string(len - pos) + " trailing bytes after frame");
  }
  const uint32_t got_crc = payload_crc(f.payload.data(), f.payload.size());
  if (got_crc != want_crc) {
    throw FrameError(FrameErrorKind::BadChecksum, "payload CRC mismatch");
  }
  return f;
}

}  // namespace dcnn
