#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcnn/tensor.hpp"

namespace dcnn {

enum class FrameErrorKind { BadMagic, BadChecksum, Truncated, BadHeader };

const char* frame_error_kind_name(FrameErrorKind k);

class FrameError : public std::runtime_error {
public:
  FrameError(FrameErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(frame_error_kind_name(kind)) + ": " + what),
        kind(kind) {}
  FrameErrorKind kind;
};

/// One feature-map blob on the wire. Body layout, all integers
/// little-endian: "DCNN" | u8 version | u64 inference_id | u16 layer_index |
/// u8 ndims | u32 dims[ndims] | f32 payload | u32 crc32(payload bytes).
/// Frames travel length-prefixed (u32 body length) so a stream can carry
/// them back to back.
struct BlobFrame {
  uint8_t version = 1;
  uint64_t inference_id = 0;
  uint16_t layer_index = 0;
  std::vector<uint32_t> dims;
  std::vector<float> payload;

  Tensor to_tensor() const;
  static BlobFrame from_tensor(uint64_t inference_id, uint16_t layer_index, const Tensor& t);
};

/// Length prefix + body. Throws std::invalid_argument when dims is empty or
/// does not match the payload length.
std::vector<uint8_t> encode_frame(const BlobFrame& frame);

/// Decodes one body (without the length prefix); consumes exactly `len`
/// bytes or throws a FrameError. A corrupted frame never yields a payload.
BlobFrame decode_frame(const uint8_t* body, std::size_t len);

/// Frames larger than this are rejected as corrupt length prefixes.
constexpr uint32_t kMaxFrameBody = 256u << 20;

}  // namespace dcnn
