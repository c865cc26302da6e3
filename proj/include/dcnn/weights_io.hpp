#pragma once

#include <string>

#include "dcnn/model.hpp"

namespace dcnn {

/// Weight-file parse/shape failure; message carries the byte offset or the
/// offending layer name.
class ModelIoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Text manifest (graph structure + per-tensor byte offsets) followed by raw
/// little-endian float32 blobs. Round-trip is bit-exact.
void save_model(const ModelGraph& model, const std::string& path);
ModelGraph load_model(const std::string& path);

}  // namespace dcnn
