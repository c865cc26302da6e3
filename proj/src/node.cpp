#include "dcnn/node.hpp"

#include <cstdio>

namespace dcnn {

void NodeConfig::validate() const {
  if (node_count < 1 || node_index < 0 || node_index >= node_count) {
    throw NodeError("node index " + std::to_string(node_index) + " out of range for " +
                    std::to_string(node_count) + " nodes");
  }
  if (attack.has_value()) {
    if (is_first() || is_last()) {
      throw NodeError("node " + std::to_string(node_index) +
                      " is an endpoint (trusted); attacks may only run on interior nodes");
    }
    if (trusted) {
      throw NodeError("node " + std::to_string(node_index) +
                      " is marked trusted and cannot carry an attack");
    }
  }
}

namespace {

Tensor forward_slice(const ModelSlice& slice, const DoubleBuffer* buffer, bool fired,
                     const Tensor& input) {
  Tensor cur = input;
  for (const LayerSpec& spec : slice.layers) {
    const LayerParams* p = nullptr;
    if (layer_has_params(spec.kind)) {
      p = (buffer != nullptr && buffer->layer_name() == spec.name) ? &buffer->select(fired)
                                                                   : &slice.params.at(spec.name);
    }
    try {
      cur = apply_layer(spec, p, cur);
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + spec.name + "': " + e.what());
    }
  }
  return cur;
}

}  // namespace

WorkerStats serve_node(const NodeConfig& config, const ModelSlice& slice, ByteStream& in,
                       ByteStream& out) {
  config.validate();
  if (slice.from_layer != config.range_lo || slice.to_layer != config.range_hi) {
    throw NodeError("model slice [" + std::to_string(slice.from_layer) + "," +
                    std::to_string(slice.to_layer) + "] does not match configured range");
  }

  WorkerStats stats;
  std::optional<DoubleBuffer> buffer;
  TriggerSpec trigger;
  if (config.attack.has_value()) {
    const AttackConfig& atk = *config.attack;
    bool owned = false;
    for (const LayerSpec& spec : slice.layers) {
      if (spec.name == atk.target_layer) {
        if (!layer_has_params(spec.kind)) {
          throw NodeError("attack target '" + atk.target_layer + "' has no parameters");
        }
        buffer.emplace(spec.name, spec.kind, slice.params.at(spec.name));
        owned = true;
        break;
      }
    }
    if (!owned) {
      throw NodeError("attack target '" + atk.target_layer + "' is not on node " +
                      std::to_string(config.node_index));
    }
    // Payload is staged up front so triggering is a selector flip, never a
    // recompute.
    buffer->prepare(atk);
    trigger = atk.trigger;
  }

  // Workers block on input indefinitely; lifetime is bounded by upstream EOF.
  constexpr std::chrono::milliseconds kIdleTimeout{3'600'000};

  while (true) {
    FrameRecvResult r;
    try {
      r = recv_frame(in, kIdleTimeout);
    } catch (const FrameError& e) {
      ++stats.decode_errors;
      std::fprintf(stderr, "[node %d] dropped frame: %s\n", config.node_index, e.what());
      continue;
    }
    if (r.status == RecvStatus::Eof) break;
    if (r.status == RecvStatus::Timeout) continue;
    BlobFrame frame = std::move(*r.frame);
    ++stats.frames_in;

    Tensor result;
    uint16_t out_layer_index = frame.layer_index;
    if (slice.empty()) {
      // Pass-through node: forward the blob untouched.
      result = frame.to_tensor();
    } else {
      if (frame.layer_index != static_cast<uint16_t>(config.range_lo)) {
        ++stats.layer_index_mismatches;
        std::fprintf(stderr, "[node %d] dropped frame for layer %u (serving %d..%d)\n",
                     config.node_index, frame.layer_index, config.range_lo, config.range_hi);
        continue;
      }
      bool fired = false;
      if (buffer.has_value()) {
        fired = apply_trigger(trigger, frame.inference_id);
        if (fired) ++stats.trigger_fires;
        buffer->set_active(fired);
      }
      try {
        result = forward_slice(slice, buffer.has_value() ? &*buffer : nullptr, fired,
                               frame.to_tensor());
      } catch (const ShapeError& e) {
        ++stats.forward_errors;
        std::fprintf(stderr, "[node %d] dropped frame %llu: %s\n", config.node_index,
                     static_cast<unsigned long long>(frame.inference_id), e.what());
        continue;
      }
      out_layer_index = static_cast<uint16_t>(config.range_hi + 1);
    }

    try {
      send_frame(out, BlobFrame::from_tensor(frame.inference_id, out_layer_index, result));
      ++stats.frames_out;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "[node %d] downstream send failed: %s\n", config.node_index,
                   e.what());
    }
  }
  out.close_send();
  return stats;
}

}  // namespace dcnn
