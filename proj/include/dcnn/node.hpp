#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dcnn/attack.hpp"
#include "dcnn/model.hpp"
#include "dcnn/transport.hpp"

namespace dcnn {

class NodeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Static configuration of one pipeline worker. The worker sees only its own
/// layer slice; the attack hook is allowed on interior (untrusted) nodes
/// only.
struct NodeConfig {
  int node_index = 0;
  int node_count = 1;
  std::string listen_host = "127.0.0.1";
  uint16_t listen_port = 0;
  std::string next_host = "127.0.0.1";
  uint16_t next_port = 0;  // 0: last node, results return to the coordinator
  int range_lo = 0;
  int range_hi = -1;
  bool trusted = true;
  std::optional<AttackConfig> attack;

  bool is_first() const { return node_index == 0; }
  bool is_last() const { return node_index == node_count - 1; }
  void validate() const;
};

struct WorkerStats {
  uint64_t frames_in = 0;
  uint64_t frames_out = 0;
  uint64_t decode_errors = 0;
  uint64_t layer_index_mismatches = 0;
  uint64_t forward_errors = 0;
  uint64_t trigger_fires = 0;
};

/// Receive loop of one node: decode a frame, check the layer index, run the
/// slice forward (through the double buffer when an attack is configured),
/// forward the result with the layer index advanced. Malformed frames and
/// index mismatches are dropped; the worker keeps serving until EOF.
/// Returns the final stats.
WorkerStats serve_node(const NodeConfig& config, const ModelSlice& slice, ByteStream& in,
                       ByteStream& out);

}  // namespace dcnn
