#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dcnn/model.hpp"

namespace dcnn {

class PartitionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Per-layer resource estimate. flops counts multiply-accumulates for
/// conv/dense and output elements for pooling/activations.
struct LayerCost {
  long long flops = 0;
  long long param_bytes = 0;
  long long output_bytes = 0;
};

struct NodeCapability {
  double compute_weight = 1.0;
  uint64_t memory_limit_bytes = std::numeric_limits<uint64_t>::max();
  bool trusted = true;
};

/// Contiguous layer range [lo, hi] handled by one node; hi < lo means the
/// node holds no layers and only forwards frames.
struct RangeAssignment {
  int node_index = 0;
  int lo = 0;
  int hi = -1;
  LayerCost total;
  double normalized_load = 0.0;  // flops / compute_weight

  bool empty() const { return hi < lo; }
  int layer_count() const { return empty() ? 0 : hi - lo + 1; }
};

struct PartitionPlan {
  std::string model_name;
  int layer_count = 0;
  std::vector<RangeAssignment> assignments;
  double bottleneck = 0.0;

  int node_count() const { return static_cast<int>(assignments.size()); }
  /// Node owning a given layer index.
  int owner_of(int layer) const;
  /// Coverage, contiguity and ordering invariants.
  void validate() const;
};

LayerCost layer_cost(const LayerSpec& spec, const Shape& input_shape);

/// Costs for every layer of a validated model, in network order.
std::vector<LayerCost> model_costs(const ModelGraph& model);

/// Optimal contiguous partition: minimizes the bottleneck normalized load
/// max_i(flops_i / compute_weight_i) subject to per-node parameter-memory
/// limits, by dynamic programming over (layer, node) prefixes. Ties prefer
/// earlier split points. Nodes may receive empty ranges.
PartitionPlan partition(const ModelGraph& model, const std::vector<NodeCapability>& nodes);

/// Direct 3-node plan [0,t-1][t,t][t+1,L-1] placing `target_layer` on the
/// interior node; used by the sweep to make any layer attackable.
PartitionPlan replan_for_target(const ModelGraph& model, int target_layer);

/// Human-readable plan document.
std::string plan_to_text(const PartitionPlan& plan, const ModelGraph& model);
PartitionPlan plan_from_text(const std::string& text);

}  // namespace dcnn
