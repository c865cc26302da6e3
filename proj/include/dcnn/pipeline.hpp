#pragma once

#include <atomic>
#include <chrono>
#include <vector>

#include "dcnn/dataset.hpp"
#include "dcnn/node.hpp"
#include "dcnn/partition.hpp"

namespace dcnn {

enum class TransportMode { Inproc, Tcp };

const char* transport_mode_name(TransportMode m);
TransportMode transport_mode_from_name(const std::string& s);

struct InferenceResult {
  uint64_t inference_id = 0;
  int predicted_class = -1;
  std::vector<float> probabilities;
};

struct PipelineRunResult {
  std::vector<InferenceResult> results;  // ascending inference_id
  std::vector<uint64_t> failed_ids;      // timed out / lost in flight
  std::vector<WorkerStats> worker_stats;
};

struct PipelineOptions {
  TransportMode transport = TransportMode::Inproc;
  std::chrono::milliseconds per_image_timeout{10'000};
  int max_in_flight = 32;
  /// Optional cooperative cancel: stop feeding new images, drain, shut down.
  const std::atomic<bool>* cancel = nullptr;
};

/// Executes the plan as a chain of node workers and streams the dataset
/// through it. Attacks are assigned to the interior node owning their target
/// layer. Results map back to inference ids regardless of arrival order.
PipelineRunResult run_pipeline(const PartitionPlan& plan, const ModelGraph& model,
                               const Dataset& slice,
                               const std::vector<AttackConfig>& attack_assignments,
                               const PipelineOptions& options = {});

/// Accuracy over pipeline results; failed inferences are excluded from both
/// numerator and denominator.
double pipeline_accuracy(const PipelineRunResult& run, const std::vector<int>& labels);

}  // namespace dcnn
