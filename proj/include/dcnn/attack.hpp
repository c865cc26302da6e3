#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "dcnn/layers.hpp"

namespace dcnn {

class AttackError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Sample moments and extreme positions of a parameter tensor. stddev is the
/// population standard deviation; extreme indices are first occurrences in
/// row-major order.
struct ParamStats {
  double mean = 0.0;
  double stddev = 0.0;
  float min_value = 0.0f;
  float max_value = 0.0f;
  std::size_t min_index = 0;
  std::size_t max_index = 0;
  std::size_t count = 0;
};

ParamStats compute_stats(const Tensor& t);

/// When an attack fires relative to the inference counter. fired_count is
/// telemetry updated by apply_trigger.
struct TriggerSpec {
  enum class Mode { Always, Never, Periodic, Window };
  Mode mode = Mode::Never;
  uint64_t period = 1;     // Periodic: fires when id % period == phase
  uint64_t phase = 0;
  uint64_t win_start = 0;  // Window: fires when win_start <= id <= win_end
  uint64_t win_end = 0;
  uint64_t fired_count = 0;

  static TriggerSpec always() { return {Mode::Always, 1, 0, 0, 0, 0}; }
  static TriggerSpec never() { return {Mode::Never, 1, 0, 0, 0, 0}; }
  static TriggerSpec periodic(uint64_t k, uint64_t p) { return {Mode::Periodic, k, p, 0, 0, 0}; }
  static TriggerSpec window(uint64_t a, uint64_t b) { return {Mode::Window, 1, 0, a, b, 0}; }

  std::string to_string() const;
  static TriggerSpec parse(const std::string& s);
};

bool apply_trigger(TriggerSpec& trigger, uint64_t inference_id);

enum class AttackKind { Scalar, RandomScale, PolarityFlip, MaxMinSwap, StatisticalResample };

const char* attack_kind_name(AttackKind k);

struct AttackConfig {
  AttackKind kind = AttackKind::Scalar;
  float scalar = 1.0f;   // Scalar only
  uint64_t seed = 0;     // RandomScale / StatisticalResample
  std::string target_layer;
  TriggerSpec trigger;

  /// Short form like "scalar:0.6", "flip", "swap", "random", "mean".
  std::string describe() const;
};

// Payload transformations. All are pure and, where seeded, bit-reproducible.
Tensor scalar_attack(const Tensor& params, float s);
Tensor random_scale_attack(const Tensor& params, uint64_t seed);
Tensor polarity_flip(const Tensor& params);
Tensor minmax_swap(const Tensor& params, LayerKind layer_kind);
Tensor statistical_resample(const Tensor& params, uint64_t seed);

/// Applies the configured transformation to a whole parameter set. Weights
/// and biases are both transformed except for MaxMinSwap, which touches only
/// the weights.
LayerParams apply_attack(const LayerParams& clean, const AttackConfig& attack,
                         LayerKind layer_kind);

/// Clean and corrupted copies of one layer's parameters with a constant-time
/// active selector. The clean buffer is never mutated after construction;
/// the corrupted buffer is (re)built by prepare().
class DoubleBuffer {
public:
  DoubleBuffer(std::string layer_name, LayerKind kind, LayerParams clean);

  /// Builds the corrupted buffer from the clean one and returns the wall
  /// clock time the preparation took.
  std::chrono::duration<double, std::milli> prepare(const AttackConfig& attack);

  /// Constant-time selector flip; no parameter copying happens here.
  void set_active(bool corrupted) { corrupted_active_ = corrupted; }
  bool corrupted_active() const { return corrupted_active_; }

  const LayerParams& select(bool fired) const { return fired ? corrupted_ : clean_; }
  const LayerParams& active() const { return select(corrupted_active_); }
  const LayerParams& clean() const { return clean_; }
  const LayerParams& corrupted() const { return corrupted_; }
  const std::string& layer_name() const { return layer_name_; }

private:
  std::string layer_name_;
  LayerKind kind_;
  LayerParams clean_;
  LayerParams corrupted_;
  bool corrupted_active_ = false;
};

}  // namespace dcnn
