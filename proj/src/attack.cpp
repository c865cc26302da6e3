#include "dcnn/attack.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace dcnn {

ParamStats compute_stats(const Tensor& t) {
  if (t.size() == 0) throw AttackError("cannot compute stats of an empty tensor");
  ParamStats s;
  s.count = t.size();
  s.min_value = t.data[0];
  s.max_value = t.data[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float v = t.data[i];
    sum += v;
    if (v > s.max_value) {
      s.max_value = v;
      s.max_index = i;
    }
    if (v < s.min_value) {
      s.min_value = v;
      s.min_index = i;
    }
  }
  s.mean = sum / static_cast<double>(s.count);
  double var = 0.0;
  for (float v : t.data) {
    const double d = static_cast<double>(v) - s.mean;
    var += d * d;
  }
  s.stddev = std::sqrt(var / static_cast<double>(s.count));
  return s;
}

std::string TriggerSpec::to_string() const {
  switch (mode) {
    case Mode::Always: return "always";
    case Mode::Never: return "never";
    case Mode::Periodic:
      return "periodic:" + std::to_string(period) + ":" + std::to_string(phase);
    case Mode::Window:
      return "window:" + std::to_string(win_start) + ":" + std::to_string(win_end);
  }
  return "?";
}

TriggerSpec TriggerSpec::parse(const std::string& s) {
  if (s == "always") return always();
  if (s == "never") return never();
  auto split = [](const std::string& in) {
    std::vector<std::string> parts;
    std::istringstream is(in);
    std::string p;
    while (std::getline(is, p, ':')) parts.push_back(p);
    return parts;
  };
  const auto parts = split(s);
  try {
    if (parts.size() == 3 && parts[0] == "periodic") {
      const uint64_t k = std::stoull(parts[1]);
      if (k == 0) throw AttackError("periodic trigger needs period >= 1");
      return periodic(k, std::stoull(parts[2]));
    }
    if (parts.size() == 3 && parts[0] == "window") {
      return window(std::stoull(parts[1]), std::stoull(parts[2]));
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  throw AttackError("bad trigger spec '" + s +
                    "' (want always | never | periodic:k:p | window:a:b)");
}

bool apply_trigger(TriggerSpec& trigger, uint64_t inference_id) {
  bool fired = false;
  switch (trigger.mode) {
    case TriggerSpec::Mode::Always: fired = true; break;
    case TriggerSpec::Mode::Never: fired = false; break;
    case TriggerSpec::Mode::Periodic:
      fired = inference_id % trigger.period == trigger.phase;
      break;
    case TriggerSpec::Mode::Window:
      fired = inference_id >= trigger.win_start && inference_id <= trigger.win_end;
      break;
  }
  if (fired) ++trigger.fired_count;
  return fired;
}

const char* attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::Scalar: return "scalar";
    case AttackKind::RandomScale: return "random";
    case AttackKind::PolarityFlip: return "flip";
    case AttackKind::MaxMinSwap: return "swap";
    case AttackKind::StatisticalResample: return "mean";
  }
  return "?";
}

std::string AttackConfig::describe() const {
  if (kind == AttackKind::Scalar) {
    std::ostringstream os;
    os << "scalar:" << scalar;
    return os.str();
  }
  return attack_kind_name(kind);
}

namespace {

// Deterministic standard-normal generator: Box-Muller over mt19937_64.
// std::normal_distribution is implementation-defined, which would break the
// bit-reproducibility contract for seeded attacks.
class GaussianGen {
public:
  explicit GaussianGen(uint64_t seed) : eng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();  // log(0) guard
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

private:
  double unit() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }

  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

constexpr uint64_t kSeedMix = 0x9E3779B97F4A7C15ull;

}  // namespace

Tensor scalar_attack(const Tensor& params, float s) {
  if (!std::isfinite(s)) throw AttackError("scalar attack needs a finite multiplier");
  Tensor out(params.shape);
  for (std::size_t i = 0; i < params.size(); ++i) out.data[i] = params.data[i] * s;
  return out;
}

Tensor random_scale_attack(const Tensor& params, uint64_t seed) {
  GaussianGen gen(seed);
  Tensor out(params.shape);
  for (std::size_t i = 0; i < params.size(); ++i) {
    // Multipliers are Gaussian within (0,1): N(0.5, 0.15^2) with rejection.
    double m = 0.5 + 0.15 * gen.next();
    while (!(m > 0.0 && m < 1.0)) m = 0.5 + 0.15 * gen.next();
    out.data[i] = static_cast<float>(params.data[i] * m);
  }
  return out;
}

Tensor polarity_flip(const Tensor& params) {
  Tensor out(params.shape);
  for (std::size_t i = 0; i < params.size(); ++i) out.data[i] = -params.data[i];
  return out;
}

namespace {

void swap_extremes_in_group(float* g, std::size_t n) {
  if (n < 2) return;
  std::size_t max_i = 0, min_i = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (g[i] > g[max_i]) max_i = i;
    if (g[i] < g[min_i]) min_i = i;
  }
  if (g[max_i] == g[min_i]) return;  // constant group
  std::swap(g[max_i], g[min_i]);
}

}  // namespace

Tensor minmax_swap(const Tensor& params, LayerKind layer_kind) {
  Tensor out = params;
  if (layer_kind == LayerKind::Conv2D) {
    // One swap group per output-channel filter.
    if (out.shape.size() != 4) {
      throw AttackError("swap attack on conv expects 4-D weights, got " + shape_str(out.shape));
    }
    const std::size_t groups = static_cast<std::size_t>(out.shape[0]);
    const std::size_t per = out.size() / groups;
    if (per < 2) throw AttackError("swap attack needs at least 2 elements per channel");
    for (std::size_t g = 0; g < groups; ++g) {
      swap_extremes_in_group(out.data.data() + g * per, per);
    }
  } else if (layer_kind == LayerKind::Dense) {
    if (out.size() < 2) throw AttackError("swap attack needs at least 2 elements");
    swap_extremes_in_group(out.data.data(), out.size());
  } else {
    throw AttackError(std::string("swap attack does not apply to layer kind ") +
                      layer_kind_name(layer_kind));
  }
  return out;
}

Tensor statistical_resample(const Tensor& params, uint64_t seed) {
  if (params.size() < 1) throw AttackError("resample needs a nonempty tensor");
  const ParamStats st = compute_stats(params);
  Tensor out(params.shape);
  if (st.stddev == 0.0 || params.size() < 2) {
    for (float& v : out.data) v = static_cast<float>(st.mean);
    return out;
  }
  GaussianGen gen(seed);
  std::vector<double> draws(params.size());
  double sum = 0.0;
  for (double& d : draws) {
    d = gen.next();
    sum += d;
  }
  const double dmean = sum / static_cast<double>(draws.size());
  double var = 0.0;
  for (double d : draws) var += (d - dmean) * (d - dmean);
  const double dstd = std::sqrt(var / static_cast<double>(draws.size()));
  if (dstd == 0.0) {
    for (float& v : out.data) v = static_cast<float>(st.mean);
    return out;
  }
  // Affine correction pins the sample moments to the originals exactly.
  const double scale = st.stddev / dstd;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out.data[i] = static_cast<float>(st.mean + (draws[i] - dmean) * scale);
  }
  return out;
}

LayerParams apply_attack(const LayerParams& clean, const AttackConfig& attack,
                         LayerKind layer_kind) {
  LayerParams out;
  switch (attack.kind) {
    case AttackKind::Scalar:
      out.weights = scalar_attack(clean.weights, attack.scalar);
      out.bias = scalar_attack(clean.bias, attack.scalar);
      break;
    case AttackKind::RandomScale:
      out.weights = random_scale_attack(clean.weights, attack.seed);
      out.bias = random_scale_attack(clean.bias, attack.seed ^ kSeedMix);
      break;
    case AttackKind::PolarityFlip:
      out.weights = polarity_flip(clean.weights);
      out.bias = polarity_flip(clean.bias);
      break;
    case AttackKind::MaxMinSwap:
      out.weights = minmax_swap(clean.weights, layer_kind);
      out.bias = clean.bias;
      break;
    case AttackKind::StatisticalResample:
      out.weights = statistical_resample(clean.weights, attack.seed);
      out.bias = statistical_resample(clean.bias, attack.seed ^ kSeedMix);
      break;
  }
  return out;
}

DoubleBuffer::DoubleBuffer(std::string layer_name, LayerKind kind, LayerParams clean)
    : layer_name_(std::move(layer_name)), kind_(kind), clean_(std::move(clean)),
      corrupted_(clean_) {
  if (!layer_has_params(kind_)) {
    throw AttackError("double buffer requires a parametric layer, got " +
                      std::string(layer_kind_name(kind_)) + " '" + layer_name_ + "'");
  }
}

std::chrono::duration<double, std::milli> DoubleBuffer::prepare(const AttackConfig& attack) {
  if (!attack.target_layer.empty() && attack.target_layer != layer_name_) {
    throw AttackError("attack targets layer '" + attack.target_layer +
                      "' but buffer holds '" + layer_name_ + "'");
  }
  const auto t0 = std::chrono::steady_clock::now();
  LayerParams next = apply_attack(clean_, attack, kind_);
  const auto t1 = std::chrono::steady_clock::now();
  corrupted_ = std::move(next);
  return t1 - t0;
}

}  // namespace dcnn
