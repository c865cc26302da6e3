#include "dcnn/partition.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcnn {

int PartitionPlan::owner_of(int layer) const {
  for (const auto& a : assignments) {
    if (!a.empty() && layer >= a.lo && layer <= a.hi) return a.node_index;
  }
  throw PartitionError("layer " + std::to_string(layer) + " not covered by plan");
}

void PartitionPlan::validate() const {
  if (assignments.empty()) throw PartitionError("plan has no assignments");
  int next = 0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto& a = assignments[i];
    if (a.node_index != static_cast<int>(i)) {
      throw PartitionError("plan node indices not consecutive");
    }
    if (a.empty()) continue;
    if (a.lo != next) {
      throw PartitionError("plan ranges not contiguous at layer " + std::to_string(a.lo));
    }
    if (a.hi < a.lo) throw PartitionError("plan range inverted");
    next = a.hi + 1;
  }
  if (next != layer_count) {
    throw PartitionError("plan covers " + std::to_string(next) + " of " +
                         std::to_string(layer_count) + " layers");
  }
}

LayerCost layer_cost(const LayerSpec& spec, const Shape& input_shape) {
  const Shape out = output_shape(spec, input_shape);
  const long long out_elems = static_cast<long long>(shape_elems(out));
  LayerCost c;
  c.output_bytes = 4 * out_elems;
  switch (spec.kind) {
    case LayerKind::Conv2D:
      c.flops = static_cast<long long>(spec.out_channels) * spec.in_channels * spec.kernel *
                spec.kernel * out[1] * out[2];
      c.param_bytes =
          4LL * (static_cast<long long>(spec.out_channels) * spec.in_channels * spec.kernel *
                     spec.kernel +
                 spec.out_channels);
      break;
    case LayerKind::Dense:
      c.flops = static_cast<long long>(spec.out_dim) * spec.in_dim;
      c.param_bytes = 4LL * (static_cast<long long>(spec.out_dim) * spec.in_dim + spec.out_dim);
      break;
    default:
      c.flops = out_elems;
      c.param_bytes = 0;
      break;
  }
  return c;
}

std::vector<LayerCost> model_costs(const ModelGraph& model) {
  std::vector<LayerCost> costs;
  costs.reserve(model.layers.size());
  for (int i = 0; i < model.layer_count(); ++i) {
    costs.push_back(layer_cost(model.layers[static_cast<std::size_t>(i)],
                               model.input_shape_of(i)));
  }
  return costs;
}

namespace {

struct PrefixSums {
  std::vector<long long> flops;  // flops[i] = sum of layers [0, i)
  std::vector<long long> bytes;

  long long range_flops(int lo, int hi) const {  // [lo, hi)
    return flops[static_cast<std::size_t>(hi)] - flops[static_cast<std::size_t>(lo)];
  }
  long long range_bytes(int lo, int hi) const {
    return bytes[static_cast<std::size_t>(hi)] - bytes[static_cast<std::size_t>(lo)];
  }
};

PrefixSums prefix_sums(const std::vector<LayerCost>& costs) {
  PrefixSums p;
  p.flops.assign(costs.size() + 1, 0);
  p.bytes.assign(costs.size() + 1, 0);
  for (std::size_t i = 0; i < costs.size(); ++i) {
    p.flops[i + 1] = p.flops[i] + costs[i].flops;
    p.bytes[i + 1] = p.bytes[i] + costs[i].param_bytes;
  }
  return p;
}

constexpr double kInfeasible = std::numeric_limits<double>::infinity();

RangeAssignment make_assignment(int node, int lo, int hi, const std::vector<LayerCost>& costs,
                                double weight) {
  RangeAssignment a;
  a.node_index = node;
  a.lo = lo;
  a.hi = hi;
  for (int i = lo; i <= hi; ++i) {
    a.total.flops += costs[static_cast<std::size_t>(i)].flops;
    a.total.param_bytes += costs[static_cast<std::size_t>(i)].param_bytes;
    a.total.output_bytes += costs[static_cast<std::size_t>(i)].output_bytes;
  }
  a.normalized_load = static_cast<double>(a.total.flops) / weight;
  return a;
}

}  // namespace

PartitionPlan partition(const ModelGraph& model, const std::vector<NodeCapability>& nodes) {
  if (nodes.empty()) throw PartitionError("at least one node required");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!(nodes[i].compute_weight > 0.0)) {
      throw PartitionError("node " + std::to_string(i) + " has non-positive compute weight");
    }
  }
  const std::vector<LayerCost> costs = model_costs(model);
  const int layer_n = static_cast<int>(costs.size());
  const int m = static_cast<int>(nodes.size());
  const PrefixSums ps = prefix_sums(costs);

  constexpr long long kMemCap = std::numeric_limits<long long>::max();
  long long total_mem = 0;
  for (const auto& n : nodes) {
    const long long lim =
        n.memory_limit_bytes > static_cast<uint64_t>(kMemCap)
            ? kMemCap
            : static_cast<long long>(n.memory_limit_bytes);
    total_mem = (total_mem > kMemCap - lim) ? kMemCap : total_mem + lim;
  }
  if (ps.bytes.back() > total_mem) {
    const std::size_t worst = static_cast<std::size_t>(
        std::min_element(nodes.begin(), nodes.end(),
                         [](const NodeCapability& a, const NodeCapability& b) {
                           return a.memory_limit_bytes < b.memory_limit_bytes;
                         }) -
        nodes.begin());
    throw PartitionError("total parameter bytes " + std::to_string(ps.bytes.back()) +
                         " exceed total node memory; node " + std::to_string(worst) +
                         " has the tightest limit");
  }

  // dp[k][i]: best bottleneck covering the first i layers with the first k
  // nodes (empty ranges allowed).
  std::vector<std::vector<double>> dp(static_cast<std::size_t>(m) + 1,
                                      std::vector<double>(static_cast<std::size_t>(layer_n) + 1,
                                                          kInfeasible));
  dp[0][0] = 0.0;
  for (int k = 1; k <= m; ++k) {
    const NodeCapability& cap = nodes[static_cast<std::size_t>(k - 1)];
    for (int i = 0; i <= layer_n; ++i) {
      double best = kInfeasible;
      for (int j = 0; j <= i; ++j) {  // node k-1 takes layers [j, i)
        if (dp[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j)] == kInfeasible) {
          continue;
        }
        if (static_cast<uint64_t>(ps.range_bytes(j, i)) > cap.memory_limit_bytes) continue;
        const double load = static_cast<double>(ps.range_flops(j, i)) / cap.compute_weight;
        best = std::min(best,
                        std::max(dp[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j)],
                                 load));
      }
      dp[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = best;
    }
  }

  const double bottleneck = dp[static_cast<std::size_t>(m)][static_cast<std::size_t>(layer_n)];
  if (bottleneck == kInfeasible) {
    // Name the node whose memory limit blocks every completion.
    int violator = 0;
    for (int k = 1; k <= m; ++k) {
      bool any = false;
      for (int i = 0; i <= layer_n && !any; ++i) {
        any = dp[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] != kInfeasible;
      }
      if (!any) {
        violator = k - 1;
        break;
      }
    }
    throw PartitionError("no feasible partition: node " + std::to_string(violator) +
                         " (memory limit " +
                         std::to_string(nodes[static_cast<std::size_t>(violator)]
                                            .memory_limit_bytes) +
                         " bytes) cannot take any workable layer range");
  }

  // Earliest-split reconstruction: scanning nodes left to right, give each
  // node the smallest range that still admits an optimal completion.
  PartitionPlan plan;
  plan.model_name = model.name;
  plan.layer_count = layer_n;
  plan.bottleneck = bottleneck;
  // suffix[k][i]: best bottleneck covering layers [i, L) with the last k nodes.
  std::vector<std::vector<double>> suffix(static_cast<std::size_t>(m) + 1,
                                          std::vector<double>(
                                              static_cast<std::size_t>(layer_n) + 1, kInfeasible));
  suffix[0][static_cast<std::size_t>(layer_n)] = 0.0;
  for (int k = 1; k <= m; ++k) {
    const NodeCapability& cap = nodes[static_cast<std::size_t>(m - k)];
    for (int i = layer_n; i >= 0; --i) {
      double best = kInfeasible;
      for (int j = i; j <= layer_n; ++j) {  // node m-k takes [i, j)
        if (suffix[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j)] == kInfeasible) {
          continue;
        }
        if (static_cast<uint64_t>(ps.range_bytes(i, j)) > cap.memory_limit_bytes) continue;
        const double load = static_cast<double>(ps.range_flops(i, j)) / cap.compute_weight;
        best = std::min(best,
                        std::max(suffix[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j)],
                                 load));
      }
      suffix[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = best;
    }
  }

  int start = 0;
  for (int k = 0; k < m; ++k) {
    const NodeCapability& cap = nodes[static_cast<std::size_t>(k)];
    const int remaining = m - k - 1;
    int chosen_end = -1;
    for (int end = start; end <= layer_n; ++end) {  // node k takes [start, end)
      if (static_cast<uint64_t>(ps.range_bytes(start, end)) > cap.memory_limit_bytes) continue;
      const double load = static_cast<double>(ps.range_flops(start, end)) / cap.compute_weight;
      if (load > bottleneck) break;  // loads only grow with end
      if (suffix[static_cast<std::size_t>(remaining)][static_cast<std::size_t>(end)] <=
          bottleneck) {
        chosen_end = end;
        break;
      }
    }
    if (chosen_end < 0) throw PartitionError("internal: reconstruction failed");
    plan.assignments.push_back(
        make_assignment(k, start, chosen_end - 1, costs, cap.compute_weight));
    start = chosen_end;
  }
  plan.validate();
  return plan;
}

PartitionPlan replan_for_target(const ModelGraph& model, int target_layer) {
  const int layer_n = model.layer_count();
  if (target_layer < 0 || target_layer >= layer_n) {
    throw PartitionError("target layer out of range");
  }
  if (target_layer == layer_n - 1) {
    throw PartitionError("cannot place the final layer on an interior node");
  }
  const std::vector<LayerCost> costs = model_costs(model);
  PartitionPlan plan;
  plan.model_name = model.name;
  plan.layer_count = layer_n;
  plan.assignments.push_back(make_assignment(0, 0, target_layer - 1, costs, 1.0));
  plan.assignments.push_back(make_assignment(1, target_layer, target_layer, costs, 1.0));
  plan.assignments.push_back(make_assignment(2, target_layer + 1, layer_n - 1, costs, 1.0));
  for (const auto& a : plan.assignments) {
    plan.bottleneck = std::max(plan.bottleneck, a.normalized_load);
  }
  plan.validate();
  return plan;
}

std::string plan_to_text(const PartitionPlan& plan, const ModelGraph& model) {
  std::ostringstream os;
  os << "DCNN-PLAN v1\n";
  os << "model " << plan.model_name << "\n";
  os << "layers " << plan.layer_count << "\n";
  os << "bottleneck " << plan.bottleneck << "\n";
  for (const auto& a : plan.assignments) {
    os << "node " << a.node_index;
    if (a.empty()) {
      os << " range empty";
    } else {
      os << " range " << a.lo << " " << a.hi;
    }
    const bool interior =
        a.node_index > 0 && a.node_index + 1 < static_cast<int>(plan.assignments.size());
    os << " trusted " << (interior ? 0 : 1);
    os << " flops " << a.total.flops << " param_bytes " << a.total.param_bytes
       << " boundary_bytes " << a.total.output_bytes;
    os << " names ";
    if (a.empty()) {
      os << "-";
    } else {
      for (int i = a.lo; i <= a.hi; ++i) {
        if (i > a.lo) os << ",";
        os << model.layers[static_cast<std::size_t>(i)].name;
      }
    }
    os << "\n";
  }
  return os.str();
}

PartitionPlan plan_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "DCNN-PLAN v1") {
    throw PartitionError("bad plan document magic");
  }
  PartitionPlan plan;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "model") {
      ls >> plan.model_name;
    } else if (tag == "layers") {
      ls >> plan.layer_count;
    } else if (tag == "bottleneck") {
      ls >> plan.bottleneck;
    } else if (tag == "node") {
      RangeAssignment a;
      std::string kw;
      ls >> a.node_index >> kw;
      if (kw != "range") throw PartitionError("bad plan node line: " + line);
      std::string lo_s;
      ls >> lo_s;
      if (lo_s == "empty") {
        a.lo = 0;
        a.hi = -1;
      } else {
        a.lo = std::stoi(lo_s);
        ls >> a.hi;
      }
      while (ls >> kw) {
        if (kw == "trusted") {
          int t;
          ls >> t;
        } else if (kw == "flops") {
          ls >> a.total.flops;
        } else if (kw == "param_bytes") {
          ls >> a.total.param_bytes;
        } else if (kw == "boundary_bytes") {
          ls >> a.total.output_bytes;
        } else if (kw == "names") {
          std::string rest;
          std::getline(ls, rest);
        }
      }
      plan.assignments.push_back(a);
    } else {
      throw PartitionError("unknown plan tag '" + tag + "'");
    }
  }
  plan.validate();
  return plan;
}

}  // namespace dcnn
