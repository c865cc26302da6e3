#include "dcnn/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <thread>

namespace dcnn {

const char* transport_mode_name(TransportMode m) {
  return m == TransportMode::Inproc ? "inproc" : "tcp";
}

TransportMode transport_mode_from_name(const std::string& s) {
  if (s == "inproc") return TransportMode::Inproc;
  if (s == "tcp") return TransportMode::Tcp;
  throw NodeError("unknown transport '" + s + "' (want inproc|tcp)");
}

namespace {

std::vector<NodeConfig> build_configs(const PartitionPlan& plan,
                                      const std::vector<AttackConfig>& attacks,
                                      const ModelGraph& model) {
  const int m = plan.node_count();
  std::vector<NodeConfig> configs(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    NodeConfig& c = configs[static_cast<std::size_t>(i)];
    const RangeAssignment& a = plan.assignments[static_cast<std::size_t>(i)];
    c.node_index = i;
    c.node_count = m;
    c.range_lo = a.lo;
    c.range_hi = a.hi;
    c.trusted = (i == 0 || i == m - 1);
  }
  for (const AttackConfig& atk : attacks) {
    const int layer = model.layer_index(atk.target_layer);
    const int owner = plan.owner_of(layer);
    NodeConfig& c = configs[static_cast<std::size_t>(owner)];
    if (c.attack.has_value()) {
      throw NodeError("node " + std::to_string(owner) + " already carries an attack");
    }
    c.attack = atk;
  }
  for (auto& c : configs) c.validate();
  return configs;
}

struct WorkerHarness {
  NodeConfig config;
  ModelSlice slice;
  WorkerStats stats;
  std::thread thread;
};

}  // namespace

PipelineRunResult run_pipeline(const PartitionPlan& plan, const ModelGraph& model,
                               const Dataset& slice,
                               const std::vector<AttackConfig>& attack_assignments,
                               const PipelineOptions& options) {
  plan.validate();
  if (plan.layer_count != model.layer_count()) {
    throw NodeError("plan covers " + std::to_string(plan.layer_count) + " layers but model has " +
                    std::to_string(model.layer_count()));
  }
  std::vector<NodeConfig> configs = build_configs(plan, attack_assignments, model);
  const int m = plan.node_count();

  PipelineRunResult out;
  if (slice.size() == 0) {
    out.worker_stats.resize(static_cast<std::size_t>(m));
    return out;
  }

  std::vector<WorkerHarness> workers(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    workers[static_cast<std::size_t>(i)].config = configs[static_cast<std::size_t>(i)];
    workers[static_cast<std::size_t>(i)].slice =
        slice_model(model, configs[static_cast<std::size_t>(i)].range_lo,
                    configs[static_cast<std::size_t>(i)].range_hi);
  }

  std::unique_ptr<ByteStream> coord_out;
  std::unique_ptr<ByteStream> coord_in;

  if (options.transport == TransportMode::Inproc) {
    // Pipe i feeds worker i; pipe m returns results to the coordinator.
    std::vector<std::shared_ptr<InprocPipe>> pipes;
    for (int i = 0; i <= m; ++i) pipes.push_back(std::make_shared<InprocPipe>());
    for (int i = 0; i < m; ++i) {
      auto& w = workers[static_cast<std::size_t>(i)];
      auto in = pipes[static_cast<std::size_t>(i)];
      auto outp = pipes[static_cast<std::size_t>(i) + 1];
      w.thread = std::thread([&w, in, outp]() {
        InprocStream s_in(in, nullptr);
        InprocStream s_out(nullptr, outp);
        try {
          w.stats = serve_node(w.config, w.slice, s_in, s_out);
        } catch (const std::exception& e) {
          std::fprintf(stderr, "[node %d] worker stopped: %s\n", w.config.node_index, e.what());
          s_out.close_send();
        }
      });
    }
    coord_out = std::make_unique<InprocStream>(nullptr, pipes.front());
    coord_in = std::make_unique<InprocStream>(pipes.back(), nullptr);
  } else {
    // All listeners are bound before any worker starts, so connects in the
    // chain cannot race the accepts.
    static constexpr std::chrono::milliseconds kSetupTimeout{10'000};
    std::vector<std::shared_ptr<TcpListener>> listeners;
    for (int i = 0; i < m; ++i) listeners.push_back(std::make_shared<TcpListener>());
    auto return_listener = std::make_shared<TcpListener>();
    for (int i = 0; i < m; ++i) {
      auto& w = workers[static_cast<std::size_t>(i)];
      w.config.listen_port = listeners[static_cast<std::size_t>(i)]->port();
      w.config.next_port = (i + 1 < m) ? listeners[static_cast<std::size_t>(i) + 1]->port()
                                       : return_listener->port();
      auto listener = listeners[static_cast<std::size_t>(i)];
      w.thread = std::thread([&w, listener]() {
        try {
          auto s_in = listener->accept(kSetupTimeout);
          auto s_out = tcp_connect(w.config.next_host, w.config.next_port, kSetupTimeout);
          w.stats = serve_node(w.config, w.slice, *s_in, *s_out);
        } catch (const std::exception& e) {
          std::fprintf(stderr, "[node %d] worker stopped: %s\n", w.config.node_index, e.what());
        }
      });
    }
    coord_out = tcp_connect("127.0.0.1", workers.front().config.listen_port, kSetupTimeout);
    coord_in = return_listener->accept(kSetupTimeout);
  }

  // Feed images with ascending inference ids, draining results to keep at
  // most max_in_flight outstanding.
  std::set<uint64_t> outstanding;
  std::map<uint64_t, InferenceResult> results;
  bool stream_dead = false;

  auto drain_one = [&]() -> bool {
    FrameRecvResult r;
    try {
      r = recv_frame(*coord_in, options.per_image_timeout);
    } catch (const FrameError& e) {
      std::fprintf(stderr, "[coordinator] dropped result frame: %s\n", e.what());
      return true;  // frame lost; its id stays outstanding
    }
    if (r.status == RecvStatus::Timeout) return false;
    if (r.status == RecvStatus::Eof) {
      stream_dead = true;
      return false;
    }
    const BlobFrame& f = *r.frame;
    if (!outstanding.count(f.inference_id)) {
      std::fprintf(stderr, "[coordinator] unexpected result id %llu\n",
                   static_cast<unsigned long long>(f.inference_id));
      return true;
    }
    InferenceResult res;
    res.inference_id = f.inference_id;
    res.probabilities = f.payload;
    res.predicted_class =
        argmax_lowest(f.payload.data(), static_cast<int>(f.payload.size()));
    results.emplace(f.inference_id, std::move(res));
    outstanding.erase(f.inference_id);
    return true;
  };

  const int total = slice.size();
  for (int idx = 0; idx < total; ++idx) {
    if (options.cancel != nullptr && options.cancel->load()) break;
    if (stream_dead) {
      out.failed_ids.push_back(static_cast<uint64_t>(idx));
      continue;
    }
    while (static_cast<int>(outstanding.size()) >= options.max_in_flight && !stream_dead) {
      if (!drain_one()) break;
    }
    const uint64_t id = static_cast<uint64_t>(idx);
    try {
      send_frame(*coord_out, BlobFrame::from_tensor(id, 0, slice.image(idx)));
      outstanding.insert(id);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "[coordinator] send failed for id %llu: %s\n",
                   static_cast<unsigned long long>(id), e.what());
      out.failed_ids.push_back(id);
      stream_dead = true;
    }
  }
  coord_out->close_send();

  while (!outstanding.empty() && !stream_dead) {
    if (!drain_one()) break;  // timeout: give up on what is left in flight
  }
  for (uint64_t id : outstanding) out.failed_ids.push_back(id);

  for (auto& w : workers) w.thread.join();

  out.results.reserve(results.size());
  for (auto& [id, res] : results) out.results.push_back(std::move(res));
  std::sort(out.failed_ids.begin(), out.failed_ids.end());
  out.worker_stats.reserve(workers.size());
  for (const auto& w : workers) out.worker_stats.push_back(w.stats);
  return out;
}

double pipeline_accuracy(const PipelineRunResult& run, const std::vector<int>& labels) {
  int correct = 0, counted = 0;
  for (const auto& r : run.results) {
    if (r.inference_id >= labels.size()) continue;
    ++counted;
    if (r.predicted_class == labels[static_cast<std::size_t>(r.inference_id)]) ++correct;
  }
  if (counted == 0) return 0.0;
  return static_cast<double>(correct) / counted;
}

}  // namespace dcnn
