#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcnn/attack.hpp"
#include "dcnn/partition.hpp"
#include "dcnn/pipeline.hpp"

namespace dcnn {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Experiment description, read from a `key = value` document (# comments,
/// blank lines allowed). Unknown keys are rejected.
struct ExperimentConfig {
  std::string model = "lenet";
  std::string weights_path;
  std::string plan_path;
  std::string dataset = "synthetic";  // "synthetic" | "mnist"
  std::string data_dir;               // defaults to $TROJAN_PIPELINE_DATA
  int train_images = 10000;
  int test_images = 1000;
  int epochs = 2;
  double lr = 0.05;
  int batch = 32;
  uint64_t seed = 42;
  int nodes = 3;
  std::vector<double> node_compute;      // empty: all 1.0
  std::vector<uint64_t> node_memory;     // empty: unlimited
  std::vector<std::string> attacks;      // canonical column names; empty: all
  std::vector<std::string> layers;       // target layers; empty: all parametric
  TriggerSpec trigger = TriggerSpec::always();
  TransportMode transport = TransportMode::Inproc;
  std::string out_dir = "out";

  std::vector<NodeCapability> capabilities() const;
  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Comma-separated list helpers used by both the config parser and the CLI.
std::vector<std::string> split_csv_list(const std::string& s);

}  // namespace dcnn
