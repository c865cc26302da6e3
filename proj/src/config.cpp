#include "dcnn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcnn/report.hpp"

namespace dcnn {

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    const std::size_t a = tok.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const std::size_t b = tok.find_last_not_of(" \t");
    out.push_back(tok.substr(a, b - a + 1));
  }
  return out;
}

std::vector<NodeCapability> ExperimentConfig::capabilities() const {
  std::vector<NodeCapability> caps(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    NodeCapability& c = caps[static_cast<std::size_t>(i)];
    if (!node_compute.empty()) c.compute_weight = node_compute[static_cast<std::size_t>(i)];
    if (!node_memory.empty()) c.memory_limit_bytes = node_memory[static_cast<std::size_t>(i)];
    c.trusted = (i == 0 || i == nodes - 1);
  }
  return caps;
}

void ExperimentConfig::validate() const {
  if (model != "lenet" && model != "alexnet") {
    throw ConfigError("unknown model '" + model + "' (want lenet|alexnet)");
  }
  if (dataset != "synthetic" && dataset != "mnist") {
    throw ConfigError("unknown dataset '" + dataset + "' (want synthetic|mnist)");
  }
  if (train_images < 1) throw ConfigError("train_images must be >= 1");
  if (test_images < 1) throw ConfigError("test_images must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (lr < 0.0) throw ConfigError("lr must be >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (nodes < 1) throw ConfigError("nodes must be >= 1");
  if (!node_compute.empty() && static_cast<int>(node_compute.size()) != nodes) {
    throw ConfigError("node_compute needs exactly " + std::to_string(nodes) + " entries");
  }
  for (double w : node_compute) {
    if (!(w > 0.0)) throw ConfigError("node_compute entries must be > 0");
  }
  if (!node_memory.empty() && static_cast<int>(node_memory.size()) != nodes) {
    throw ConfigError("node_memory needs exactly " + std::to_string(nodes) + " entries");
  }
  try {
    for (const auto& a : attacks) column_from_token(a);
  } catch (const ReportError& e) {
    throw ConfigError(e.what());
  }
}

namespace {

uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const uint64_t r = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for '" + key + "': " + v);
  }
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const int r = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for '" + key + "': " + v);
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("bad number for '" + key + "': " + v);
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  if (const char* env = std::getenv("TROJAN_PIPELINE_DATA")) cfg.data_dir = env;

  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const std::size_t x = s.find_first_not_of(" \t\r");
      if (x == std::string::npos) return std::string();
      const std::size_t y = s.find_last_not_of(" \t\r");
      return s.substr(x, y - x + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");

    if (key == "model") {
      cfg.model = val;
    } else if (key == "weights") {
      cfg.weights_path = val;
    } else if (key == "plan") {
      cfg.plan_path = val;
    } else if (key == "dataset") {
      cfg.dataset = val;
    } else if (key == "data_dir") {
      cfg.data_dir = val;
    } else if (key == "train_images") {
      cfg.train_images = parse_int(val, key);
    } else if (key == "test_images") {
      cfg.test_images = parse_int(val, key);
    } else if (key == "epochs") {
      cfg.epochs = parse_int(val, key);
    } else if (key == "lr") {
      cfg.lr = parse_double(val, key);
    } else if (key == "batch") {
      cfg.batch = parse_int(val, key);
    } else if (key == "seed") {
      cfg.seed = parse_u64(val, key);
    } else if (key == "nodes") {
      cfg.nodes = parse_int(val, key);
    } else if (key == "node_compute") {
      cfg.node_compute.clear();
      for (const auto& t : split_csv_list(val)) cfg.node_compute.push_back(parse_double(t, key));
    } else if (key == "node_memory") {
      cfg.node_memory.clear();
      for (const auto& t : split_csv_list(val)) {
        cfg.node_memory.push_back(t == "unlimited" ? std::numeric_limits<uint64_t>::max()
                                                   : parse_u64(t, key));
      }
    } else if (key == "attacks") {
      cfg.attacks.clear();
      try {
        for (const auto& t : split_csv_list(val)) cfg.attacks.push_back(column_from_token(t));
      } catch (const ReportError& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "layers") {
      cfg.layers = split_csv_list(val);
    } else if (key == "trigger") {
      try {
        cfg.trigger = TriggerSpec::parse(val);
      } catch (const AttackError& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "transport") {
      try {
        cfg.transport = transport_mode_from_name(val);
      } catch (const NodeError& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "out") {
      cfg.out_dir = val;
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return parse_config_text(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace dcnn
