// trojan-pipeline: desk-scale simulator of distributed CNN inference with
// stealthy weight-perturbation attacks on intermediary pipeline nodes.
//
// Subcommands: train, partition, run, sweep, report. Every run is
// reproducible from its config document; all randomness is seeded there.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dcnn/config.hpp"
#include "dcnn/dataset.hpp"
#include "dcnn/model.hpp"
#include "dcnn/report.hpp"
#include "dcnn/train.hpp"
#include "dcnn/weights_io.hpp"

namespace {

// Exit codes; kept distinct so scripts can tell failure classes apart.
constexpr int kOk = 0;
constexpr int kBadConfig = 2;
constexpr int kMissingFile = 3;
constexpr int kInfeasiblePartition = 4;
constexpr int kRuntimeFailure = 5;

std::atomic<bool> g_interrupted{false};

void on_sigint(int) { g_interrupted.store(true); }

int fail(int code, const std::string& message) {
  std::fprintf(stderr, "error(%d): %s\n", code, message.c_str());
  return code;
}

struct CliOverrides {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> nodes;
  std::string attacks;
  std::string layers;
  std::string trigger;
  std::string transport;
  std::string out;
  std::string weights;
  std::string plan;
  std::string dataset;
  std::string data_dir;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch;
  std::optional<int> train_images;
  std::optional<int> test_images;
  std::optional<int> count;
};

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "Experiment config file (key = value lines)");
  cmd->add_option("--seed", o.seed, "Master seed for init/training/attacks");
  cmd->add_option("--nodes", o.nodes, "Number of pipeline nodes");
  cmd->add_option("--attacks", o.attacks,
                  "Comma list: 0.6,0.8,1.2,1.4,scalar:<x>,random,mean,flip,swap");
  cmd->add_option("--layers", o.layers, "Comma list of target layers (default: all parametric)");
  cmd->add_option("--trigger", o.trigger, "always | never | periodic:k:p | window:a:b");
  cmd->add_option("--transport", o.transport, "inproc | tcp (loopback sockets)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--weights", o.weights, "Weight file path");
  cmd->add_option("--plan", o.plan, "Plan document path");
  cmd->add_option("--dataset", o.dataset, "synthetic | mnist");
  cmd->add_option("--data-dir", o.data_dir,
                  "Dataset root (default: $TROJAN_PIPELINE_DATA) with MNIST IDX files");
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--lr", o.lr, "SGD learning rate");
  cmd->add_option("--batch", o.batch, "Minibatch size");
  cmd->add_option("--train-images", o.train_images, "Training slice size");
  cmd->add_option("--test-images", o.test_images, "Test slice size");
}

dcnn::ExperimentConfig resolve_config(const CliOverrides& o) {
  dcnn::ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg = dcnn::parse_config_file(o.config_path);
  } else if (const char* env = std::getenv("TROJAN_PIPELINE_DATA")) {
    cfg.data_dir = env;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.nodes) cfg.nodes = *o.nodes;
  if (!o.attacks.empty()) {
    cfg.attacks.clear();
    for (const auto& t : dcnn::split_csv_list(o.attacks)) {
      cfg.attacks.push_back(dcnn::column_from_token(t));
    }
  }
  if (!o.layers.empty()) cfg.layers = dcnn::split_csv_list(o.layers);
  if (!o.trigger.empty()) cfg.trigger = dcnn::TriggerSpec::parse(o.trigger);
  if (!o.transport.empty()) cfg.transport = dcnn::transport_mode_from_name(o.transport);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.weights.empty()) cfg.weights_path = o.weights;
  if (!o.plan.empty()) cfg.plan_path = o.plan;
  if (!o.dataset.empty()) cfg.dataset = o.dataset;
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.lr) cfg.lr = *o.lr;
  if (o.batch) cfg.batch = *o.batch;
  if (o.train_images) cfg.train_images = *o.train_images;
  if (o.test_images) cfg.test_images = *o.test_images;
  cfg.validate();
  return cfg;
}

std::string default_weights_path(const dcnn::ExperimentConfig& cfg) {
  return cfg.weights_path.empty() ? cfg.out_dir + "/" + cfg.model + ".weights"
                                  : cfg.weights_path;
}

dcnn::Dataset load_train_set(const dcnn::ExperimentConfig& cfg) {
  if (cfg.dataset == "mnist") {
    const std::string dir = cfg.data_dir.empty() ? "data" : cfg.data_dir;
    return dcnn::load_mnist(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte")
        .slice(0, cfg.train_images);
  }
  return dcnn::synthetic_digits(cfg.train_images, cfg.seed);
}

dcnn::Dataset load_test_set(const dcnn::ExperimentConfig& cfg) {
  if (cfg.dataset == "mnist") {
    const std::string dir = cfg.data_dir.empty() ? "data" : cfg.data_dir;
    return dcnn::load_mnist(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte")
        .slice(0, cfg.test_images);
  }
  // Disjoint seed stream from the training slice.
  return dcnn::synthetic_digits(cfg.test_images, cfg.seed ^ 0x5851F42D4C957F2Dull);
}

dcnn::ModelGraph build_model(const dcnn::ExperimentConfig& cfg) {
  return cfg.model == "lenet" ? dcnn::build_lenet(cfg.seed)
                              : dcnn::build_alexnet_shape(cfg.seed);
}

int cmd_train(const CliOverrides& o) {
  const dcnn::ExperimentConfig cfg = resolve_config(o);
  std::filesystem::create_directories(cfg.out_dir);
  const dcnn::Dataset train_set = load_train_set(cfg);
  const dcnn::Dataset test_set = load_test_set(cfg);

  dcnn::ModelGraph model = build_model(cfg);
  dcnn::TrainOptions topt;
  topt.epochs = cfg.epochs;
  topt.lr = static_cast<float>(cfg.lr);
  topt.batch = cfg.batch;
  topt.seed = cfg.seed;

  dcnn::TrainLog log;
  model = dcnn::train(std::move(model), train_set, topt, &log);
  const double acc = dcnn::evaluate(model, test_set);

  const std::string wpath = default_weights_path(cfg);
  dcnn::save_model(model, wpath);

  std::ofstream tl(cfg.out_dir + "/training_log.txt");
  tl << "model " << cfg.model << "\nseed " << cfg.seed << "\nepochs " << cfg.epochs << "\nlr "
     << cfg.lr << "\nbatch " << cfg.batch << "\ntrain_images " << train_set.size()
     << "\ndataset " << cfg.dataset << "\n";
  for (std::size_t e = 0; e < log.epoch_mean_loss.size(); ++e) {
    tl << "epoch " << e << " mean_loss " << log.epoch_mean_loss[e] << "\n";
  }
  tl << "holdout_accuracy " << acc << "\n";

  std::printf("trained %s on %d images (%s), holdout accuracy %.4f\n", cfg.model.c_str(),
              train_set.size(), cfg.dataset.c_str(), acc);
  std::printf("weights: %s\n", wpath.c_str());
  return kOk;
}

int cmd_partition(const CliOverrides& o) {
  const dcnn::ExperimentConfig cfg = resolve_config(o);
  std::filesystem::create_directories(cfg.out_dir);
  dcnn::ModelGraph model;
  if (!cfg.weights_path.empty()) {
    model = dcnn::load_model(cfg.weights_path);
  } else {
    model = build_model(cfg);
  }
  const dcnn::PartitionPlan plan = dcnn::partition(model, cfg.capabilities());
  const std::string doc = dcnn::plan_to_text(plan, model);
  const std::string ppath =
      cfg.plan_path.empty() ? cfg.out_dir + "/" + cfg.model + ".plan" : cfg.plan_path;
  std::ofstream pf(ppath);
  pf << doc;
  std::fputs(doc.c_str(), stdout);
  std::printf("plan: %s\n", ppath.c_str());
  return kOk;
}

int cmd_run(const CliOverrides& o) {
  const dcnn::ExperimentConfig cfg = resolve_config(o);
  const std::string wpath = default_weights_path(cfg);
  const dcnn::ModelGraph model = dcnn::load_model(wpath);

  dcnn::PartitionPlan plan;
  if (!cfg.plan_path.empty()) {
    std::ifstream pf(cfg.plan_path);
    if (!pf) throw dcnn::ModelIoError("cannot open plan '" + cfg.plan_path + "'");
    std::string text((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
    plan = dcnn::plan_from_text(text);
  } else {
    plan = dcnn::partition(model, cfg.capabilities());
  }

  const int count = o.count.value_or(cfg.test_images);
  const dcnn::Dataset slice = load_test_set(cfg).slice(0, count);

  std::vector<dcnn::AttackConfig> attacks;
  if (!cfg.attacks.empty()) {
    if (cfg.layers.size() != 1 || cfg.attacks.size() != 1) {
      throw dcnn::ConfigError("run supports exactly one attack on one layer; use sweep for "
                              "the full matrix");
    }
    attacks.push_back(
        dcnn::attack_for_column(cfg.attacks[0], cfg.layers[0], cfg.seed, cfg.trigger));
  }

  dcnn::PipelineOptions popt;
  popt.transport = cfg.transport;
  popt.cancel = &g_interrupted;
  const dcnn::PipelineRunResult run = dcnn::run_pipeline(plan, model, slice, attacks, popt);

  std::printf("id,predicted,probabilities\n");
  for (const auto& r : run.results) {
    std::printf("%llu,%d,", static_cast<unsigned long long>(r.inference_id), r.predicted_class);
    for (std::size_t i = 0; i < r.probabilities.size(); ++i) {
      std::printf(i ? " %.6f" : "%.6f", r.probabilities[i]);
    }
    std::printf("\n");
  }
  if (!run.failed_ids.empty()) {
    std::printf("failed_inferences %zu\n", run.failed_ids.size());
  }
  const double acc = dcnn::pipeline_accuracy(run, slice.labels);
  std::printf("accuracy %.4f over %zu results\n", acc, run.results.size());
  return kOk;
}

int cmd_sweep(const CliOverrides& o) {
  const dcnn::ExperimentConfig cfg = resolve_config(o);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string wpath = default_weights_path(cfg);
  const dcnn::ModelGraph model = dcnn::load_model(wpath);
  const dcnn::PartitionPlan plan = dcnn::partition(model, cfg.capabilities());
  const dcnn::Dataset slice = load_test_set(cfg);

  dcnn::SweepOptions sopt;
  sopt.attack_columns = cfg.attacks;
  sopt.layers = cfg.layers;
  sopt.trigger = cfg.trigger;
  sopt.attack_seed = cfg.seed;
  sopt.transport = cfg.transport;
  const dcnn::EvalReport report = dcnn::attack_sweep(model, plan, slice, sopt);

  const std::string stem = cfg.out_dir + "/" + dcnn::report_file_stem(report);
  {
    std::ofstream cf(stem + ".csv");
    cf << dcnn::emit_tables(report, dcnn::TableFormat::Csv);
  }
  {
    std::ofstream mf(stem + ".md");
    mf << dcnn::emit_tables(report, dcnn::TableFormat::Markdown);
  }
  std::fputs(dcnn::emit_tables(report, dcnn::TableFormat::Markdown).c_str(), stdout);
  std::printf("\nreport: %s.csv / %s.md\n", stem.c_str(), stem.c_str());
  return kOk;
}

int cmd_report(const std::vector<std::string>& paths, const CliOverrides& o) {
  if (paths.empty()) throw dcnn::ConfigError("report needs at least one CSV path");
  std::vector<dcnn::EvalReport> reports;
  for (const auto& p : paths) {
    std::ifstream f(p);
    if (!f) throw dcnn::ModelIoError("cannot open report '" + p + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    reports.push_back(dcnn::parse_report_csv(text));
  }
  const dcnn::EvalReport merged = dcnn::merge_reports(reports);
  const std::string md = dcnn::emit_tables(merged, dcnn::TableFormat::Markdown);
  std::fputs(md.c_str(), stdout);
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    const std::string stem = o.out + "/" + dcnn::report_file_stem(merged);
    std::ofstream cf(stem + ".csv");
    cf << dcnn::emit_tables(merged, dcnn::TableFormat::Csv);
    std::ofstream mf(stem + ".md");
    mf << md;
    std::printf("\nmerged report: %s.csv / %s.md\n", stem.c_str(), stem.c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);

  CLI::App app{"Distributed CNN inference pipeline with trojan-style weight attacks"};
  app.require_subcommand(1);

  CliOverrides o;
  std::vector<std::string> report_paths;

  CLI::App* train = app.add_subcommand("train", "Train the model and write a weight file");
  CLI::App* part = app.add_subcommand("partition", "Compute and print a layer-to-node plan");
  CLI::App* run = app.add_subcommand("run", "Run inference through the node pipeline");
  CLI::App* sweep =
      app.add_subcommand("sweep", "Sweep every attack over every layer and emit report tables");
  CLI::App* report = app.add_subcommand("report", "Merge and render saved report CSVs");
  for (CLI::App* c : {train, part, run, sweep, report}) add_common_flags(c, o);
  run->add_option("--count", o.count, "Number of images to push through the pipeline");
  report->add_option("paths", report_paths, "Report CSV files to merge");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(o);
    if (part->parsed()) return cmd_partition(o);
    if (run->parsed()) return cmd_run(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (report->parsed()) return cmd_report(report_paths, o);
  } catch (const dcnn::ConfigError& e) {
    return fail(kBadConfig, e.what());
  } catch (const dcnn::DatasetError& e) {
    return fail(kMissingFile, e.what());
  } catch (const dcnn::ModelIoError& e) {
    return fail(kMissingFile, e.what());
  } catch (const dcnn::PartitionError& e) {
    return fail(kInfeasiblePartition, e.what());
  } catch (const dcnn::AttackError& e) {
    return fail(kBadConfig, e.what());
  } catch (const dcnn::ReportError& e) {
    return fail(kBadConfig, e.what());
  } catch (const std::exception& e) {
    return fail(kRuntimeFailure, e.what());
  }
  return fail(kBadConfig, "no subcommand given");
}
