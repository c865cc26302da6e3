#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dcnn/pipeline.hpp"
#include "dcnn/train.hpp"

namespace dcnn {

class ReportError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The canonical accuracy columns, in table order (clean baseline first).
const std::vector<std::string>& default_accuracy_columns();
/// Timing table columns (attack kinds).
const std::vector<std::string>& timing_columns();

/// Builds the attack for one accuracy column ("0.6", "Random", "Mean",
/// "Flip", "Swap", or a free-valued "scalar:<x>").
AttackConfig attack_for_column(const std::string& column, const std::string& target_layer,
                               uint64_t seed, const TriggerSpec& trigger);
/// Canonical column name for a CLI token like "flip" or "scalar:0.6".
std::string column_from_token(const std::string& token);

struct EvalCell {
  double accuracy = 0.0;
  bool skipped = false;
  std::string skip_reason;
  bool replanned = false;
  uint64_t failed_inferences = 0;
};

/// Accuracy matrix (layers x columns), payload-preparation timing matrix and
/// the metadata needed to reproduce the run.
struct EvalReport {
  std::string model_name;
  std::vector<std::string> layer_names;        // parametric layers, network order
  std::vector<std::string> accuracy_columns;   // "clean" first
  std::vector<std::vector<EvalCell>> accuracy; // [layer][column]
  std::vector<std::vector<double>> timing_ms;  // [layer][timing column]; -1 = not measured
  std::vector<std::pair<std::string, std::string>> metadata;

  const EvalCell& cell(const std::string& layer, const std::string& column) const;
  EvalCell& cell(const std::string& layer, const std::string& column);
  std::optional<std::string> metadata_value(const std::string& key) const;
  void check_invariants() const;
};

struct SweepOptions {
  std::vector<std::string> attack_columns;  // default: the eight attack columns
  std::vector<std::string> layers;          // default: all parametric layers
  TriggerSpec trigger = TriggerSpec::always();
  uint64_t attack_seed = 42;
  TransportMode transport = TransportMode::Inproc;
  bool measure_timing = true;
  int timing_repetitions = 5;
};

/// Runs every (attack, layer) cell through the distributed pipeline, records
/// the clean baseline once, and measures payload preparation times. Layers
/// owned by trusted endpoint nodes are re-planned onto an interior node and
/// flagged in the metadata.
EvalReport attack_sweep(const ModelGraph& model, const PartitionPlan& plan,
                        const Dataset& test_slice, const SweepOptions& options = {});

enum class TableFormat { Csv, Markdown };

/// Renders the accuracy table, the timing table and the metadata block as
/// one document. CSV round-trips through parse_report_csv bit-exactly.
std::string emit_tables(const EvalReport& report, TableFormat format);
EvalReport parse_report_csv(const std::string& text);

/// Later reports win on conflicting cells; layers/columns are unioned.
EvalReport merge_reports(const std::vector<EvalReport>& reports);

/// "report_<model>_<timestamp>" stem used for output files.
std::string report_file_stem(const EvalReport& report);

}  // namespace dcnn
