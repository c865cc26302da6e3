#include "dcnn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

namespace dcnn {

const std::vector<std::string>& default_accuracy_columns() {
  static const std::vector<std::string> cols = {"clean", "0.6",  "0.8",  "1.2", "1.4",
                                                "Random", "Mean", "Flip", "Swap"};
  return cols;
}

const std::vector<std::string>& timing_columns() {
  static const std::vector<std::string> cols = {"Scalar", "Random", "Mean", "Flip", "Swap"};
  return cols;
}

AttackConfig attack_for_column(const std::string& column, const std::string& target_layer,
                               uint64_t seed, const TriggerSpec& trigger) {
  AttackConfig a;
  a.target_layer = target_layer;
  a.trigger = trigger;
  a.seed = seed;
  if (column == "Random") {
    a.kind = AttackKind::RandomScale;
  } else if (column == "Mean") {
    a.kind = AttackKind::StatisticalResample;
  } else if (column == "Flip") {
    a.kind = AttackKind::PolarityFlip;
  } else if (column == "Swap") {
    a.kind = AttackKind::MaxMinSwap;
  } else {
    try {
      std::size_t used = 0;
      const float s = std::stof(column, &used);
      if (used != column.size() || !std::isfinite(s)) throw std::invalid_argument(column);
      a.kind = AttackKind::Scalar;
      a.scalar = s;
    } catch (const std::exception&) {
      throw ReportError("unknown attack column '" + column + "'");
    }
  }
  return a;
}

std::string column_from_token(const std::string& token) {
  std::string t = token;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "random" || t == "randscale" || t == "random-scale") return "Random";
  if (t == "mean" || t == "resample" || t == "statistical") return "Mean";
  if (t == "flip" || t == "polarity") return "Flip";
  if (t == "swap" || t == "minmax") return "Swap";
  std::string num = t;
  if (t.rfind("scalar:", 0) == 0) num = t.substr(7);
  try {
    std::size_t used = 0;
    const double v = std::stod(num, &used);
    if (used != num.size() || !std::isfinite(v)) throw std::invalid_argument(num);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
  } catch (const std::exception&) {
    throw ReportError("unknown attack token '" + token + "'");
  }
}

const EvalCell& EvalReport::cell(const std::string& layer, const std::string& column) const {
  return const_cast<EvalReport*>(this)->cell(layer, column);
}

EvalCell& EvalReport::cell(const std::string& layer, const std::string& column) {
  const auto li = std::find(layer_names.begin(), layer_names.end(), layer);
  const auto ci = std::find(accuracy_columns.begin(), accuracy_columns.end(), column);
  if (li == layer_names.end() || ci == accuracy_columns.end()) {
    throw ReportError("no cell (" + layer + ", " + column + ") in report");
  }
  return accuracy[static_cast<std::size_t>(li - layer_names.begin())]
                 [static_cast<std::size_t>(ci - accuracy_columns.begin())];
}

std::optional<std::string> EvalReport::metadata_value(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void EvalReport::check_invariants() const {
  if (accuracy.size() != layer_names.size()) throw ReportError("accuracy row count mismatch");
  for (const auto& row : accuracy) {
    if (row.size() != accuracy_columns.size()) throw ReportError("accuracy column count mismatch");
    for (const auto& c : row) {
      if (!c.skipped && (c.accuracy < 0.0 || c.accuracy > 1.0)) {
        throw ReportError("accuracy outside [0,1]");
      }
    }
  }
  if (!timing_ms.empty() && timing_ms.size() != layer_names.size()) {
    throw ReportError("timing row count mismatch");
  }
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return -1.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string plan_summary(const PartitionPlan& plan) {
  std::ostringstream os;
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
    const auto& a = plan.assignments[i];
    if (i) os << ";";
    os << a.node_index << ":";
    if (a.empty()) {
      os << "empty";
    } else {
      os << "[" << a.lo << "," << a.hi << "]";
    }
  }
  return os.str();
}

std::string hex64(uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

EvalReport attack_sweep(const ModelGraph& model, const PartitionPlan& plan,
                        const Dataset& test_slice, const SweepOptions& options) {
  if (test_slice.size() == 0) throw ReportError("sweep needs a nonempty test slice");
  plan.validate();

  EvalReport rep;
  rep.model_name = model.name;
  rep.layer_names =
      options.layers.empty() ? model.parametric_layer_names() : options.layers;
  for (const auto& l : rep.layer_names) {
    if (!layer_has_params(model.layer_by_name(l).kind)) {
      throw ReportError("layer '" + l + "' has no parameters to attack");
    }
  }
  std::vector<std::string> attack_cols = options.attack_columns;
  if (attack_cols.empty()) {
    attack_cols.assign(default_accuracy_columns().begin() + 1, default_accuracy_columns().end());
  }
  rep.accuracy_columns.push_back("clean");
  rep.accuracy_columns.insert(rep.accuracy_columns.end(), attack_cols.begin(), attack_cols.end());
  rep.accuracy.assign(rep.layer_names.size(),
                      std::vector<EvalCell>(rep.accuracy_columns.size()));

  PipelineOptions popt;
  popt.transport = options.transport;

  // Clean baseline, once, on the unmodified plan.
  const PipelineRunResult clean_run = run_pipeline(plan, model, test_slice, {}, popt);
  const double clean_acc = pipeline_accuracy(clean_run, test_slice.labels);
  uint64_t failed_total = clean_run.failed_ids.size();
  for (std::size_t li = 0; li < rep.layer_names.size(); ++li) {
    EvalCell& c = rep.accuracy[li][0];
    c.accuracy = clean_acc;
    c.failed_inferences = clean_run.failed_ids.size();
  }

  std::vector<std::string> replanned_layers;
  std::vector<std::string> skipped_cells;
  for (std::size_t li = 0; li < rep.layer_names.size(); ++li) {
    const std::string& layer = rep.layer_names[li];
    const int layer_idx = model.layer_index(layer);
    const int owner = plan.owner_of(layer_idx);
    const bool interior = owner > 0 && owner + 1 < plan.node_count();
    PartitionPlan cell_plan = plan;
    bool replanned = false;
    std::string replan_error;
    if (!interior) {
      // The owner is a trusted endpoint; hand the layer to an interior node.
      try {
        cell_plan = replan_for_target(model, layer_idx);
        replanned = true;
      } catch (const PartitionError& e) {
        replan_error = e.what();
      }
    }
    if (replanned) replanned_layers.push_back(layer);

    for (std::size_t ci = 1; ci < rep.accuracy_columns.size(); ++ci) {
      const std::string& col = rep.accuracy_columns[ci];
      EvalCell& cell = rep.accuracy[li][ci];
      cell.replanned = replanned;
      if (!replan_error.empty()) {
        cell.skipped = true;
        cell.skip_reason = "no attackable node: " + replan_error;
        skipped_cells.push_back(layer + "/" + col);
        continue;
      }
      try {
        const AttackConfig atk =
            attack_for_column(col, layer, options.attack_seed, options.trigger);
        const PipelineRunResult run = run_pipeline(cell_plan, model, test_slice, {atk}, popt);
        cell.accuracy = pipeline_accuracy(run, test_slice.labels);
        cell.failed_inferences = run.failed_ids.size();
        failed_total += run.failed_ids.size();
      } catch (const std::exception& e) {
        cell.skipped = true;
        cell.skip_reason = e.what();
        skipped_cells.push_back(layer + "/" + col);
      }
    }
  }

  if (options.measure_timing) {
    rep.timing_ms.assign(rep.layer_names.size(),
                         std::vector<double>(timing_columns().size(), -1.0));
    for (std::size_t li = 0; li < rep.layer_names.size(); ++li) {
      const std::string& layer = rep.layer_names[li];
      const LayerSpec& spec = model.layer_by_name(layer);
      for (std::size_t ci = 0; ci < timing_columns().size(); ++ci) {
        const std::string& tc = timing_columns()[ci];
        const AttackConfig atk = attack_for_column(tc == "Scalar" ? "0.6" : tc, layer,
                                                   options.attack_seed, options.trigger);
        DoubleBuffer buffer(layer, spec.kind, model.params.at(layer));
        std::vector<double> reps;
        reps.reserve(static_cast<std::size_t>(options.timing_repetitions));
        for (int r = 0; r < options.timing_repetitions; ++r) {
          reps.push_back(buffer.prepare(atk).count());
        }
        rep.timing_ms[li][ci] = median_of(std::move(reps));
      }
    }
  }

  char ts[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm_buf{};
  gmtime_r(&now, &tm_buf);
  std::strftime(ts, sizeof(ts), "%Y%m%d-%H%M%S", &tm_buf);

  rep.metadata.emplace_back("model", model.name);
  rep.metadata.emplace_back("model_params_hash", hex64(model.params_hash()));
  rep.metadata.emplace_back("test_slice_hash", hex64(test_slice.content_hash()));
  rep.metadata.emplace_back("test_slice_size", std::to_string(test_slice.size()));
  rep.metadata.emplace_back("attack_seed", std::to_string(options.attack_seed));
  rep.metadata.emplace_back("trigger", options.trigger.to_string());
  rep.metadata.emplace_back("transport", transport_mode_name(options.transport));
  rep.metadata.emplace_back("plan", plan_summary(plan));
  rep.metadata.emplace_back("timing_method",
                            "median of " + std::to_string(options.timing_repetitions) +
                                " preparations, monotonic clock");
  rep.metadata.emplace_back("failed_inferences_total", std::to_string(failed_total));
  if (!replanned_layers.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < replanned_layers.size(); ++i) {
      if (i) joined += ",";
      joined += replanned_layers[i];
    }
    rep.metadata.emplace_back("replanned_layers", joined);
  }
  for (std::size_t li = 0; li < rep.layer_names.size(); ++li) {
    for (std::size_t ci = 0; ci < rep.accuracy_columns.size(); ++ci) {
      const EvalCell& c = rep.accuracy[li][ci];
      if (c.skipped) {
        rep.metadata.emplace_back(
            "skip." + rep.layer_names[li] + "." + rep.accuracy_columns[ci], c.skip_reason);
      }
      if (c.failed_inferences > 0) {
        rep.metadata.emplace_back(
            "failed." + rep.layer_names[li] + "." + rep.accuracy_columns[ci],
            std::to_string(c.failed_inferences));
      }
    }
  }
  rep.metadata.emplace_back("generated_utc", ts);
  rep.check_invariants();
  return rep;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string full_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string emit_tables(const EvalReport& report, TableFormat format) {
  report.check_invariants();
  std::ostringstream os;
  if (format == TableFormat::Csv) {
    os << "table,accuracy\n";
    os << "layer";
    for (const auto& c : report.accuracy_columns) os << "," << csv_escape(c);
    os << "\n";
    for (std::size_t li = 0; li < report.layer_names.size(); ++li) {
      os << csv_escape(report.layer_names[li]);
      for (std::size_t ci = 0; ci < report.accuracy_columns.size(); ++ci) {
        const EvalCell& c = report.accuracy[li][ci];
        os << ",";
        if (!c.skipped) os << full_double(c.accuracy);
      }
      os << "\n";
    }
    os << "\n";
    os << "table,timing_ms\n";
    os << "layer";
    for (const auto& c : timing_columns()) os << "," << c;
    os << "\n";
    for (std::size_t li = 0; li < report.layer_names.size(); ++li) {
      os << csv_escape(report.layer_names[li]);
      for (std::size_t ci = 0; ci < timing_columns().size(); ++ci) {
        const double v = report.timing_ms.empty() ? -1.0 : report.timing_ms[li][ci];
        os << ",";
        if (v >= 0.0) os << full_double(v);
      }
      os << "\n";
    }
    os << "\n";
    os << "table,metadata\n";
    os << "key,value\n";
    for (const auto& [k, v] : report.metadata) {
      os << csv_escape(k) << "," << csv_escape(v) << "\n";
    }
    return os.str();
  }

  // Markdown
  bool any_skipped = false;
  os << "# Attack sweep report: " << report.model_name << "\n\n";
  os << "## Accuracy by layer\n\n";
  os << "| layer |";
  for (const auto& c : report.accuracy_columns) os << " " << c << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < report.accuracy_columns.size(); ++i) os << "---|";
  os << "\n";
  for (std::size_t li = 0; li < report.layer_names.size(); ++li) {
    os << "| " << report.layer_names[li] << " |";
    for (std::size_t ci = 0; ci < report.accuracy_columns.size(); ++ci) {
      const EvalCell& c = report.accuracy[li][ci];
      if (c.skipped) {
        os << " — |";
        any_skipped = true;
      } else {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.4f", c.accuracy);
        os << " " << buf << " |";
      }
    }
    os << "\n";
  }
  if (any_skipped) {
    os << "\n— marks skipped cells:\n";
    for (std::size_t li = 0; li < report.layer_names.size(); ++li) {
      for (std::size_t ci = 0; ci < report.accuracy_columns.size(); ++ci) {
        const EvalCell& c = report.accuracy[li][ci];
        if (c.skipped) {
          os << "- " << report.layer_names[li] << "/" << report.accuracy_columns[ci] << ": "
             << c.skip_reason << "\n";
        }
      }
    }
  }
  if (!report.timing_ms.empty()) {
    os << "\n## Payload preparation time (ms)\n\n";
    os << "| layer |";
    for (const auto& c : timing_columns()) os << " " << c << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < timing_columns().size(); ++i) os << "---|";
    os << "\n";
    for (std::size_t li = 0; li < report.layer_names.size(); ++li) {
      os << "| " << report.layer_names[li] << " |";
      for (std::size_t ci = 0; ci < timing_columns().size(); ++ci) {
        const double v = report.timing_ms[li][ci];
        if (v < 0.0) {
          os << " — |";
        } else {
          char buf[24];
          std::snprintf(buf, sizeof(buf), "%.3f", v);
          os << " " << buf << " |";
        }
      }
      os << "\n";
    }
  }
  os << "\n## Metadata\n\n";
  os << "| key | value |\n|---|---|\n";
  for (const auto& [k, v] : report.metadata) {
    os << "| " << k << " | " << v << " |\n";
  }
  return os.str();
}

EvalReport parse_report_csv(const std::string& text) {
  EvalReport rep;
  std::istringstream is(text);
  std::string line;
  std::string section;
  std::vector<std::string> header;
  bool in_header = false;

  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = csv_split(line);
    if (f.size() == 2 && f[0] == "table") {
      section = f[1];
      in_header = true;
      continue;
    }
    if (in_header) {
      header = f;
      in_header = false;
      if (section == "accuracy") {
        if (header.empty() || header[0] != "layer") {
          throw ReportError("accuracy table missing layer header");
        }
        rep.accuracy_columns.assign(header.begin() + 1, header.end());
      }
      continue;
    }
    if (section == "accuracy") {
      rep.layer_names.push_back(f.at(0));
      std::vector<EvalCell> row;
      for (std::size_t i = 1; i < header.size(); ++i) {
        EvalCell c;
        if (i >= f.size() || f[i].empty()) {
          c.skipped = true;
        } else {
          c.accuracy = std::stod(f[i]);
        }
        row.push_back(c);
      }
      rep.accuracy.push_back(std::move(row));
    } else if (section == "timing_ms") {
      std::vector<double> row;
      for (std::size_t i = 1; i < header.size(); ++i) {
        row.push_back(i >= f.size() || f[i].empty() ? -1.0 : std::stod(f[i]));
      }
      rep.timing_ms.push_back(std::move(row));
    } else if (section == "metadata") {
      rep.metadata.emplace_back(f.at(0), f.size() > 1 ? f[1] : "");
    } else {
      throw ReportError("row outside any table section: " + line);
    }
  }
  if (rep.layer_names.empty()) throw ReportError("no accuracy table found");
  // Restore per-cell annotations from the metadata block.
  if (auto model = rep.metadata_value("model")) rep.model_name = *model;
  for (std::size_t li = 0; li < rep.layer_names.size(); ++li) {
    for (std::size_t ci = 0; ci < rep.accuracy_columns.size(); ++ci) {
      EvalCell& c = rep.accuracy[li][ci];
      const std::string suffix = rep.layer_names[li] + "." + rep.accuracy_columns[ci];
      if (auto reason = rep.metadata_value("skip." + suffix)) {
        c.skipped = true;
        c.skip_reason = *reason;
      }
      if (auto failed = rep.metadata_value("failed." + suffix)) {
        c.failed_inferences = std::stoull(*failed);
      }
    }
  }
  if (auto replanned = rep.metadata_value("replanned_layers")) {
    std::istringstream rs(*replanned);
    std::string l;
    while (std::getline(rs, l, ',')) {
      const auto it = std::find(rep.layer_names.begin(), rep.layer_names.end(), l);
      if (it == rep.layer_names.end()) continue;
      const std::size_t li = static_cast<std::size_t>(it - rep.layer_names.begin());
      for (std::size_t ci = 1; ci < rep.accuracy_columns.size(); ++ci) {
        rep.accuracy[li][ci].replanned = true;
      }
    }
  }
  rep.check_invariants();
  return rep;
}

EvalReport merge_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ReportError("nothing to merge");
  EvalReport out = reports.front();
  for (std::size_t r = 1; r < reports.size(); ++r) {
    const EvalReport& rep = reports[r];
    for (const auto& col : rep.accuracy_columns) {
      if (std::find(out.accuracy_columns.begin(), out.accuracy_columns.end(), col) ==
          out.accuracy_columns.end()) {
        out.accuracy_columns.push_back(col);
        for (auto& row : out.accuracy) row.push_back(EvalCell{0.0, true, "not swept", false, 0});
      }
    }
    for (std::size_t li = 0; li < rep.layer_names.size(); ++li) {
      const std::string& layer = rep.layer_names[li];
      auto it = std::find(out.layer_names.begin(), out.layer_names.end(), layer);
      if (it == out.layer_names.end()) {
        out.layer_names.push_back(layer);
        out.accuracy.emplace_back(out.accuracy_columns.size(),
                                  EvalCell{0.0, true, "not swept", false, 0});
        if (!out.timing_ms.empty() || !rep.timing_ms.empty()) {
          out.timing_ms.emplace_back(timing_columns().size(), -1.0);
        }
        it = out.layer_names.end() - 1;
      }
      const std::size_t oi = static_cast<std::size_t>(it - out.layer_names.begin());
      for (std::size_t ci = 0; ci < rep.accuracy_columns.size(); ++ci) {
        const EvalCell& c = rep.accuracy[li][ci];
        if (c.skipped) continue;
        out.cell(layer, rep.accuracy_columns[ci]) = c;
      }
      if (!rep.timing_ms.empty()) {
        if (out.timing_ms.empty()) {
          out.timing_ms.assign(out.layer_names.size(),
                               std::vector<double>(timing_columns().size(), -1.0));
        }
        for (std::size_t ci = 0; ci < timing_columns().size(); ++ci) {
          if (rep.timing_ms[li][ci] >= 0.0) out.timing_ms[oi][ci] = rep.timing_ms[li][ci];
        }
      }
    }
    out.metadata.emplace_back("merged_report_" + std::to_string(r),
                              rep.metadata_value("generated_utc").value_or("?"));
  }
  out.check_invariants();
  return out;
}

std::string report_file_stem(const EvalReport& report) {
  const std::string ts = report.metadata_value("generated_utc").value_or("undated");
  return "report_" + report.model_name + "_" + ts;
}

}  // namespace dcnn
