#pragma once

// Plot-ready CSV emitters (consumed offline; byte-stable across reruns) and
// the ablation / sensitivity-sweep experiment runners.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "kgf/attention.hpp"
#include "kgf/checkpoint.hpp"
#include "kgf/metrics.hpp"
#include "kgf/train.hpp"
#include "kgf/whatif.hpp"

namespace kgf {

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file: " + path);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline void emit_history_csv(const std::string& path, const std::vector<EpochStat>& history) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : history)
    rows.push_back({std::to_string(e.epoch), fmt_g17(e.train_loss), fmt_g17(e.val_loss)});
  write_csv(path, {"epoch", "train_loss", "val_loss"}, rows);
}

inline void emit_metrics_csv(const std::string& path, const MetricReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& tm : report.per_target) rows.push_back({tm.name, fmt_g17(tm.mse), fmt_g17(tm.mae)});
  rows.push_back({"Avg", fmt_g17(report.avg_mse), fmt_g17(report.avg_mae)});
  write_csv(path, {"target", "mse", "mae"}, rows);
}

inline void emit_whatif_csv(const std::string& path, const std::vector<ScenarioForecast>& scenarios,
                            const std::vector<std::string>& target_names, int64_t history_len) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : scenarios) {
    for (int64_t t = 0; t < s.forecast.rows; ++t) {
      for (int64_t d = 0; d < s.forecast.cols; ++d) {
        rows.push_back({s.name, std::to_string(history_len + 1 + t), target_names[static_cast<size_t>(d)],
                        fmt_g17(s.forecast.at(t, d))});
      }
    }
  }
  write_csv(path, {"scenario", "t", "target", "value"}, rows);
}

inline void emit_attention_hist_csv(const std::string& path, const AttentionStatsReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.hist) {
    rows.push_back({std::to_string(r.layer), std::to_string(r.head), r.branch, fmt_g17(r.lo), fmt_g17(r.hi),
                    std::to_string(r.count)});
  }
  write_csv(path, {"layer", "head", "branch", "bin_lo", "bin_hi", "count"}, rows);
}

inline void emit_attention_proportion_csv(const std::string& path, const AttentionStatsReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [layer, prop] : report.proportion) rows.push_back({std::to_string(layer), fmt_g17(prop)});
  write_csv(path, {"layer", "proportion"}, rows);
}

// -- ablation -----------------------------------------------------------------

struct AblationVariant {
  std::string name;
  LayerKind kind = LayerKind::ali;
  bool use_future = true;
};

// full model, future knowledge hidden, guided attention replaced by vanilla
inline std::vector<AblationVariant> standard_ablation_variants() {
  return {{"full", LayerKind::ali, true},
          {"wo_future", LayerKind::ali, false},
          {"wo_guided_attention", LayerKind::vsa, true}};
}

// Prepared data shared across experiment arms: one split, normalization from
// the training split only, windows prebuilt.
struct ExperimentData {
  FeatureSchema schema;
  NormStats stats;
  std::vector<WindowInput> train_w, val_w, test_w;
  std::vector<SeriesRecord> test_records;  // normalized, for what-if studies
};

inline std::vector<WindowInput> build_all_windows(const std::vector<SeriesRecord>& records,
                                                  const FeatureSchema& schema, int64_t stride = 1) {
  std::vector<WindowInput> out;
  for (const auto& ref : make_windows(records, schema, stride))
    out.push_back(build_window_input(*ref.rec, schema, ref.start));
  return out;
}

inline ExperimentData prepare_experiment(const std::vector<SeriesRecord>& raw_records, const FeatureSchema& schema,
                                         const std::vector<double>& ratios, SplitMode mode, uint64_t split_seed) {
  ExperimentData data;
  data.schema = schema;
  auto split = split_records(raw_records, ratios, mode, split_seed, schema);
  if (split.train.empty()) throw DataError("experiment: empty training split");
  data.stats = compute_norm_stats(split.train, schema);
  auto train_n = normalize_records(split.train, schema, data.stats);
  auto val_n = normalize_records(split.val, schema, data.stats);
  data.test_records = normalize_records(split.test, schema, data.stats);
  data.train_w = build_all_windows(train_n, schema);
  data.val_w = build_all_windows(val_n, schema);
  data.test_w = build_all_windows(data.test_records, schema);
  return data;
}

template <typename T>
struct AblationOutcome {
  std::string variant;
  MetricReport report;
  TrainSummary summary;
  Model<T> model;
};

// Trains one model per variant from a shared seed and data, evaluates each
// on the test windows. Variants are independent jobs; n_workers > 1 runs
// them concurrently without changing any result.
template <typename T>
std::vector<AblationOutcome<T>> run_ablation(const ExperimentData& data, const ModelConfig& base,
                                             const TrainConfig& tc,
                                             const std::vector<AblationVariant>& variants, int n_workers = 1) {
  std::vector<AblationOutcome<T>> out(variants.size());
  parallel_for_jobs(variants.size(), n_workers, [&](size_t i) {
    const auto& variant = variants[i];
    ModelConfig cfg = base;
    cfg.layer_kind = variant.kind;
    cfg.use_future_knowledge = variant.use_future;
    auto model = Model<T>::init(cfg, data.schema, tc.seed);
    model.norm = data.stats;
    auto summary = train_model(model, data.train_w, data.val_w, tc);
    auto report = evaluate_windows(model, data.test_w, "test");
    out[i] = AblationOutcome<T>{variant.name, std::move(report), std::move(summary), std::move(model)};
  });
  return out;
}

template <typename T>
void emit_ablation_csv(const std::string& path, const std::vector<AblationOutcome<T>>& outcomes) {
  if (outcomes.empty()) throw DataError("ablation: nothing to report");
  std::vector<std::string> header{"target"};
  for (const auto& o : outcomes) {
    header.push_back(o.variant + "_mse");
    header.push_back(o.variant + "_mae");
  }
  std::vector<std::vector<std::string>> rows;
  size_t n_targets = outcomes[0].report.per_target.size();
  for (size_t t = 0; t < n_targets; ++t) {
    std::vector<std::string> row{outcomes[0].report.per_target[t].name};
    for (const auto& o : outcomes) {
      row.push_back(fmt_g17(o.report.per_target[t].mse));
      row.push_back(fmt_g17(o.report.per_target[t].mae));
    }
    rows.push_back(row);
  }
  std::vector<std::string> avg{"Avg"};
  for (const auto& o : outcomes) {
    avg.push_back(fmt_g17(o.report.avg_mse));
    avg.push_back(fmt_g17(o.report.avg_mae));
  }
  rows.push_back(avg);
  write_csv(path, header, rows);
}

// Console table, targets as rows and variants as columns.
template <typename T>
void render_ablation_table(std::ostream& os, const std::vector<AblationOutcome<T>>& outcomes) {
  os << std::left << std::setw(10) << "target";
  for (const auto& o : outcomes) os << std::setw(24) << (o.variant + " (mse/mae)");
  os << '\n';
  size_t n_targets = outcomes.empty() ? 0 : outcomes[0].report.per_target.size();
  auto row = [&](const std::string& name, auto metric_of) {
    os << std::left << std::setw(10) << name;
    for (const auto& o : outcomes) {
      auto [mse, mae] = metric_of(o);
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.4f / %.4f", mse, mae);
      os << std::setw(24) << buf;
    }
    os << '\n';
  };
  for (size_t t = 0; t < n_targets; ++t) {
    row(outcomes[0].report.per_target[t].name, [&](const AblationOutcome<T>& o) {
      return std::pair<double, double>(o.report.per_target[t].mse, o.report.per_target[t].mae);
    });
  }
  row("Avg", [](const AblationOutcome<T>& o) { return std::pair<double, double>(o.report.avg_mse, o.report.avg_mae); });
}

// -- sensitivity sweep ---------------------------------------------------------

struct SweepRow {
  double value = 0.0;
  double avg_mse = 0.0;
  double avg_mae = 0.0;
};

// One full-model training per value of `param` (n_layers or p2), shared seed.
template <typename T>
std::vector<SweepRow> run_sweep(const ExperimentData& data, const ModelConfig& base, const TrainConfig& tc,
                                const std::string& param, const std::vector<double>& values, int n_workers = 1) {
  if (param != "n_layers" && param != "p2") throw ConfigError("sweep: param must be n_layers or p2");
  std::vector<SweepRow> rows(values.size());
  parallel_for_jobs(values.size(), n_workers, [&](size_t i) {
    ModelConfig cfg = base;
    TrainConfig t = tc;
    if (param == "n_layers") {
      cfg.n_layers = static_cast<int64_t>(values[i]);
    } else {
      t.p2 = values[i];
      t.p1 = 1.0 - values[i];
    }
    auto model = Model<T>::init(cfg, data.schema, t.seed);
    model.norm = data.stats;
    train_model(model, data.train_w, data.val_w, t);
    auto report = evaluate_windows(model, data.test_w, "test");
    rows[i] = SweepRow{values[i], report.avg_mse, report.avg_mae};
  });
  return rows;
}

inline void emit_sweep_csv(const std::string& path, const std::string& param, const std::vector<SweepRow>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) out.push_back({fmt_g17(r.value), fmt_g17(r.avg_mse), fmt_g17(r.avg_mae)});
  write_csv(path, {param, "avg_mse", "avg_mae"}, out);
}

// -- attention statistics over data --------------------------------------------

template <typename T>
AttentionStatsReport collect_attention_stats(const Model<T>& model, const std::vector<WindowInput>& windows,
                                             int64_t max_windows = 16, int64_t bins = 50) {
  if (windows.empty()) throw DataError("attention stats: no windows");
  MaskPlan plan = MaskPlan::naive(model.cfg.history_len, model.cfg.horizon);
  std::vector<std::vector<AttentionMaps>> recorded;
  int64_t n = std::min<int64_t>(max_windows, static_cast<int64_t>(windows.size()));
  for (int64_t i = 0; i < n; ++i) {
    Tape<T> tape(false);
    std::vector<AttentionMaps> maps;
    model.forward_window(tape, windows[static_cast<size_t>(i)], plan, &maps);
    recorded.push_back(std::move(maps));
  }
  return extract_attention_stats(recorded, bins);
}

}  // namespace kgf
