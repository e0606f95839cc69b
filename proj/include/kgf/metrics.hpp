#pragma once

// Stride-1 window evaluation with the naive plan: per-target MSE/MAE plus
// their equal-weight average, in normalized target space by default.

#include <string>
#include <vector>

#include "kgf/model.hpp"

namespace kgf {

struct TargetMetric {
  std::string name;
  double mse = 0.0;
  double mae = 0.0;
};

struct MetricReport {
  std::string split;
  int64_t window_count = 0;
  std::vector<TargetMetric> per_target;
  double avg_mse = 0.0;
  double avg_mae = 0.0;
  std::string fingerprint;
  bool denormalized = false;
};

template <typename T>
std::string model_fingerprint(const Model<T>& model) {
  return hex64(fnv1a64(model.cfg.to_json().dump() + model.schema.hash()));
}

// Evaluation over pre-built windows. Pure function of (model, windows):
// repeated calls return bit-identical reports.
template <typename T>
MetricReport evaluate_windows(const Model<T>& model, const std::vector<WindowInput>& windows,
                              const std::string& split_name, bool denormalize = false) {
  if (windows.empty()) throw DataError("evaluate: empty split '" + split_name + "'");
  int64_t D = model.cfg.target_dim;
  int64_t L = model.cfg.horizon;
  MaskPlan plan = MaskPlan::naive(model.cfg.history_len, L);
  auto target_names = model.schema.target_names();

  std::vector<double> sq(static_cast<size_t>(D), 0.0), ab(static_cast<size_t>(D), 0.0);
  for (const auto& w : windows) {
    if (!w.labels_valid)
      throw DataError("evaluate: window of series '" + (w.rec ? w.rec->id : std::string("?")) +
                      "' has unobserved horizon targets");
    Tape<T> tape(false);
    auto preds = model.forward_window(tape, w, plan);
    for (int64_t t = 0; t < L; ++t) {
      for (int64_t d = 0; d < D; ++d) {
        double p = static_cast<double>(preds->at(t, d));
        double y = w.labels.at(t, d);
        if (denormalize) {
          const Column& col = model.schema.columns[static_cast<size_t>(
              model.schema.find_column(target_names[static_cast<size_t>(d)]))];
          p = denormalize_value(p, col, model.norm);
          y = denormalize_value(y, col, model.norm);
        }
        double e = p - y;
        sq[static_cast<size_t>(d)] += e * e;
        ab[static_cast<size_t>(d)] += std::fabs(e);
      }
    }
  }

  MetricReport report;
  report.split = split_name;
  report.window_count = static_cast<int64_t>(windows.size());
  report.denormalized = denormalize;
  report.fingerprint = model_fingerprint(model);
  double denom = static_cast<double>(windows.size()) * static_cast<double>(L);
  double mse_sum = 0.0, mae_sum = 0.0;
  for (int64_t d = 0; d < D; ++d) {
    TargetMetric tm;
    tm.name = target_names[static_cast<size_t>(d)];
    tm.mse = sq[static_cast<size_t>(d)] / denom;
    tm.mae = ab[static_cast<size_t>(d)] / denom;
    mse_sum += tm.mse;
    mae_sum += tm.mae;
    report.per_target.push_back(tm);
  }
  report.avg_mse = mse_sum / static_cast<double>(D);
  report.avg_mae = mae_sum / static_cast<double>(D);
  return report;
}

// Evaluation over every stride-1 window of a normalized record list.
template <typename T>
MetricReport evaluate(const Model<T>& model, const std::vector<SeriesRecord>& normalized_records,
                      const std::string& split_name, bool denormalize = false, int64_t stride = 1) {
  std::vector<WindowInput> windows;
  for (const auto& ref : make_windows(normalized_records, model.schema, stride)) {
    windows.push_back(build_window_input(*ref.rec, model.schema, ref.start));
  }
  return evaluate_windows(model, windows, split_name, denormalize);
}

}  // namespace kgf
