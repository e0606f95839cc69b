#pragma once

// Counterfactual forecasting: perturb future knowledge columns of one raw
// record, re-normalize, re-forecast, and report the scenario series side by
// side. Interventions are restricted to knowledge columns over the horizon.

#include <string>
#include <vector>

#include "kgf/metrics.hpp"

namespace kgf {

enum class InterventionKind { set_to, scale_by, copy_historical_mean };

inline InterventionKind intervention_kind_from_string(const std::string& s) {
  if (s == "set") return InterventionKind::set_to;
  if (s == "scale") return InterventionKind::scale_by;
  if (s == "hist-mean") return InterventionKind::copy_historical_mean;
  throw ConfigError("unknown intervention kind '" + s + "' (expected set|scale|hist-mean)");
}

struct Intervention {
  std::string column;
  InterventionKind kind = InterventionKind::scale_by;
  double value = 1.0;   // constant for set_to, factor for scale_by
  int64_t from = 1;     // 1-based horizon day, 1..L
  int64_t to = -1;      // inclusive; -1 means L
  int64_t hist_days = 7;  // averaging window for copy_historical_mean
};

struct Scenario {
  std::string name;
  std::vector<Intervention> interventions;
};

struct ScenarioForecast {
  std::string name;
  DenseMat forecast;  // L x D
};

// The real-price / seven-day-average / 20%-off triple.
inline std::vector<Scenario> price_study_scenarios(const std::string& price_column = "price") {
  Scenario real{"real_price", {}};
  Scenario daily{"daily_price",
                 {Intervention{price_column, InterventionKind::copy_historical_mean, 0.0, 1, -1, 7}}};
  Scenario discount{"discount_20off", {Intervention{price_column, InterventionKind::scale_by, 0.8, 1, -1, 7}}};
  return {real, daily, discount};
}

template <typename T>
std::vector<ScenarioForecast> what_if(const Model<T>& model, const SeriesRecord& raw_record, int64_t window_start,
                                      const std::vector<Scenario>& scenarios, bool normalized_output = false) {
  const FeatureSchema& schema = model.schema;
  int64_t T_hist = model.cfg.history_len, L = model.cfg.horizon;
  if (window_start < 0 || window_start + T_hist + L > raw_record.length())
    throw DataError("what_if: window start out of range for series '" + raw_record.id + "'");

  std::vector<ScenarioForecast> out;
  for (const auto& scenario : scenarios) {
    SeriesRecord record = raw_record;
    for (const auto& iv : scenario.interventions) {
      int64_t ci = schema.find_column(iv.column);
      if (ci < 0) throw ConfigError("what_if: unknown column '" + iv.column + "'");
      const Column& col = schema.columns[static_cast<size_t>(ci)];
      if (col.group != ColGroup::knowledge)
        throw ConfigError("what_if: intervention on statistic column '" + iv.column + "' refused");
      if (col.kind != ColKind::numeric && iv.kind != InterventionKind::set_to)
        throw ConfigError("what_if: id column '" + iv.column + "' only supports set interventions");

      int64_t to = iv.to < 0 ? L : iv.to;
      if (iv.from < 1 || to < iv.from || to > L)
        throw ConfigError("what_if: intervention range [" + std::to_string(iv.from) + "," + std::to_string(to) +
                          "] must lie within the horizon [1," + std::to_string(L) + "]");

      // knowledge-group position of the column
      int64_t kpos = 0;
      for (int64_t k : schema.know_columns()) {
        if (k == ci) break;
        ++kpos;
      }

      double hist_mean = 0.0;
      if (iv.kind == InterventionKind::copy_historical_mean) {
        if (iv.hist_days < 1 || iv.hist_days > T_hist)
          throw ConfigError("what_if: hist_days out of range");
        for (int64_t t = 0; t < iv.hist_days; ++t)
          hist_mean += record.knowledge.at(window_start + T_hist - 1 - t, kpos);
        hist_mean /= static_cast<double>(iv.hist_days);
      }

      for (int64_t day = iv.from; day <= to; ++day) {
        int64_t row = window_start + T_hist + day - 1;
        double& cell = record.knowledge.at(row, kpos);
        switch (iv.kind) {
          case InterventionKind::set_to:
            if (col.kind == ColKind::id) {
              int64_t v = std::llround(iv.value);
              if (v < 0 || v >= col.vocab_size)
                throw ConfigError("what_if: id value out of vocab for '" + iv.column + "'");
              cell = static_cast<double>(v);
            } else {
              cell = iv.value;
            }
            break;
          case InterventionKind::scale_by:
            cell *= iv.value;
            break;
          case InterventionKind::copy_historical_mean:
            cell = hist_mean;
            break;
        }
      }
    }

    auto normalized = normalize_record(record, schema, model.norm);
    auto window = build_window_input(normalized, schema, window_start);
    Tape<T> tape(false);
    auto preds = model.forward_window(tape, window, MaskPlan::naive(T_hist, L));

    ScenarioForecast sf;
    sf.name = scenario.name;
    sf.forecast = DenseMat(L, model.cfg.target_dim);
    auto target_names = schema.target_names();
    for (int64_t t = 0; t < L; ++t) {
      for (int64_t d = 0; d < model.cfg.target_dim; ++d) {
        double v = static_cast<double>(preds->at(t, d));
        if (!normalized_output) {
          const Column& col =
              schema.columns[static_cast<size_t>(schema.find_column(target_names[static_cast<size_t>(d)]))];
          v = denormalize_value(v, col, model.norm);
        }
        sf.forecast.at(t, d) = v;
      }
    }
    out.push_back(std::move(sf));
  }
  return out;
}

}  // namespace kgf
