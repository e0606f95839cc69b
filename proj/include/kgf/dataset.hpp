#pragma once

// Dataset ingestion and preparation: CSV/JSONL loading with validation,
// normalization from training-split statistics, splitting, and stride-based
// window extraction into model-ready inputs.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgf/common.hpp"
#include "kgf/schema.hpp"

namespace kgf {

// One product's aligned sequences. Knowledge covers every timestep;
// statistics stop L steps earlier (future statistics are never inputs).
// Target values are kept for the whole span so horizon rows can be scored.
struct SeriesRecord {
  std::string id;
  int64_t start_ts = 0;
  DenseMat statistics;  // (len - L) x n_stat, schema statistic-column order
  DenseMat knowledge;   // len x n_know, schema knowledge-column order
  DenseMat targets;     // len x D, NaN where unobserved (last L rows only)

  int64_t length() const { return knowledge.rows; }
};

inline void validate_record_counts(const SeriesRecord& r, const FeatureSchema& schema) {
  int64_t expected_stats = std::max<int64_t>(0, r.knowledge.rows - schema.horizon);
  if (r.statistics.rows != expected_stats) {
    throw DataError("record '" + r.id + "': statistic rows " + std::to_string(r.statistics.rows) +
                    " != knowledge rows - L = " + std::to_string(expected_stats));
  }
  if (r.targets.rows != r.knowledge.rows) {
    throw DataError("record '" + r.id + "': target rows must cover the full span");
  }
}

struct LoadReport {
  int64_t n_loaded = 0;
  int64_t n_skipped_short = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline double parse_numeric_cell(const std::string& cell, const Column& col, const std::string& where) {
  char* end = nullptr;
  double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    throw DataError(where + ": non-numeric value '" + cell + "' in numeric column '" + col.name + "'");
  }
  return v;
}

inline double parse_id_cell(const std::string& cell, const Column& col, const std::string& where) {
  char* end = nullptr;
  long long v = std::strtoll(cell.c_str(), &end, 10);
  if (end == cell.c_str() || *end != '\0') {
    throw DataError(where + ": non-integer value '" + cell + "' in id column '" + col.name + "'");
  }
  if (v < 0 || v >= col.vocab_size) {
    throw DataError(where + ": id " + std::to_string(v) + " out of vocab [0," + std::to_string(col.vocab_size) +
                    ") in column '" + col.name + "'");
  }
  return static_cast<double>(v);
}

struct RawRow {
  int64_t ts = 0;
  std::vector<std::optional<double>> values;  // schema column order
};

using RawSeries = std::map<std::string, std::vector<RawRow>>;

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline RawSeries read_raw_csv(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) return {};
  auto header = split_csv_line(line);
  std::map<std::string, size_t> pos;
  for (size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;
  for (const char* req : {"series_id", "timestamp"}) {
    if (pos.find(req) == pos.end()) throw DataError(path + ": missing required column '" + std::string(req) + "'");
  }
  std::vector<size_t> col_pos(schema.columns.size());
  for (size_t c = 0; c < schema.columns.size(); ++c) {
    auto it = pos.find(schema.columns[c].name);
    if (it == pos.end()) throw DataError(path + ": missing schema column '" + schema.columns[c].name + "'");
    col_pos[c] = it->second;
  }
  RawSeries series;
  int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    }
    std::string where = path + ":" + std::to_string(line_no);
    RawRow row;
    const std::string& ts_cell = cells[pos["timestamp"]];
    char* end = nullptr;
    row.ts = std::strtoll(ts_cell.c_str(), &end, 10);
    if (end == ts_cell.c_str() || *end != '\0') throw DataError(where + ": bad timestamp '" + ts_cell + "'");
    row.values.resize(schema.columns.size());
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      const std::string& cell = cells[col_pos[c]];
      if (cell.empty()) continue;
      const Column& col = schema.columns[c];
      row.values[c] = col.kind == ColKind::numeric ? parse_numeric_cell(cell, col, where)
                                                   : parse_id_cell(cell, col, where);
    }
    series[cells[pos["series_id"]]].push_back(std::move(row));
  }
  return series;
}

inline RawSeries read_raw_jsonl(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  RawSeries series;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(where + ": malformed JSON line");
    if (!j.contains("series_id") || !j.contains("timestamp"))
      throw DataError(where + ": missing series_id/timestamp");
    RawRow row;
    row.ts = j["timestamp"].get<int64_t>();
    row.values.resize(schema.columns.size());
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      const Column& col = schema.columns[c];
      if (!j.contains(col.name) || j[col.name].is_null()) continue;
      double v = j[col.name].get<double>();
      if (col.kind == ColKind::id) {
        int64_t iv = static_cast<int64_t>(v);
        if (static_cast<double>(iv) != v || iv < 0 || iv >= col.vocab_size)
          throw DataError(where + ": id " + std::to_string(v) + " out of vocab in column '" + col.name + "'");
      }
      row.values[c] = v;
    }
    series[j["series_id"].get<std::string>()].push_back(std::move(row));
  }
  return series;
}

}  // namespace detail

// Loads and validates a CSV (default) or JSONL dataset. Rows are sorted per
// series by timestamp; gaps and duplicates are rejected. Series shorter than
// T+L are skipped and counted. Statistic cells may be absent only in the
// final L rows of a series; missing target cells there load as NaN.
inline std::vector<SeriesRecord> load_dataset(const std::string& path, const FeatureSchema& schema,
                                              LoadReport* report = nullptr) {
  schema.validate();
  bool jsonl = path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
  auto raw = jsonl ? detail::read_raw_jsonl(path, schema) : detail::read_raw_csv(path, schema);
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  if (raw.empty()) rep.warnings.push_back(path + ": no data rows");

  auto stat_cols = schema.stat_columns();
  auto know_cols = schema.know_columns();
  std::vector<int64_t> target_cols;
  for (size_t i = 0; i < schema.columns.size(); ++i)
    if (schema.columns[i].is_target) target_cols.push_back(static_cast<int64_t>(i));

  std::vector<SeriesRecord> records;
  int64_t min_len = schema.history_len + schema.horizon;
  for (auto& [sid, rows] : raw) {
    std::sort(rows.begin(), rows.end(), [](const detail::RawRow& a, const detail::RawRow& b) { return a.ts < b.ts; });
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].ts == rows[i - 1].ts)
        throw DataError("series '" + sid + "': duplicate timestamp " + std::to_string(rows[i].ts));
      if (rows[i].ts != rows[i - 1].ts + 1)
        throw DataError("series '" + sid + "': gap between timestamps " + std::to_string(rows[i - 1].ts) + " and " +
                        std::to_string(rows[i].ts));
    }
    int64_t len = static_cast<int64_t>(rows.size());
    if (len < min_len) {
      ++rep.n_skipped_short;
      continue;
    }
    SeriesRecord rec;
    rec.id = sid;
    rec.start_ts = rows.front().ts;
    int64_t stat_rows = len - schema.horizon;
    rec.statistics = DenseMat(stat_rows, static_cast<int64_t>(stat_cols.size()));
    rec.knowledge = DenseMat(len, static_cast<int64_t>(know_cols.size()));
    rec.targets = DenseMat(len, static_cast<int64_t>(target_cols.size()));
    for (int64_t t = 0; t < len; ++t) {
      const auto& row = rows[static_cast<size_t>(t)];
      for (size_t j = 0; j < know_cols.size(); ++j) {
        const auto& cell = row.values[static_cast<size_t>(know_cols[j])];
        if (!cell.has_value()) {
          throw DataError("series '" + sid + "' t=" + std::to_string(row.ts) + ": missing knowledge value in '" +
                          schema.columns[static_cast<size_t>(know_cols[j])].name + "'");
        }
        rec.knowledge.at(t, static_cast<int64_t>(j)) = *cell;
      }
      if (t < stat_rows) {
        for (size_t j = 0; j < stat_cols.size(); ++j) {
          const auto& cell = row.values[static_cast<size_t>(stat_cols[j])];
          if (!cell.has_value()) {
            throw DataError("series '" + sid + "' t=" + std::to_string(row.ts) + ": missing statistic value in '" +
                            schema.columns[static_cast<size_t>(stat_cols[j])].name + "'");
          }
          rec.statistics.at(t, static_cast<int64_t>(j)) = *cell;
        }
      }
      for (size_t j = 0; j < target_cols.size(); ++j) {
        const auto& cell = row.values[static_cast<size_t>(target_cols[j])];
        if (cell.has_value()) {
          rec.targets.at(t, static_cast<int64_t>(j)) = *cell;
        } else if (t < stat_rows) {
          throw DataError("series '" + sid + "' t=" + std::to_string(row.ts) + ": missing target value in '" +
                          schema.columns[static_cast<size_t>(target_cols[j])].name + "'");
        } else {
          rec.targets.at(t, static_cast<int64_t>(j)) = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
    validate_record_counts(rec, schema);
    records.push_back(std::move(rec));
  }
  rep.n_loaded = static_cast<int64_t>(records.size());
  return records;
}

// -- normalization ----------------------------------------------------------

inline double apply_transform(double v, Transform t) {
  if (t == Transform::log1p) {
    if (v < 0.0) throw DataError("log1p transform: negative value " + fmt_g17(v));
    return std::log1p(v);
  }
  return v;
}
inline double invert_transform(double v, Transform t) { return t == Transform::log1p ? std::expm1(v) : v; }

// Per-column moments computed on the training split, post-transform.
struct NormStats {
  struct ColStats {
    double mean = 0.0;
    double std = 1.0;
  };
  std::map<std::string, ColStats> by_column;
  std::vector<std::string> warnings;

  const ColStats& require(const std::string& name) const {
    auto it = by_column.find(name);
    if (it == by_column.end()) throw DataError("NormStats: no statistics for column '" + name + "'");
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, cs] : by_column) j[name] = {{"mean", cs.mean}, {"std", cs.std}};
    return j;
  }
  static NormStats from_json(const nlohmann::json& j) {
    NormStats n;
    for (auto it = j.begin(); it != j.end(); ++it) {
      n.by_column[it.key()] = ColStats{it.value().at("mean").get<double>(), it.value().at("std").get<double>()};
    }
    return n;
  }
};

// Mean/std per numeric column over the given (training) records. Statistic
// columns are measured over history rows, knowledge columns over all rows.
// Zero-variance columns get std = 1 and a warning.
inline NormStats compute_norm_stats(const std::vector<SeriesRecord>& train, const FeatureSchema& schema) {
  if (train.empty()) throw DataError("compute_norm_stats: empty training split");
  NormStats out;
  auto accumulate_group = [&](ColGroup g) {
    auto numeric = schema.numeric_of(g);
    for (int64_t pos : numeric) {
      const Column& col = schema.column_in_group(g, pos);
      double sum = 0.0, sumsq = 0.0;
      int64_t n = 0;
      for (const auto& rec : train) {
        const DenseMat& m = g == ColGroup::statistic ? rec.statistics : rec.knowledge;
        for (int64_t r = 0; r < m.rows; ++r) {
          double v = apply_transform(m.at(r, pos), col.transform);
          sum += v;
          sumsq += v * v;
          ++n;
        }
      }
      if (n == 0) throw DataError("compute_norm_stats: no values for column '" + col.name + "'");
      double mean = sum / static_cast<double>(n);
      double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
      double stddev = std::sqrt(var);
      if (stddev <= 0.0) {
        out.warnings.push_back("column '" + col.name + "' has zero variance; std forced to 1");
        stddev = 1.0;
      }
      out.by_column[col.name] = NormStats::ColStats{mean, stddev};
    }
  };
  accumulate_group(ColGroup::statistic);
  accumulate_group(ColGroup::knowledge);
  return out;
}

// Transform + z-score every numeric column; id columns pass through.
// NaN target cells (unobserved horizon) stay NaN.
inline SeriesRecord normalize_record(const SeriesRecord& rec, const FeatureSchema& schema, const NormStats& stats) {
  SeriesRecord out = rec;
  auto normalize_group = [&](DenseMat& m, ColGroup g) {
    auto numeric = schema.numeric_of(g);
    for (int64_t pos : numeric) {
      const Column& col = schema.column_in_group(g, pos);
      const auto& cs = stats.require(col.name);
      for (int64_t r = 0; r < m.rows; ++r) {
        m.at(r, pos) = (apply_transform(m.at(r, pos), col.transform) - cs.mean) / cs.std;
      }
    }
  };
  normalize_group(out.statistics, ColGroup::statistic);
  normalize_group(out.knowledge, ColGroup::knowledge);
  auto target_names = schema.target_names();
  for (size_t j = 0; j < target_names.size(); ++j) {
    int64_t ci = schema.find_column(target_names[j]);
    const Column& col = schema.columns[static_cast<size_t>(ci)];
    const auto& cs = stats.require(col.name);
    for (int64_t r = 0; r < out.targets.rows; ++r) {
      double v = out.targets.at(r, static_cast<int64_t>(j));
      if (std::isnan(v)) continue;
      out.targets.at(r, static_cast<int64_t>(j)) = (apply_transform(v, col.transform) - cs.mean) / cs.std;
    }
  }
  return out;
}

inline std::vector<SeriesRecord> normalize_records(const std::vector<SeriesRecord>& recs, const FeatureSchema& schema,
                                                   const NormStats& stats) {
  std::vector<SeriesRecord> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(normalize_record(r, schema, stats));
  return out;
}

inline double denormalize_value(double v, const Column& col, const NormStats& stats) {
  const auto& cs = stats.require(col.name);
  return invert_transform(v * cs.std + cs.mean, col.transform);
}
inline double normalize_value(double v, const Column& col, const NormStats& stats) {
  const auto& cs = stats.require(col.name);
  return (apply_transform(v, col.transform) - cs.mean) / cs.std;
}

// -- splitting ---------------------------------------------------------------

enum class SplitMode { by_id, chronological };

struct SplitResult {
  std::vector<SeriesRecord> train, val, test;
};

// Slice of a record covering knowledge rows [a, b).
inline SeriesRecord slice_record(const SeriesRecord& rec, const FeatureSchema& schema, int64_t a, int64_t b) {
  SeriesRecord out;
  out.id = rec.id;
  out.start_ts = rec.start_ts + a;
  int64_t len = b - a;
  int64_t stat_rows = std::max<int64_t>(0, std::min(rec.statistics.rows, b - schema.horizon) - a);
  out.knowledge = DenseMat(len, rec.knowledge.cols);
  out.statistics = DenseMat(stat_rows, rec.statistics.cols);
  out.targets = DenseMat(len, rec.targets.cols);
  for (int64_t r = 0; r < len; ++r)
    for (int64_t c = 0; c < rec.knowledge.cols; ++c) out.knowledge.at(r, c) = rec.knowledge.at(a + r, c);
  for (int64_t r = 0; r < stat_rows; ++r)
    for (int64_t c = 0; c < rec.statistics.cols; ++c) out.statistics.at(r, c) = rec.statistics.at(a + r, c);
  for (int64_t r = 0; r < len; ++r)
    for (int64_t c = 0; c < rec.targets.cols; ++c) out.targets.at(r, c) = rec.targets.at(a + r, c);
  return out;
}

// Deterministic three-way split. by_id keeps whole series together;
// chronological cuts each series into contiguous segments.
inline SplitResult split_records(const std::vector<SeriesRecord>& records, const std::vector<double>& ratios,
                                 SplitMode mode, uint64_t seed, const FeatureSchema& schema = {}) {
  if (records.empty()) throw DataError("split: empty input");
  if (ratios.size() != 3) throw ConfigError("split: exactly three ratios required");
  double total = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("split: ratios must sum to 1, got " + fmt_g17(total));
  SplitResult out;
  if (mode == SplitMode::by_id) {
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x5b175));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    int64_t n = static_cast<int64_t>(records.size());
    int64_t n_train = std::llround(ratios[0] * static_cast<double>(n));
    int64_t n_val = std::llround(ratios[1] * static_cast<double>(n));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    for (int64_t i = 0; i < n; ++i) {
      const SeriesRecord& rec = records[order[static_cast<size_t>(i)]];
      if (i < n_train)
        out.train.push_back(rec);
      else if (i < n_train + n_val)
        out.val.push_back(rec);
      else
        out.test.push_back(rec);
    }
    // deterministic order inside each split: sort by series id
    auto by_id_cmp = [](const SeriesRecord& a, const SeriesRecord& b) { return a.id < b.id; };
    std::sort(out.train.begin(), out.train.end(), by_id_cmp);
    std::sort(out.val.begin(), out.val.end(), by_id_cmp);
    std::sort(out.test.begin(), out.test.end(), by_id_cmp);
  } else {
    for (const auto& rec : records) {
      int64_t len = rec.length();
      int64_t cut1 = std::llround(ratios[0] * static_cast<double>(len));
      int64_t cut2 = std::llround((ratios[0] + ratios[1]) * static_cast<double>(len));
      cut1 = std::clamp<int64_t>(cut1, 0, len);
      cut2 = std::clamp<int64_t>(cut2, cut1, len);
      if (cut1 > 0) out.train.push_back(slice_record(rec, schema, 0, cut1));
      if (cut2 > cut1) out.val.push_back(slice_record(rec, schema, cut1, cut2));
      if (len > cut2) out.test.push_back(slice_record(rec, schema, cut2, len));
    }
  }
  return out;
}

// -- windows -----------------------------------------------------------------

inline int64_t window_count(int64_t len, int64_t T, int64_t L, int64_t stride = 1) {
  if (stride < 1) throw ConfigError("window_count: stride must be >= 1");
  if (len < T + L) return 0;
  return (len - (T + L)) / stride + 1;
}

struct WindowRef {
  const SeriesRecord* rec = nullptr;
  int64_t start = 0;
};

inline std::vector<WindowRef> make_windows(const std::vector<SeriesRecord>& records, const FeatureSchema& schema,
                                           int64_t stride = 1) {
  std::vector<WindowRef> out;
  int64_t span = schema.history_len + schema.horizon;
  for (const auto& rec : records) {
    for (int64_t start = 0; start + span <= rec.length(); start += stride) {
      out.push_back(WindowRef{&rec, start});
    }
  }
  return out;
}

// Model-ready slice of one window over a normalized record. Statistic rows
// past T are zero-filled; they are always substituted by the mask token.
struct WindowInput {
  DenseMat stat_num;                          // S x n_stat_numeric
  std::vector<std::vector<int64_t>> stat_ids;  // per statistic id column, length S
  DenseMat know_num;                          // S x n_know_numeric
  std::vector<std::vector<int64_t>> know_ids;  // per knowledge id column, length S
  DenseMat targets_win;                       // S x D, target values over the whole window
  DenseMat labels;                            // L x D, horizon rows of targets_win
  bool labels_valid = true;
  const SeriesRecord* rec = nullptr;
  int64_t start = 0;
};

inline WindowInput build_window_input(const SeriesRecord& rec, const FeatureSchema& schema, int64_t start) {
  int64_t T = schema.history_len, L = schema.horizon, S = T + L;
  if (start < 0 || start + S > rec.length())
    throw DataError("window start " + std::to_string(start) + " out of range for series '" + rec.id + "'");
  WindowInput w;
  w.rec = &rec;
  w.start = start;
  auto stat_numeric = schema.numeric_of(ColGroup::statistic);
  auto stat_ids = schema.ids_of(ColGroup::statistic);
  auto know_numeric = schema.numeric_of(ColGroup::knowledge);
  auto know_ids = schema.ids_of(ColGroup::knowledge);

  w.stat_num = DenseMat(S, static_cast<int64_t>(stat_numeric.size()));
  for (int64_t t = 0; t < T; ++t)
    for (size_t j = 0; j < stat_numeric.size(); ++j)
      w.stat_num.at(t, static_cast<int64_t>(j)) = rec.statistics.at(start + t, stat_numeric[j]);
  w.stat_ids.resize(stat_ids.size());
  for (size_t j = 0; j < stat_ids.size(); ++j) {
    w.stat_ids[j].assign(static_cast<size_t>(S), 0);
    for (int64_t t = 0; t < T; ++t)
      w.stat_ids[j][static_cast<size_t>(t)] = std::llround(rec.statistics.at(start + t, stat_ids[j]));
  }

  w.know_num = DenseMat(S, static_cast<int64_t>(know_numeric.size()));
  for (int64_t t = 0; t < S; ++t)
    for (size_t j = 0; j < know_numeric.size(); ++j)
      w.know_num.at(t, static_cast<int64_t>(j)) = rec.knowledge.at(start + t, know_numeric[j]);
  w.know_ids.resize(know_ids.size());
  for (size_t j = 0; j < know_ids.size(); ++j) {
    w.know_ids[j].assign(static_cast<size_t>(S), 0);
    for (int64_t t = 0; t < S; ++t)
      w.know_ids[j][static_cast<size_t>(t)] = std::llround(rec.knowledge.at(start + t, know_ids[j]));
  }

  int64_t D = rec.targets.cols;
  w.targets_win = DenseMat(S, D);
  for (int64_t t = 0; t < S; ++t)
    for (int64_t j = 0; j < D; ++j) w.targets_win.at(t, j) = rec.targets.at(start + t, j);
  w.labels = DenseMat(L, D);
  for (int64_t t = 0; t < L; ++t)
    for (int64_t j = 0; j < D; ++j) {
      double v = w.targets_win.at(T + t, j);
      w.labels.at(t, j) = v;
      if (std::isnan(v)) w.labels_valid = false;
    }
  return w;
}

// Uniform batch of windows; B >= 1.
struct WindowBatch {
  std::vector<WindowInput> items;
};

// -- CSV output / generic reading -------------------------------------------

inline void write_records_csv(const std::string& path, const std::vector<SeriesRecord>& records,
                              const FeatureSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  out << "series_id,timestamp";
  for (const auto& c : schema.columns) out << ',' << c.name;
  out << '\n';
  std::vector<int64_t> target_of_col(schema.columns.size(), -1);
  {
    int64_t tj = 0;
    for (size_t i = 0; i < schema.columns.size(); ++i)
      if (schema.columns[i].is_target) target_of_col[i] = tj++;
  }
  for (const auto& rec : records) {
    std::vector<int64_t> stat_pos(schema.columns.size(), -1), know_pos(schema.columns.size(), -1);
    {
      int64_t sp = 0, kp = 0;
      for (size_t i = 0; i < schema.columns.size(); ++i) {
        if (schema.columns[i].group == ColGroup::statistic)
          stat_pos[i] = sp++;
        else
          know_pos[i] = kp++;
      }
    }
    for (int64_t t = 0; t < rec.length(); ++t) {
      out << rec.id << ',' << (rec.start_ts + t);
      for (size_t i = 0; i < schema.columns.size(); ++i) {
        const Column& col = schema.columns[i];
        out << ',';
        double v = 0.0;
        bool present = false;
        if (col.group == ColGroup::knowledge) {
          v = rec.knowledge.at(t, know_pos[i]);
          present = true;
        } else if (t < rec.statistics.rows) {
          v = rec.statistics.at(t, stat_pos[i]);
          present = true;
        } else if (col.is_target) {
          v = rec.targets.at(t, target_of_col[i]);
          present = !std::isnan(v);
        }
        if (present) {
          if (col.kind == ColKind::id)
            out << std::llround(v);
          else
            out << fmt_g17(v);
        }
      }
      out << '\n';
    }
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) t.header = detail::split_csv_line(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(detail::split_csv_line(line));
  }
  return t;
}

// -- summary for `data stats` -------------------------------------------------

struct ColumnSummary {
  std::string name, kind, group;
  bool is_target = false;
  int64_t count = 0;
  double mean = 0, stddev = 0, min = 0, max = 0;
};

inline std::vector<ColumnSummary> summarize_records(const std::vector<SeriesRecord>& records,
                                                    const FeatureSchema& schema) {
  std::vector<ColumnSummary> out;
  for (ColGroup g : {ColGroup::statistic, ColGroup::knowledge}) {
    int64_t pos = 0;
    for (const auto& col : schema.columns) {
      if (col.group != g) continue;
      ColumnSummary s;
      s.name = col.name;
      s.kind = to_string(col.kind);
      s.group = to_string(col.group);
      s.is_target = col.is_target;
      double sum = 0, sumsq = 0;
      s.min = std::numeric_limits<double>::infinity();
      s.max = -std::numeric_limits<double>::infinity();
      for (const auto& rec : records) {
        const DenseMat& m = g == ColGroup::statistic ? rec.statistics : rec.knowledge;
        for (int64_t r = 0; r < m.rows; ++r) {
          double v = m.at(r, pos);
          sum += v;
          sumsq += v * v;
          s.min = std::min(s.min, v);
          s.max = std::max(s.max, v);
          ++s.count;
        }
      }
      if (s.count > 0) {
        s.mean = sum / static_cast<double>(s.count);
        s.stddev = std::sqrt(std::max(0.0, sumsq / static_cast<double>(s.count) - s.mean * s.mean));
      }
      out.push_back(s);
      ++pos;
    }
  }
  return out;
}

}  // namespace kgf
