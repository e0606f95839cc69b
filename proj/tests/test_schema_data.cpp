#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "kgf/dataset.hpp"
#include "kgf/schema.hpp"
#include "kgf/synthetic.hpp"
#include "test_util.hpp"

using namespace kgf;

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

FeatureSchema tiny_schema(int64_t T = 4, int64_t L = 2) {
  FeatureSchema s;
  s.history_len = T;
  s.horizon = L;
  s.columns = {
      Column{"sales", ColKind::numeric, ColGroup::statistic, true, 0, Transform::log1p},
      Column{"price", ColKind::numeric, ColGroup::knowledge, false, 0, Transform::none},
      Column{"flag", ColKind::id, ColGroup::knowledge, false, 3, Transform::none},
  };
  s.validate();
  return s;
}

std::string tiny_csv(int64_t len, const std::string& sid = "a") {
  std::string text = "series_id,timestamp,sales,price,flag\n";
  for (int64_t t = 0; t < len; ++t) {
    text += sid + "," + std::to_string(t) + "," + std::to_string(10 + t) + "," + std::to_string(5.5) + "," +
            std::to_string(t % 3) + "\n";
  }
  return text;
}

}  // namespace

TEST_CASE("schema validation catches contract violations") {
  auto s = tiny_schema();
  CHECK_NOTHROW(s.validate());

  auto bad_target = s;
  bad_target.columns[0].group = ColGroup::knowledge;
  CHECK_THROWS_AS(bad_target.validate(), ConfigError);

  auto bad_vocab = s;
  bad_vocab.columns[2].vocab_size = 0;
  CHECK_THROWS_AS(bad_vocab.validate(), ConfigError);

  auto numeric_vocab = s;
  numeric_vocab.columns[1].vocab_size = 5;
  CHECK_THROWS_AS(numeric_vocab.validate(), ConfigError);

  auto bad_tl = s;
  bad_tl.history_len = 1;
  bad_tl.horizon = 2;
  CHECK_THROWS_AS(bad_tl.validate(), ConfigError);

  auto dup = s;
  dup.columns.push_back(dup.columns[1]);
  CHECK_THROWS_AS(dup.validate(), ConfigError);
}

TEST_CASE("schema JSON round-trip preserves the hash") {
  auto s = FeatureSchema::sales_default();
  auto j = s.to_json();
  auto back = FeatureSchema::from_json(j);
  CHECK(back.hash() == s.hash());
  CHECK(back.canonical_text() == s.canonical_text());
  CHECK(s.target_dim() == 5);
  CHECK(s.history_len == 200);
  CHECK(s.horizon == 15);
}

TEST_CASE("load_dataset: sales-shaped file of exactly T+L rows") {
  auto schema = FeatureSchema::sales_default();
  // build one full-length record programmatically and round-trip through CSV
  Rng rng(3);
  SeriesRecord rec;
  rec.id = "item0";
  rec.start_ts = 0;
  int64_t len = 215;
  auto stat_cols = schema.stat_columns();
  auto know_cols = schema.know_columns();
  rec.statistics = DenseMat(len - schema.horizon, static_cast<int64_t>(stat_cols.size()));
  rec.knowledge = DenseMat(len, static_cast<int64_t>(know_cols.size()));
  rec.targets = DenseMat(len, schema.target_dim());
  for (int64_t t = 0; t < len; ++t) {
    int64_t kpos = 0;
    for (int64_t ci : know_cols) {
      const Column& c = schema.columns[static_cast<size_t>(ci)];
      rec.knowledge.at(t, kpos++) =
          c.kind == ColKind::id ? static_cast<double>(t % c.vocab_size) : rng.uniform(0.0, 10.0);
    }
    int64_t spos = 0, tpos = 0;
    for (int64_t ci : stat_cols) {
      const Column& c = schema.columns[static_cast<size_t>(ci)];
      double v = rng.uniform(0.0, 100.0);
      if (t < rec.statistics.rows) rec.statistics.at(t, spos) = v;
      if (c.is_target) rec.targets.at(t, tpos++) = v;
      ++spos;
    }
  }
  write_records_csv("kgf_test_tms.csv", {rec}, schema);

  LoadReport report;
  auto records = load_dataset("kgf_test_tms.csv", schema, &report);
  REQUIRE(records.size() == 1);
  CHECK(records[0].knowledge.rows == 215);
  CHECK(records[0].statistics.rows == 200);
  CHECK(records[0].targets.rows == 215);
  CHECK(window_count(records[0].length(), schema.history_len, schema.horizon) == 1);
  // CSV uses 17 significant digits: values survive bitwise
  CHECK(testutil::bitwise_equal(records[0].knowledge.v, rec.knowledge.v));
  CHECK(testutil::bitwise_equal(records[0].statistics.v, rec.statistics.v));
  std::remove("kgf_test_tms.csv");
}

TEST_CASE("load_dataset: empty file gives empty list and a warning") {
  write_text("kgf_test_empty.csv", "series_id,timestamp,sales,price,flag\n");
  LoadReport report;
  auto records = load_dataset("kgf_test_empty.csv", tiny_schema(), &report);
  CHECK(records.empty());
  CHECK(!report.warnings.empty());
  std::remove("kgf_test_empty.csv");
}

TEST_CASE("load_dataset: short series are skipped and counted") {
  write_text("kgf_test_short.csv", tiny_csv(5, "short") + tiny_csv(6, "ok").substr(37));
  LoadReport report;
  auto records = load_dataset("kgf_test_short.csv", tiny_schema(), &report);
  REQUIRE(records.size() == 1);
  CHECK(records[0].id == "ok");
  CHECK(report.n_skipped_short == 1);
  std::remove("kgf_test_short.csv");
}

TEST_CASE("load_dataset: validation errors") {
  auto schema = tiny_schema();

  write_text("kgf_test_gap.csv",
             "series_id,timestamp,sales,price,flag\n"
             "a,0,1,2,0\na,1,1,2,0\na,3,1,2,0\na,4,1,2,0\na,5,1,2,0\na,6,1,2,0\na,7,1,2,0\n");
  CHECK_THROWS_AS(load_dataset("kgf_test_gap.csv", schema), DataError);

  write_text("kgf_test_dup.csv",
             "series_id,timestamp,sales,price,flag\n"
             "a,0,1,2,0\na,0,1,2,0\na,1,1,2,0\na,2,1,2,0\na,3,1,2,0\na,4,1,2,0\na,5,1,2,0\n");
  CHECK_THROWS_AS(load_dataset("kgf_test_dup.csv", schema), DataError);

  write_text("kgf_test_nonnum.csv",
             "series_id,timestamp,sales,price,flag\n"
             "a,0,abc,2,0\na,1,1,2,0\na,2,1,2,0\na,3,1,2,0\na,4,1,2,0\na,5,1,2,0\n");
  CHECK_THROWS_AS(load_dataset("kgf_test_nonnum.csv", schema), DataError);

  write_text("kgf_test_vocab.csv",
             "series_id,timestamp,sales,price,flag\n"
             "a,0,1,2,9\na,1,1,2,0\na,2,1,2,0\na,3,1,2,0\na,4,1,2,0\na,5,1,2,0\n");
  CHECK_THROWS_AS(load_dataset("kgf_test_vocab.csv", schema), DataError);

  write_text("kgf_test_missingcol.csv", "series_id,timestamp,sales,price\na,0,1,2\n");
  CHECK_THROWS_AS(load_dataset("kgf_test_missingcol.csv", schema), DataError);

  // knowledge missing anywhere is an error
  write_text("kgf_test_missknow.csv",
             "series_id,timestamp,sales,price,flag\n"
             "a,0,1,,0\na,1,1,2,0\na,2,1,2,0\na,3,1,2,0\na,4,1,2,0\na,5,1,2,0\n");
  CHECK_THROWS_AS(load_dataset("kgf_test_missknow.csv", schema), DataError);

  // statistic missing inside history is an error
  write_text("kgf_test_missstat.csv",
             "series_id,timestamp,sales,price,flag\n"
             "a,0,,2,0\na,1,1,2,0\na,2,1,2,0\na,3,1,2,0\na,4,1,2,0\na,5,1,2,0\n");
  CHECK_THROWS_AS(load_dataset("kgf_test_missstat.csv", schema), DataError);

  for (const char* f : {"kgf_test_gap.csv", "kgf_test_dup.csv", "kgf_test_nonnum.csv", "kgf_test_vocab.csv",
                        "kgf_test_missingcol.csv", "kgf_test_missknow.csv", "kgf_test_missstat.csv"})
    std::remove(f);
}

TEST_CASE("load_dataset: missing horizon targets load as NaN") {
  // statistics absent in the last L rows is the inference-file shape
  std::string text = "series_id,timestamp,sales,price,flag\n";
  for (int64_t t = 0; t < 6; ++t) {
    std::string sales = t < 4 ? std::to_string(1.0 + static_cast<double>(t)) : "";
    text += "a," + std::to_string(t) + "," + sales + ",2.5," + std::to_string(t % 3) + "\n";
  }
  write_text("kgf_test_nan.csv", text);
  auto records = load_dataset("kgf_test_nan.csv", tiny_schema());
  REQUIRE(records.size() == 1);
  CHECK(std::isnan(records[0].targets.at(4, 0)));
  CHECK(std::isnan(records[0].targets.at(5, 0)));
  CHECK(records[0].targets.at(3, 0) == 4.0);
  auto w = build_window_input(records[0], tiny_schema(), 0);
  CHECK(!w.labels_valid);
  std::remove("kgf_test_nan.csv");
}

TEST_CASE("load_dataset: JSONL parity") {
  std::string text;
  for (int64_t t = 0; t < 6; ++t) {
    text += "{\"series_id\":\"j\",\"timestamp\":" + std::to_string(t) +
            ",\"sales\":" + std::to_string(3 + t) + ",\"price\":1.25,\"flag\":" + std::to_string(t % 3) + "}\n";
  }
  write_text("kgf_test_rows.jsonl", text);
  auto records = load_dataset("kgf_test_rows.jsonl", tiny_schema());
  REQUIRE(records.size() == 1);
  CHECK(records[0].length() == 6);
  CHECK(records[0].statistics.at(0, 0) == 3.0);
  CHECK(records[0].knowledge.at(5, 1) == 2.0);
  std::remove("kgf_test_rows.jsonl");
}

TEST_CASE("normalization: transform, z-score, and exact inversion") {
  SyntheticConfig cfg;
  cfg.n_series = 4;
  cfg.T = 4;
  cfg.L = 2;
  cfg.seed = 9;
  auto records = generate_synthetic(cfg);
  auto synth_schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  auto stats = compute_norm_stats(records, synth_schema);
  auto normalized = normalize_records(records, synth_schema, stats);

  const Column& sales = synth_schema.columns[0];
  for (int64_t r = 0; r < normalized[0].statistics.rows; ++r) {
    double norm = normalized[0].statistics.at(r, 0);
    double back = denormalize_value(norm, sales, stats);
    CHECK(back == doctest::Approx(records[0].statistics.at(r, 0)).epsilon(1e-9));
  }

  // value 0 under log1p: transform gives 0, then the z-score applies
  double z = normalize_value(0.0, sales, stats);
  CHECK(z == doctest::Approx((0.0 - stats.require("sales").mean) / stats.require("sales").std).epsilon(1e-15));

  // negative value under log1p is refused
  CHECK_THROWS_AS(normalize_value(-1.0, sales, stats), DataError);
}

TEST_CASE("normalization: constant column gets std 1 and zero output") {
  auto schema = tiny_schema();
  SeriesRecord rec;
  rec.id = "c";
  rec.statistics = DenseMat(4, 1, 7.0);
  rec.knowledge = DenseMat(6, 2, 1.0);
  rec.targets = DenseMat(6, 1, 7.0);
  auto stats = compute_norm_stats({rec}, schema);
  CHECK(stats.require("price").std == 1.0);
  CHECK(!stats.warnings.empty());
  auto normalized = normalize_record(rec, schema, stats);
  for (int64_t r = 0; r < normalized.knowledge.rows; ++r) CHECK(normalized.knowledge.at(r, 0) == 0.0);
}

TEST_CASE("normalization: stats depend only on the training split") {
  SyntheticConfig cfg;
  cfg.n_series = 6;
  cfg.T = 6;
  cfg.L = 2;
  cfg.seed = 4;
  auto records = generate_synthetic(cfg);
  auto schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  std::vector<SeriesRecord> train(records.begin(), records.begin() + 3);
  auto s1 = compute_norm_stats(train, schema);
  auto s2 = compute_norm_stats(train, schema);  // val/test contents never enter
  for (const auto& [name, cs] : s1.by_column) {
    CHECK(cs.mean == s2.by_column[name].mean);
    CHECK(cs.std == s2.by_column[name].std);
  }
}

TEST_CASE("split: by_id keeps whole series and matches 8/1/1 on ten ids") {
  SyntheticConfig cfg;
  cfg.n_series = 10;
  cfg.T = 4;
  cfg.L = 2;
  cfg.seed = 31;
  auto records = generate_synthetic(cfg);
  auto schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  auto split = split_records(records, {0.8, 0.1, 0.1}, SplitMode::by_id, 5, schema);
  CHECK(split.train.size() == 8);
  CHECK(split.val.size() == 1);
  CHECK(split.test.size() == 1);

  auto again = split_records(records, {0.8, 0.1, 0.1}, SplitMode::by_id, 5, schema);
  REQUIRE(again.val.size() == 1);
  CHECK(again.val[0].id == split.val[0].id);
  CHECK(again.test[0].id == split.test[0].id);
}

TEST_CASE("split: chronological cuts one long series into contiguous segments") {
  SyntheticConfig cfg;
  cfg.n_series = 1;
  cfg.T = 10;
  cfg.L = 2;
  cfg.extra_days = 28;  // length 40
  cfg.seed = 8;
  auto records = generate_synthetic(cfg);
  auto schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  auto split = split_records(records, {0.6, 0.2, 0.2}, SplitMode::chronological, 0, schema);
  REQUIRE(split.train.size() == 1);
  REQUIRE(split.val.size() == 1);
  REQUIRE(split.test.size() == 1);
  CHECK(split.train[0].length() == 24);
  CHECK(split.val[0].length() == 8);
  CHECK(split.test[0].length() == 8);
  CHECK(split.train[0].start_ts == 0);
  CHECK(split.val[0].start_ts == 24);
  CHECK(split.test[0].start_ts == 32);
  // segment content matches the source rows
  CHECK(split.val[0].knowledge.at(0, 0) == records[0].knowledge.at(24, 0));
}

TEST_CASE("split: bad ratios and empty input are rejected") {
  SyntheticConfig cfg;
  cfg.n_series = 2;
  cfg.T = 4;
  cfg.L = 2;
  auto records = generate_synthetic(cfg);
  auto schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  CHECK_THROWS_AS(split_records(records, {0.5, 0.2, 0.2}, SplitMode::by_id, 1, schema), ConfigError);
  CHECK_THROWS_AS(split_records({}, {0.8, 0.1, 0.1}, SplitMode::by_id, 1, schema), DataError);
}

TEST_CASE("window counts match the closed-form oracle") {
  auto schema = tiny_schema(200, 15);
  auto make_record = [&](int64_t len) {
    SeriesRecord rec;
    rec.id = "w";
    rec.statistics = DenseMat(len - 15, 1, 1.0);
    rec.knowledge = DenseMat(len, 2, 1.0);
    rec.targets = DenseMat(len, 1, 1.0);
    return rec;
  };
  CHECK(make_windows({make_record(217)}, schema, 1).size() == 3);
  CHECK(make_windows({make_record(215)}, schema, 1).size() == 1);
  CHECK(make_windows({make_record(219)}, schema, 2).size() == 3);

  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    int64_t T = rng.uniform_int(2, 12);
    int64_t L = rng.uniform_int(1, T);
    int64_t len = rng.uniform_int(1, 50);
    int64_t stride = rng.uniform_int(1, 4);
    int64_t brute = 0;
    for (int64_t start = 0; start + T + L <= len; start += stride) ++brute;
    CHECK(window_count(len, T, L, stride) == brute);
  }
}

TEST_CASE("build_window_input slices, zero-fills future statistics, extracts labels") {
  SyntheticConfig cfg;
  cfg.n_series = 1;
  cfg.T = 6;
  cfg.L = 2;
  cfg.extra_days = 3;
  cfg.seed = 12;
  auto records = generate_synthetic(cfg);
  auto schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  auto stats = compute_norm_stats(records, schema);
  auto normalized = normalize_records(records, schema, stats);

  auto w = build_window_input(normalized[0], schema, 2);
  int64_t S = cfg.T + cfg.L;
  CHECK(w.stat_num.rows == S);
  CHECK(w.stat_num.cols == 2);
  CHECK(w.know_num.rows == S);
  CHECK(w.know_num.cols == 1);
  REQUIRE(w.know_ids.size() == 2);
  CHECK(w.labels.rows == cfg.L);
  CHECK(w.labels.cols == 1);
  for (int64_t t = cfg.T; t < S; ++t) {
    CHECK(w.stat_num.at(t, 0) == 0.0);
    CHECK(w.stat_num.at(t, 1) == 0.0);
  }
  CHECK(w.stat_num.at(0, 0) == normalized[0].statistics.at(2, 0));
  CHECK(w.labels.at(0, 0) == normalized[0].targets.at(2 + cfg.T, 0));
  CHECK(w.know_ids[0][3] == std::llround(normalized[0].knowledge.at(5, 1)));
}

TEST_CASE("synthetic: record count identity knowledge = statistics + L") {
  SyntheticConfig cfg;
  cfg.n_series = 5;
  cfg.T = 8;
  cfg.L = 3;
  cfg.extra_days = 4;
  auto records = generate_synthetic(cfg);
  for (const auto& r : records) CHECK(r.knowledge.rows == r.statistics.rows + cfg.L);
}

TEST_CASE("synthetic: promotion lifts sales and the pre-window suppresses them") {
  SyntheticConfig promo;
  promo.n_series = 3;
  promo.T = 20;
  promo.L = 10;
  promo.seed = 21;
  promo.randomize_schedule = false;
  promo.schedule = {PromoWindow{24, 27, 0.8}};

  SyntheticConfig nopromo = promo;
  nopromo.schedule.clear();
  nopromo.randomize_schedule = false;

  auto with = generate_synthetic(promo);
  auto without = generate_synthetic(nopromo);
  for (size_t i = 0; i < with.size(); ++i) {
    for (int64_t t = 24; t <= 27; ++t) CHECK(with[i].targets.at(t, 0) > without[i].targets.at(t, 0));
    for (int64_t t = 21; t <= 23; ++t) CHECK(with[i].targets.at(t, 0) < without[i].targets.at(t, 0));
    // outside the affected range everything is untouched
    for (int64_t t = 0; t < 21; ++t) CHECK(with[i].targets.at(t, 0) == without[i].targets.at(t, 0));
    for (int64_t t = 28; t < promo.length(); ++t) CHECK(with[i].targets.at(t, 0) == without[i].targets.at(t, 0));
  }
}

TEST_CASE("synthetic: zero noise and no promotion is exactly trend plus seasonality") {
  SyntheticConfig cfg;
  cfg.n_series = 2;
  cfg.T = 20;
  cfg.L = 5;
  cfg.noise_scale = 0.0;
  cfg.randomize_schedule = false;
  auto records = generate_synthetic(cfg);
  for (const auto& rec : records) {
    // with zero noise, sales(t+7) - sales(t) = 7*slope for every t
    double expected = rec.targets.at(7, 0) - rec.targets.at(0, 0);
    for (int64_t t = 0; t + 7 < rec.length(); ++t) {
      CHECK(rec.targets.at(t + 7, 0) - rec.targets.at(t, 0) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("synthetic: identical seeds reproduce the dataset bitwise") {
  SyntheticConfig cfg;
  cfg.n_series = 4;
  cfg.T = 12;
  cfg.L = 4;
  cfg.seed = 1234;
  auto a = generate_synthetic(cfg);
  auto b = generate_synthetic(cfg);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(testutil::bitwise_equal(a[i].statistics.v, b[i].statistics.v));
    CHECK(testutil::bitwise_equal(a[i].knowledge.v, b[i].knowledge.v));
    CHECK(testutil::bitwise_equal(a[i].targets.v, b[i].targets.v));
  }
}

TEST_CASE("synthetic: the promotion lift is a pure function of the knowledge columns") {
  SyntheticConfig a;
  a.n_series = 3;
  a.T = 30;
  a.L = 10;
  a.seed = 55;
  a.randomize_schedule = false;
  a.schedule = {PromoWindow{10, 13, 0.75}};
  SyntheticConfig b = a;
  b.schedule = {PromoWindow{20, 23, 0.75}};

  auto ra = generate_synthetic(a);
  auto rb = generate_synthetic(b);
  auto affected = [&](int64_t t) {
    return (t >= 10 - a.pre_days && t <= 13) || (t >= 20 - a.pre_days && t <= 23);
  };
  for (size_t i = 0; i < ra.size(); ++i) {
    for (int64_t t = 0; t < ra[i].length(); ++t) {
      if (affected(t)) continue;
      CHECK(ra[i].targets.at(t, 0) == rb[i].targets.at(t, 0));
      CHECK(ra[i].knowledge.at(t, 0) == rb[i].knowledge.at(t, 0));
      if (t < ra[i].statistics.rows) {
        CHECK(ra[i].statistics.at(t, 1) == rb[i].statistics.at(t, 1));
      }
    }
  }
}

TEST_CASE("synthetic: schedule outside the series range is rejected") {
  SyntheticConfig cfg;
  cfg.T = 10;
  cfg.L = 2;
  cfg.schedule = {PromoWindow{11, 13, 0.8}};  // end beyond length 12
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

TEST_CASE("synthetic records survive a CSV round trip bitwise") {
  SyntheticConfig cfg;
  cfg.n_series = 3;
  cfg.T = 8;
  cfg.L = 3;
  cfg.seed = 77;
  auto records = generate_synthetic(cfg);
  auto schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  write_records_csv("kgf_test_synth.csv", records, schema);
  auto loaded = load_dataset("kgf_test_synth.csv", schema);
  REQUIRE(loaded.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(testutil::bitwise_equal(loaded[i].statistics.v, records[i].statistics.v));
    CHECK(testutil::bitwise_equal(loaded[i].knowledge.v, records[i].knowledge.v));
    CHECK(testutil::bitwise_equal(loaded[i].targets.v, records[i].targets.v));
  }
  std::remove("kgf_test_synth.csv");
}

TEST_CASE("summarize_records reports per-column moments") {
  SyntheticConfig cfg;
  cfg.n_series = 2;
  cfg.T = 6;
  cfg.L = 2;
  auto records = generate_synthetic(cfg);
  auto schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  auto summary = summarize_records(records, schema);
  REQUIRE(summary.size() == schema.columns.size());
  CHECK(summary[0].name == "sales");
  CHECK(summary[0].is_target);
  CHECK(summary[0].count == static_cast<int64_t>(records.size()) * records[0].statistics.rows);
  CHECK(summary[0].min <= summary[0].max);
}
