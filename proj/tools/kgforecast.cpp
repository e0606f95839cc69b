// kgforecast: train, evaluate and probe knowledge-guided forecasting models.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "kgf/kgf.hpp"

namespace fs = std::filesystem;
using namespace kgf;

namespace {

struct CliState {
  // global
  std::string config_file;
  std::string precision = "f64";
  bool deterministic = false;
  bool checked = false;

  // common inputs
  std::string data_file;
  std::string schema_file;
  std::string checkpoint_file;
  std::string out_dir = ".";

  // split
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::string split_mode = "by_id";
  uint64_t split_seed = 42;
  std::string eval_split = "test";

  // model overrides
  ModelConfig model;
  TrainConfig train;
  int parallel = 1;

  // evaluate
  bool denorm = false;

  // whatif
  std::string series_id;
  int64_t window_start = -1;  // -1: last window
  std::string wi_column = "price";
  double wi_scale = std::numeric_limits<double>::quiet_NaN();
  double wi_set = std::numeric_limits<double>::quiet_NaN();
  bool wi_hist_mean = false;
  int64_t wi_from = 1, wi_to = -1;

  // sweep
  std::string sweep_param = "n_layers";
  std::vector<double> sweep_values;

  // attn-stats
  int64_t stat_windows = 8;
  int64_t stat_bins = 50;

  // synth
  SyntheticConfig synth;

  nlohmann::json config;  // parsed --config file
};

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed JSON in " + path);
  return j;
}

FeatureSchema resolve_schema(const CliState& st) {
  if (!st.schema_file.empty()) return FeatureSchema::from_json(load_json_file(st.schema_file));
  if (st.config.contains("schema")) return FeatureSchema::from_json(st.config["schema"]);
  throw ConfigError("no schema: pass --schema FILE or a config file with a schema section");
}

SplitMode resolve_split_mode(const std::string& s) {
  if (s == "by_id") return SplitMode::by_id;
  if (s == "chronological" || s == "chrono") return SplitMode::chronological;
  throw ConfigError("unknown split mode '" + s + "' (expected by_id|chronological)");
}

std::vector<SeriesRecord> load_records(const CliState& st, const FeatureSchema& schema, LoadReport* report = nullptr) {
  if (st.data_file.empty()) throw ConfigError("no dataset: pass --data FILE");
  return load_dataset(st.data_file, schema, report);
}

ExperimentData prepare(const CliState& st, const FeatureSchema& schema) {
  auto records = load_records(st, schema);
  return prepare_experiment(records, schema, st.ratios, resolve_split_mode(st.split_mode), st.split_seed);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory: " + dir);
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void print_metrics(const MetricReport& report) {
  std::cout << "split=" << report.split << " windows=" << report.window_count
            << (report.denormalized ? " (denormalized)" : " (normalized)") << "\n";
  for (const auto& tm : report.per_target) {
    std::printf("  %-12s mse=%.6f mae=%.6f\n", tm.name.c_str(), tm.mse, tm.mae);
  }
  std::printf("  %-12s mse=%.6f mae=%.6f\n", "Avg", report.avg_mse, report.avg_mae);
}

template <typename T>
int cmd_train(const CliState& st) {
  auto schema = resolve_schema(st);
  auto data = prepare(st, schema);
  auto cfg = ModelConfig::for_schema(schema, st.model);
  auto model = Model<T>::init(cfg, schema, st.train.seed);
  model.norm = data.stats;

  std::cout << "training " << to_string(cfg.layer_kind) << " model: layers=" << cfg.n_layers
            << " heads=" << cfg.n_heads << " d_x=" << cfg.d_x << " params=" << model.param_count()
            << " train_windows=" << data.train_w.size() << "\n";
  auto summary = train_model(model, data.train_w, data.val_w, st.train);
  for (const auto& e : summary.history) {
    std::printf("epoch %3lld  train %.6f  val %.6f\n", static_cast<long long>(e.epoch), e.train_loss, e.val_loss);
  }
  std::cout << "best epoch " << summary.best_epoch << " (val " << summary.best_val_loss << ")\n";

  ensure_out_dir(st.out_dir);
  save_checkpoint(model, join_path(st.out_dir, "checkpoint.ckpt"));
  emit_history_csv(join_path(st.out_dir, "history.csv"), summary.history);
  if (!data.test_w.empty()) {
    auto report = evaluate_windows(model, data.test_w, "test", st.denorm);
    print_metrics(report);
    emit_metrics_csv(join_path(st.out_dir, "metrics.csv"), report);
  }
  std::cout << "wrote " << join_path(st.out_dir, "checkpoint.ckpt") << "\n";
  return 0;
}

template <typename T>
std::pair<Model<T>, FeatureSchema> load_model(const CliState& st) {
  if (st.checkpoint_file.empty()) throw ConfigError("no checkpoint: pass --checkpoint FILE");
  auto schema = resolve_schema(st);
  auto ck = load_checkpoint(st.checkpoint_file);
  return {model_from_checkpoint<T>(ck, schema), schema};
}

template <typename T>
int cmd_evaluate(const CliState& st) {
  auto [model, schema] = load_model<T>(st);
  std::vector<SeriesRecord> records;
  auto raw = load_records(st, schema);
  if (st.eval_split == "all") {
    records = normalize_records(raw, schema, model.norm);
  } else if (st.eval_split == "train" || st.eval_split == "val" || st.eval_split == "test") {
    auto split = split_records(raw, st.ratios, resolve_split_mode(st.split_mode), st.split_seed, schema);
    const auto& part = st.eval_split == "train" ? split.train : st.eval_split == "val" ? split.val : split.test;
    records = normalize_records(part, schema, model.norm);
  } else {
    throw ConfigError("unknown split '" + st.eval_split + "' (expected train|val|test|all)");
  }
  auto report = evaluate(model, records, st.eval_split, st.denorm);
  print_metrics(report);
  ensure_out_dir(st.out_dir);
  emit_metrics_csv(join_path(st.out_dir, "metrics.csv"), report);
  return 0;
}

template <typename T>
int cmd_ablate(const CliState& st) {
  auto schema = resolve_schema(st);
  auto data = prepare(st, schema);
  auto cfg = ModelConfig::for_schema(schema, st.model);
  int workers = st.deterministic ? 1 : st.parallel;
  auto outcomes = run_ablation<T>(data, cfg, st.train, standard_ablation_variants(), workers);
  render_ablation_table(std::cout, outcomes);
  ensure_out_dir(st.out_dir);
  emit_ablation_csv(join_path(st.out_dir, "ablation.csv"), outcomes);
  for (const auto& o : outcomes) {
    save_checkpoint(o.model, join_path(st.out_dir, o.variant + ".ckpt"));
  }
  std::cout << "wrote " << join_path(st.out_dir, "ablation.csv") << "\n";
  return 0;
}

template <typename T>
int cmd_whatif(const CliState& st) {
  auto [model, schema] = load_model<T>(st);
  auto raw = load_records(st, schema);
  const SeriesRecord* record = nullptr;
  for (const auto& r : raw) {
    if (r.id == st.series_id) record = &r;
  }
  if (record == nullptr) throw DataError("whatif: series '" + st.series_id + "' not found in the dataset");
  int64_t span = schema.history_len + schema.horizon;
  int64_t start = st.window_start >= 0 ? st.window_start : record->length() - span;

  std::vector<Scenario> scenarios;
  bool custom = !std::isnan(st.wi_scale) || !std::isnan(st.wi_set) || st.wi_hist_mean;
  if (custom) {
    scenarios.push_back(Scenario{"baseline", {}});
    Intervention iv;
    iv.column = st.wi_column;
    iv.from = st.wi_from;
    iv.to = st.wi_to;
    if (!std::isnan(st.wi_scale)) {
      iv.kind = InterventionKind::scale_by;
      iv.value = st.wi_scale;
    } else if (!std::isnan(st.wi_set)) {
      iv.kind = InterventionKind::set_to;
      iv.value = st.wi_set;
    } else {
      iv.kind = InterventionKind::copy_historical_mean;
    }
    scenarios.push_back(Scenario{"intervention", {iv}});
  } else {
    scenarios = price_study_scenarios(st.wi_column);
  }

  auto forecasts = what_if(model, *record, start, scenarios);
  for (const auto& sf : forecasts) {
    std::cout << sf.name << ":";
    for (int64_t t = 0; t < sf.forecast.rows; ++t) std::printf(" %.4f", sf.forecast.at(t, 0));
    std::cout << "\n";
  }
  ensure_out_dir(st.out_dir);
  emit_whatif_csv(join_path(st.out_dir, "whatif.csv"), forecasts, schema.target_names(), schema.history_len);
  std::cout << "wrote " << join_path(st.out_dir, "whatif.csv") << "\n";
  return 0;
}

template <typename T>
int cmd_sweep(const CliState& st) {
  if (st.sweep_values.empty()) throw ConfigError("sweep: pass --values");
  auto schema = resolve_schema(st);
  auto data = prepare(st, schema);
  auto cfg = ModelConfig::for_schema(schema, st.model);
  int workers = st.deterministic ? 1 : st.parallel;
  auto rows = run_sweep<T>(data, cfg, st.train, st.sweep_param, st.sweep_values, workers);
  for (const auto& r : rows)
    std::printf("%s=%g  mse=%.6f  mae=%.6f\n", st.sweep_param.c_str(), r.value, r.avg_mse, r.avg_mae);
  ensure_out_dir(st.out_dir);
  emit_sweep_csv(join_path(st.out_dir, "sensitivity_" + st.sweep_param + ".csv"), st.sweep_param, rows);
  return 0;
}

template <typename T>
int cmd_attn_stats(const CliState& st) {
  auto [model, schema] = load_model<T>(st);
  auto raw = load_records(st, schema);
  auto records = normalize_records(raw, schema, model.norm);
  auto windows = build_all_windows(records, schema);
  auto stats = collect_attention_stats(model, windows, st.stat_windows, st.stat_bins);
  for (const auto& [layer, prop] : stats.proportion) {
    std::printf("layer %lld: proportion(att_bar > att) = %.4f\n", static_cast<long long>(layer), prop);
  }
  ensure_out_dir(st.out_dir);
  emit_attention_hist_csv(join_path(st.out_dir, "attention_hist.csv"), stats);
  emit_attention_proportion_csv(join_path(st.out_dir, "attention_proportion.csv"), stats);
  std::cout << "wrote attention_hist.csv and attention_proportion.csv under " << st.out_dir << "\n";
  return 0;
}

int cmd_data_synth(const CliState& st) {
  auto records = generate_synthetic(st.synth);
  auto schema = FeatureSchema::synthetic_default(st.synth.T, st.synth.L);
  ensure_out_dir(st.out_dir);
  write_records_csv(join_path(st.out_dir, "data.csv"), records, schema);
  std::ofstream sj(join_path(st.out_dir, "schema.json"));
  sj << schema.to_json().dump(2) << "\n";
  std::cout << "wrote " << records.size() << " series to " << join_path(st.out_dir, "data.csv") << "\n";
  return 0;
}

int cmd_data_validate(const CliState& st) {
  auto schema = resolve_schema(st);
  LoadReport report;
  auto records = load_records(st, schema, &report);
  int64_t windows = 0;
  for (const auto& r : records) windows += window_count(r.length(), schema.history_len, schema.horizon);
  std::cout << "records: " << report.n_loaded << ", skipped short: " << report.n_skipped_short
            << ", stride-1 windows: " << windows << "\n";
  for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "schema hash: " << schema.hash() << "\n";
  return 0;
}

int cmd_data_stats(const CliState& st) {
  auto schema = resolve_schema(st);
  auto records = load_records(st, schema);
  auto summary = summarize_records(records, schema);
  std::printf("%-16s %-9s %-10s %8s %12s %12s %12s %12s\n", "column", "kind", "group", "target", "mean", "std",
              "min", "max");
  for (const auto& s : summary) {
    std::printf("%-16s %-9s %-10s %8s %12.4f %12.4f %12.4f %12.4f\n", s.name.c_str(), s.kind.c_str(),
                s.group.c_str(), s.is_target ? "yes" : "", s.mean, s.stddev, s.min, s.max);
  }
  return 0;
}

template <typename F64, typename F32>
int dispatch(const CliState& st, F64 f64, F32 f32) {
  if (st.precision == "f64") return f64();
  if (st.precision == "f32") return f32();
  throw ConfigError("unknown precision '" + st.precision + "' (expected f32|f64)");
}

void apply_config_defaults(CliState& st) {
  if (st.config_file.empty()) return;
  st.config = load_json_file(st.config_file);
  if (st.config.contains("model")) st.model = ModelConfig::from_json(st.config["model"]);
  if (st.config.contains("train")) {
    const auto& j = st.config["train"];
    st.train.lr = j.value("lr", st.train.lr);
    st.train.batch_size = j.value("batch_size", st.train.batch_size);
    st.train.epochs = j.value("epochs", st.train.epochs);
    st.train.p1 = j.value("p1", st.train.p1);
    st.train.p2 = j.value("p2", st.train.p2);
    st.train.seed = j.value("seed", st.train.seed);
    st.train.clip_norm = j.value("clip_norm", st.train.clip_norm);
  }
  if (st.config.contains("split")) {
    const auto& j = st.config["split"];
    if (j.contains("ratios")) st.ratios = j["ratios"].get<std::vector<double>>();
    st.split_mode = j.value("mode", st.split_mode);
    st.split_seed = j.value("seed", st.split_seed);
  }
  if (st.config.contains("synth")) {
    const auto& j = st.config["synth"];
    st.synth.n_series = j.value("n_series", st.synth.n_series);
    st.synth.T = j.value("T", st.synth.T);
    st.synth.L = j.value("L", st.synth.L);
    st.synth.extra_days = j.value("extra_days", st.synth.extra_days);
    st.synth.seed = j.value("seed", st.synth.seed);
    st.synth.alpha = j.value("alpha", st.synth.alpha);
    st.synth.beta = j.value("beta", st.synth.beta);
    st.synth.pre_days = j.value("pre_days", st.synth.pre_days);
    st.synth.noise_scale = j.value("noise_scale", st.synth.noise_scale);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CliState st;

  // pre-scan for --config so file values become defaults the flags override
  for (int i = 1; i < argc - 1; ++i) {
    if (std::string(argv[i]) == "--config") st.config_file = argv[i + 1];
  }
  try {
    apply_config_defaults(st);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"knowledge-guided transformer for time-series sales forecasting"};
  app.require_subcommand(1);
  app.add_option("--config", st.config_file, "JSON config file (schema/model/train/split/synth sections)");
  app.add_option("--seed", st.train.seed, "training / model init seed");
  app.add_option("--precision", st.precision, "numeric precision: f64 (default) or f32");
  app.add_flag("--deterministic", st.deterministic, "force single-threaded experiment execution");
  app.add_flag("--checked", st.checked, "enable NaN/Inf scanning in numeric kernels");

  auto add_data_opts = [&](CLI::App* cmd) {
    cmd->add_option("--data", st.data_file, "dataset file (.csv or .jsonl)");
    cmd->add_option("--schema", st.schema_file, "schema JSON file");
  };
  auto add_split_opts = [&](CLI::App* cmd) {
    cmd->add_option("--ratios", st.ratios, "train/val/test ratios")->expected(3);
    cmd->add_option("--split-mode", st.split_mode, "by_id or chronological");
    cmd->add_option("--split-seed", st.split_seed, "seed of the id shuffle");
  };
  auto add_model_opts = [&](CLI::App* cmd) {
    cmd->add_option("--layers", st.model.n_layers, "encoder layers");
    cmd->add_option("--heads", st.model.n_heads, "attention heads");
    cmd->add_option("--dx", st.model.d_x, "embedding width");
    cmd->add_option("--dff", st.model.d_ff, "feed-forward width");
    cmd->add_option_function<std::string>(
        "--layer-kind", [&st](const std::string& v) { st.model.layer_kind = layer_kind_from_string(v); },
        "vsa or ali");
    cmd->add_flag_callback("--no-future", [&st]() { st.model.use_future_knowledge = false; },
                           "hide future knowledge (ablation)");
  };
  auto add_train_opts = [&](CLI::App* cmd) {
    cmd->add_option("--epochs", st.train.epochs, "training epochs");
    cmd->add_option("--batch", st.train.batch_size, "batch size");
    cmd->add_option("--lr", st.train.lr, "Adam learning rate");
    cmd->add_option_function<double>(
        "--p2",
        [&st](const double& v) {
          st.train.p2 = v;
          st.train.p1 = 1.0 - v;
        },
        "span-masking probability (p1 = 1 - p2)");
    cmd->add_option("--clip", st.train.clip_norm, "gradient clipping norm");
  };
  auto add_out_opt = [&](CLI::App* cmd) { cmd->add_option("--out", st.out_dir, "output directory"); };

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_data_opts(train_cmd);
  add_split_opts(train_cmd);
  add_model_opts(train_cmd);
  add_train_opts(train_cmd);
  add_out_opt(train_cmd);
  train_cmd->add_flag("--denorm", st.denorm, "report test metrics in original units");

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
  add_data_opts(eval_cmd);
  add_split_opts(eval_cmd);
  add_out_opt(eval_cmd);
  eval_cmd->add_option("--checkpoint", st.checkpoint_file, "checkpoint file");
  eval_cmd->add_option("--split", st.eval_split, "train|val|test|all");
  eval_cmd->add_flag("--denorm", st.denorm, "report metrics in original units");

  auto* ablate_cmd = app.add_subcommand("ablate", "train full / wo_future / wo_guided_attention and compare");
  add_data_opts(ablate_cmd);
  add_split_opts(ablate_cmd);
  add_model_opts(ablate_cmd);
  add_train_opts(ablate_cmd);
  add_out_opt(ablate_cmd);
  ablate_cmd->add_option("--parallel", st.parallel, "concurrent trainings");

  auto* whatif_cmd = app.add_subcommand("whatif", "forecast counterfactual knowledge scenarios");
  add_data_opts(whatif_cmd);
  add_out_opt(whatif_cmd);
  whatif_cmd->add_option("--checkpoint", st.checkpoint_file, "checkpoint file");
  whatif_cmd->add_option("--series", st.series_id, "series id")->required();
  whatif_cmd->add_option("--window-start", st.window_start, "window start row (default: last window)");
  whatif_cmd->add_option("--column", st.wi_column, "knowledge column to intervene on");
  whatif_cmd->add_option("--scale", st.wi_scale, "multiply the column by this factor");
  whatif_cmd->add_option("--set", st.wi_set, "set the column to this value");
  whatif_cmd->add_flag("--hist-mean", st.wi_hist_mean, "set the column to its 7-day historical mean");
  whatif_cmd->add_option("--from", st.wi_from, "first horizon day (1-based)");
  whatif_cmd->add_option("--to", st.wi_to, "last horizon day (inclusive; -1 = L)");

  auto* sweep_cmd = app.add_subcommand("sweep", "sensitivity sweep over n_layers or p2");
  add_data_opts(sweep_cmd);
  add_split_opts(sweep_cmd);
  add_model_opts(sweep_cmd);
  add_train_opts(sweep_cmd);
  add_out_opt(sweep_cmd);
  sweep_cmd->add_option("--param", st.sweep_param, "n_layers or p2");
  sweep_cmd->add_option("--values", st.sweep_values, "values to sweep");
  sweep_cmd->add_option("--parallel", st.parallel, "concurrent trainings");

  auto* attn_cmd = app.add_subcommand("attn-stats", "export attention-weight statistics");
  add_data_opts(attn_cmd);
  add_out_opt(attn_cmd);
  attn_cmd->add_option("--checkpoint", st.checkpoint_file, "checkpoint file");
  attn_cmd->add_option("--windows", st.stat_windows, "number of windows to record");
  attn_cmd->add_option("--bins", st.stat_bins, "histogram bins");

  auto* data_cmd = app.add_subcommand("data", "dataset utilities");
  data_cmd->require_subcommand(1);
  auto* synth_cmd = data_cmd->add_subcommand("synth", "generate a synthetic promotion dataset");
  add_out_opt(synth_cmd);
  synth_cmd->add_option("--series", st.synth.n_series, "number of series");
  synth_cmd->add_option("--seed", st.synth.seed, "generator seed");
  synth_cmd->add_option("--t", st.synth.T, "history length T");
  synth_cmd->add_option("--l", st.synth.L, "horizon L");
  synth_cmd->add_option("--extra", st.synth.extra_days, "extra days beyond T+L");
  synth_cmd->add_option("--alpha", st.synth.alpha, "promotion lift slope");
  synth_cmd->add_option("--beta", st.synth.beta, "pre-promotion suppression");
  synth_cmd->add_option("--pre-days", st.synth.pre_days, "suppressed days before each promotion");
  synth_cmd->add_option("--noise", st.synth.noise_scale, "noise scale");
  auto* validate_cmd = data_cmd->add_subcommand("validate", "validate a dataset against a schema");
  add_data_opts(validate_cmd);
  auto* stats_cmd = data_cmd->add_subcommand("stats", "per-column summary of a dataset");
  add_data_opts(stats_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_checked_mode(st.checked);
    if (*train_cmd)
      return dispatch(
          st, [&] { return cmd_train<double>(st); }, [&] { return cmd_train<float>(st); });
    if (*eval_cmd)
      return dispatch(
          st, [&] { return cmd_evaluate<double>(st); }, [&] { return cmd_evaluate<float>(st); });
    if (*ablate_cmd)
      return dispatch(
          st, [&] { return cmd_ablate<double>(st); }, [&] { return cmd_ablate<float>(st); });
    if (*whatif_cmd)
      return dispatch(
          st, [&] { return cmd_whatif<double>(st); }, [&] { return cmd_whatif<float>(st); });
    if (*sweep_cmd)
      return dispatch(
          st, [&] { return cmd_sweep<double>(st); }, [&] { return cmd_sweep<float>(st); });
    if (*attn_cmd)
      return dispatch(
          st, [&] { return cmd_attn_stats<double>(st); }, [&] { return cmd_attn_stats<float>(st); });
    if (*synth_cmd) return cmd_data_synth(st);
    if (*validate_cmd) return cmd_data_validate(st);
    if (*stats_cmd) return cmd_data_stats(st);
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
