// Minimal end-to-end walkthrough of the library API: generate a synthetic
// promotion dataset, train a small guided model, evaluate it, and run a
// price what-if on one test series.

#include <cstdio>

#include "kgf/kgf.hpp"

int main() {
  using namespace kgf;

  SyntheticConfig synth;
  synth.n_series = 60;
  synth.T = 30;
  synth.L = 6;
  synth.seed = 7;
  auto records = generate_synthetic(synth);
  auto schema = FeatureSchema::synthetic_default(synth.T, synth.L);

  auto data = prepare_experiment(records, schema, {0.7, 0.15, 0.15}, SplitMode::by_id, 42);

  ModelConfig cfg = ModelConfig::for_schema(schema);
  cfg.d_x = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 64;

  auto model = Model<double>::init(cfg, schema, 1);
  model.norm = data.stats;

  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 16;
  tc.lr = 1e-3;
  auto summary = train_model(model, data.train_w, data.val_w, tc);
  std::printf("trained %lld epochs, best val loss %.4f\n", static_cast<long long>(summary.history.size()),
              summary.best_val_loss);

  auto report = evaluate_windows(model, data.test_w, "test");
  std::printf("test: avg mse %.4f, avg mae %.4f over %lld windows\n", report.avg_mse, report.avg_mae,
              static_cast<long long>(report.window_count));

  auto forecasts = what_if(model, records.back(), 0, price_study_scenarios());
  for (const auto& sf : forecasts) {
    std::printf("%-14s", sf.name.c_str());
    for (int64_t t = 0; t < sf.forecast.rows; ++t) std::printf(" %8.2f", sf.forecast.at(t, 0));
    std::printf("\n");
  }
  return 0;
}
