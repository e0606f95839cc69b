#pragma once

// Masked training loop: shuffled batches, per-record mask-plan sampling,
// Adam with global-norm clipping, naive-plan validation, best-val weights.

#include <limits>
#include <vector>

#include "kgf/adam.hpp"
#include "kgf/model.hpp"

namespace kgf {

struct TrainConfig {
  double lr = 2e-4;
  int64_t batch_size = 32;  // 512 at full scale
  int64_t epochs = 20;
  double p1 = 0.5;  // naive-plan probability
  double p2 = 0.5;  // span-plan probability
  uint64_t seed = 1;
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (p1 < 0.0 || p2 < 0.0 || std::fabs(p1 + p2 - 1.0) > 1e-9)
      throw ConfigError("train: p1 + p2 must equal 1 with both nonnegative");
    if (clip_norm <= 0.0) throw ConfigError("train: clip_norm must be positive");
  }
};

struct EpochStat {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainSummary {
  std::vector<EpochStat> history;
  int64_t best_epoch = 0;
  double best_val_loss = 0.0;
  int64_t span_fallbacks = 0;
};

// Mean naive-plan loss over a window list, forward only.
template <typename T>
double validation_loss(const Model<T>& model, const std::vector<WindowInput>& windows) {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  MaskPlan plan = MaskPlan::naive(model.cfg.history_len, model.cfg.horizon);
  double acc = 0.0;
  for (const auto& w : windows) {
    Tape<T> tape(false);
    auto preds = model.forward_window(tape, w, plan);
    auto labels = model.labels_for(w, plan);
    Tape<T> scratch(false);
    acc += static_cast<double>(mean_squared_error(scratch, preds, labels)->v[0]);
  }
  return acc / static_cast<double>(windows.size());
}

// Trains in place; the model ends up with the best-validation weights.
// Identical seed and thread count give a bit-identical history and weights.
template <typename T>
TrainSummary train_model(Model<T>& model, const std::vector<WindowInput>& train_windows,
                         const std::vector<WindowInput>& val_windows, const TrainConfig& tc) {
  tc.validate();
  if (train_windows.empty()) throw DataError("train: empty training split");
  int64_t T_hist = model.cfg.history_len, L = model.cfg.horizon;

  auto params = model.params();
  AdamConfig<T> acfg;
  acfg.lr = static_cast<T>(tc.lr);
  acfg.beta1 = static_cast<T>(tc.beta1);
  acfg.beta2 = static_cast<T>(tc.beta2);
  acfg.eps = static_cast<T>(tc.adam_eps);
  Adam<T> opt(params, acfg);

  Rng shuffle_rng(mix_seed(tc.seed, 0x5u));
  Rng mask_rng(mix_seed(tc.seed, 0x77u));

  TrainSummary summary;
  summary.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<T>> best_values;

  std::vector<size_t> order(train_windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int64_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    int64_t n_items = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(tc.batch_size)) {
      WindowBatch batch;
      std::vector<MaskPlan> plans;
      size_t end = std::min(order.size(), at + static_cast<size_t>(tc.batch_size));
      for (size_t i = at; i < end; ++i) {
        batch.items.push_back(train_windows[order[i]]);
        bool fell_back = false;
        plans.push_back(sample_mask_plan(mask_rng, T_hist, L, tc.p1, tc.p2, &fell_back));
        if (fell_back) ++summary.span_fallbacks;
      }
      Tape<T> tape;
      auto fwd = forward_batch(tape, model, batch, plans);
      double batch_loss = static_cast<double>(fwd.loss->v[0]);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(at / static_cast<size_t>(tc.batch_size)));
      }
      tape.backward(fwd.loss);
      clip_global_norm(params, tc.clip_norm);
      opt.step();
      opt.zero_grad();
      loss_sum += batch_loss * static_cast<double>(batch.items.size());
      n_items += static_cast<int64_t>(batch.items.size());
    }
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = loss_sum / static_cast<double>(n_items);
    double val = validation_loss(model, val_windows);
    stat.val_loss = std::isnan(val) ? stat.train_loss : val;
    summary.history.push_back(stat);

    if (stat.val_loss < summary.best_val_loss) {
      summary.best_val_loss = stat.val_loss;
      summary.best_epoch = epoch;
      best_values.clear();
      for (const auto& p : params) best_values.push_back(p->v);
    }
  }

  if (!best_values.empty()) {
    for (size_t i = 0; i < params.size(); ++i) params[i]->v = best_values[i];
  }
  return summary;
}

}  // namespace kgf
