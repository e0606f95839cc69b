#pragma once

// Synthetic promotion-driven sales generator. Each series is trend + weekly
// seasonality + noise; promotions suppress sales for a few days beforehand
// and amplify them while running, as a decreasing function of price. The
// lift is a pure function of the knowledge columns (price, in_activity), so
// future sales are predictable from future knowledge by construction.

#include <algorithm>
#include <cmath>
#include <vector>

#include "kgf/dataset.hpp"
#include "kgf/schema.hpp"

namespace kgf {

struct PromoWindow {
  int64_t start = 0;  // 0-based, inclusive
  int64_t end = 0;    // inclusive
  double price_factor = 0.8;
};

struct SyntheticConfig {
  int64_t n_series = 100;
  int64_t T = 60;
  int64_t L = 10;
  int64_t extra_days = 0;  // record length = T + L + extra_days
  uint64_t seed = 1;

  // Explicit shared schedule; when empty and randomize_schedule is set, each
  // series gets one random promotion in history and one in the horizon.
  std::vector<PromoWindow> schedule;
  bool randomize_schedule = true;
  int64_t promo_len_min = 3;
  int64_t promo_len_max = 5;
  double price_factor_min = 0.7;
  double price_factor_max = 0.9;

  double alpha = 3.0;    // sales lift slope vs relative discount
  double beta = 0.4;     // pre-promotion suppression
  int64_t pre_days = 3;  // suppressed days before each promotion

  double noise_scale = 1.0;  // multiplies the per-series noise sigma

  int64_t length() const { return T + L + extra_days; }

  void validate() const {
    if (n_series < 1) throw ConfigError("synthetic: n_series must be >= 1");
    if (L < 1 || T < L) throw ConfigError("synthetic: requires T >= L >= 1");
    if (extra_days < 0) throw ConfigError("synthetic: extra_days must be >= 0");
    if (pre_days < 0) throw ConfigError("synthetic: pre_days must be >= 0");
    if (promo_len_min < 1 || promo_len_max < promo_len_min)
      throw ConfigError("synthetic: bad promo length range");
    for (const auto& w : schedule) {
      if (w.start < 0 || w.end < w.start || w.end >= length())
        throw ConfigError("synthetic: schedule window [" + std::to_string(w.start) + "," + std::to_string(w.end) +
                          "] out of range [0," + std::to_string(length()) + ")");
      if (w.price_factor <= 0.0 || w.price_factor > 1.0)
        throw ConfigError("synthetic: price_factor must be in (0,1]");
    }
    if (price_factor_min <= 0.0 || price_factor_max > 1.0 || price_factor_max < price_factor_min)
      throw ConfigError("synthetic: bad price factor range");
  }
};

namespace detail {

// Everything stochastic is drawn here, before the schedule is applied, so two
// runs with the same seed but different schedules share the same noise.
struct SeriesNoise {
  double level, slope, week_amp;
  int64_t phase;
  double sigma, ref_price, views_mult;
  std::vector<double> noise, price_wiggle, views_noise;
};

inline SeriesNoise draw_series_noise(Rng& rng, int64_t len, double noise_scale) {
  // noise_scale = 0 makes every series exactly trend + seasonality
  SeriesNoise n;
  n.level = rng.uniform(20.0, 200.0);
  n.slope = rng.uniform(-0.2, 0.5);
  n.week_amp = rng.uniform(0.05, 0.3) * n.level;
  n.phase = rng.uniform_int(0, 6);
  n.sigma = rng.uniform(0.02, 0.08) * n.level * noise_scale;
  n.ref_price = rng.uniform(10.0, 100.0);
  n.views_mult = rng.uniform(1.2, 3.0);
  n.noise.resize(static_cast<size_t>(len));
  n.price_wiggle.resize(static_cast<size_t>(len));
  n.views_noise.resize(static_cast<size_t>(len));
  for (int64_t t = 0; t < len; ++t) {
    n.noise[static_cast<size_t>(t)] = rng.normal();
    n.price_wiggle[static_cast<size_t>(t)] = 1.0 + 0.01 * noise_scale * rng.normal();
    n.views_noise[static_cast<size_t>(t)] = noise_scale * rng.normal();
  }
  return n;
}

inline std::vector<PromoWindow> draw_series_schedule(Rng& rng, const SyntheticConfig& cfg) {
  std::vector<PromoWindow> windows;
  int64_t len_min = std::min(cfg.promo_len_min, cfg.L);
  // one promotion inside history, clear of the horizon; skipped when T is
  // too short to host one
  int64_t hist_len_max = std::min(cfg.promo_len_max, cfg.T - cfg.pre_days - 1);
  if (hist_len_max >= 1) {
    int64_t dur1 = rng.uniform_int(std::min(len_min, hist_len_max), hist_len_max);
    int64_t lo = cfg.pre_days;
    int64_t hi = cfg.T - dur1;
    if (hi >= lo) {
      int64_t start1 = rng.uniform_int(lo, hi);
      double fac1 = rng.uniform(cfg.price_factor_min, cfg.price_factor_max);
      windows.push_back(PromoWindow{start1, start1 + dur1 - 1, fac1});
    }
  }
  // one promotion fully inside the horizon, start varies per series
  int64_t dur2 = rng.uniform_int(len_min, std::max(len_min, std::min(cfg.promo_len_max, cfg.L)));
  int64_t start2 = rng.uniform_int(cfg.T, cfg.T + cfg.L - dur2);
  double fac2 = rng.uniform(cfg.price_factor_min, cfg.price_factor_max);
  windows.push_back(PromoWindow{start2, start2 + dur2 - 1, fac2});
  return windows;
}

}  // namespace detail

inline std::vector<SeriesRecord> generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  FeatureSchema schema = FeatureSchema::synthetic_default(cfg.T, cfg.L);
  int64_t len = cfg.length();
  std::vector<SeriesRecord> records;
  records.reserve(static_cast<size_t>(cfg.n_series));

  for (int64_t i = 0; i < cfg.n_series; ++i) {
    Rng rng_base(mix_seed(cfg.seed, 0xBA5Eull, static_cast<uint64_t>(i)));
    Rng rng_sched(mix_seed(cfg.seed, 0x5CEDull, static_cast<uint64_t>(i)));
    auto noise = detail::draw_series_noise(rng_base, len, cfg.noise_scale);

    std::vector<PromoWindow> windows = cfg.schedule;
    if (windows.empty() && cfg.randomize_schedule) windows = detail::draw_series_schedule(rng_sched, cfg);

    std::vector<uint8_t> in_promo(static_cast<size_t>(len), 0);
    std::vector<double> factor(static_cast<size_t>(len), 1.0);
    std::vector<uint8_t> in_pre(static_cast<size_t>(len), 0);
    for (const auto& w : windows) {
      for (int64_t t = w.start; t <= w.end && t < len; ++t) {
        in_promo[static_cast<size_t>(t)] = 1;
        factor[static_cast<size_t>(t)] = w.price_factor;
      }
      for (int64_t t = std::max<int64_t>(0, w.start - cfg.pre_days); t < w.start; ++t)
        in_pre[static_cast<size_t>(t)] = 1;
    }

    SeriesRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.start_ts = 0;
    rec.statistics = DenseMat(len - cfg.L, 2);  // sales, views
    rec.knowledge = DenseMat(len, 3);           // price, in_activity, dow
    rec.targets = DenseMat(len, 1);

    for (int64_t t = 0; t < len; ++t) {
      double base = noise.level + noise.slope * static_cast<double>(t) +
                    noise.week_amp *
                        std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(t + noise.phase) / 7.0) +
                    noise.sigma * noise.noise[static_cast<size_t>(t)];
      base = std::max(base, 1e-6);
      double price = noise.ref_price * noise.price_wiggle[static_cast<size_t>(t)];
      double mult = 1.0;
      if (in_promo[static_cast<size_t>(t)]) {
        price *= factor[static_cast<size_t>(t)];
        mult = 1.0 + cfg.alpha * (1.0 - price / noise.ref_price);
      } else if (in_pre[static_cast<size_t>(t)]) {
        mult = 1.0 - cfg.beta;
      }
      double sales = base * mult;
      double views = std::max(sales * noise.views_mult + 0.05 * noise.level * noise.views_noise[static_cast<size_t>(t)], 0.0);

      rec.knowledge.at(t, 0) = price;
      rec.knowledge.at(t, 1) = in_promo[static_cast<size_t>(t)] ? 1.0 : 0.0;
      rec.knowledge.at(t, 2) = static_cast<double>(t % 7);
      rec.targets.at(t, 0) = sales;
      if (t < len - cfg.L) {
        rec.statistics.at(t, 0) = sales;
        rec.statistics.at(t, 1) = views;
      }
    }
    validate_record_counts(rec, schema);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace kgf
