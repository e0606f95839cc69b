#pragma once

// The full forecaster: embedding, a stack of attention layers fed the same
// knowledge embedding at every depth, and a linear head over the scored
// positions. Also the mask plans of the future-emphasized training strategy.

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgf/attention.hpp"
#include "kgf/embedding.hpp"

namespace kgf {

struct ModelConfig {
  int64_t d_x = 64;
  int64_t n_layers = 4;
  int64_t n_heads = 4;
  int64_t d_ff = 256;
  int64_t history_len = 200;  // T
  int64_t horizon = 15;       // L
  int64_t target_dim = 5;     // D
  LayerKind layer_kind = LayerKind::ali;
  bool use_future_knowledge = true;

  void validate() const {
    if (n_layers < 1) throw ConfigError("model: n_layers must be >= 1");
    if (n_heads < 1 || d_x % n_heads != 0) throw ConfigError("model: n_heads must divide d_x");
    if (d_ff < 1) throw ConfigError("model: d_ff must be >= 1");
    if (horizon < 1 || history_len < horizon) throw ConfigError("model: requires T >= L >= 1");
    if (target_dim < 1) throw ConfigError("model: target_dim must be >= 1");
  }

  void assert_compatible(const FeatureSchema& schema) const {
    if (schema.history_len != history_len || schema.horizon != horizon)
      throw ConfigError("model: T/L do not match the schema");
    if (schema.target_dim() != target_dim) throw ConfigError("model: target_dim does not match the schema");
  }

  // Reference-scale configuration (12x12); heavy on a workstation.
  static ModelConfig full_scale() {
    ModelConfig c;
    c.d_x = 144;
    c.n_layers = 12;
    c.n_heads = 12;
    c.d_ff = 576;
    return c;
  }
  // Default desk-scale configuration.
  static ModelConfig desk_scale() { return ModelConfig{}; }

  static ModelConfig for_schema(const FeatureSchema& schema, ModelConfig base = desk_scale()) {
    base.history_len = schema.history_len;
    base.horizon = schema.horizon;
    base.target_dim = schema.target_dim();
    return base;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"d_x", d_x},
                          {"n_layers", n_layers},
                          {"n_heads", n_heads},
                          {"d_ff", d_ff},
                          {"history_len", history_len},
                          {"horizon", horizon},
                          {"target_dim", target_dim},
                          {"layer_kind", to_string(layer_kind)},
                          {"use_future_knowledge", use_future_knowledge}};
  }
  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
      c.d_x = j.value("d_x", c.d_x);
      c.n_layers = j.value("n_layers", c.n_layers);
      c.n_heads = j.value("n_heads", c.n_heads);
      c.d_ff = j.value("d_ff", c.d_ff);
      c.history_len = j.value("history_len", c.history_len);
      c.horizon = j.value("horizon", c.horizon);
      c.target_dim = j.value("target_dim", c.target_dim);
      c.layer_kind = layer_kind_from_string(j.value("layer_kind", std::string(to_string(c.layer_kind))));
      c.use_future_knowledge = j.value("use_future_knowledge", c.use_future_knowledge);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model config: malformed JSON: ") + e.what());
    }
    c.validate();
    return c;
  }
  std::string fingerprint() const { return hex64(fnv1a64(to_json().dump())); }
};

// -- mask plans ---------------------------------------------------------------

enum class MaskKind { naive, span };

// Which positions are scored by the loss. Input masking always covers the
// horizon on top of the scored span: future statistics are never observable.
struct MaskPlan {
  MaskKind kind = MaskKind::naive;
  int64_t loss_start = 0;  // 0-based position within the window
  int64_t loss_len = 0;

  static MaskPlan naive(int64_t T, int64_t L) { return MaskPlan{MaskKind::naive, T, L}; }

  // Span strictly inside history: 0 < start and start + len <= T.
  static MaskPlan span(int64_t start, int64_t T, int64_t L) {
    MaskPlan p{MaskKind::span, start, L};
    p.validate(T, L);
    return p;
  }

  void validate(int64_t T, int64_t L) const {
    if (loss_len != L) throw ConfigError("mask plan: span length must equal the horizon");
    if (kind == MaskKind::naive) {
      if (loss_start != T) throw ConfigError("mask plan: naive plan must score exactly the horizon");
    } else {
      if (loss_start < 1 || loss_start + loss_len > T)
        throw ConfigError("mask plan: span [" + std::to_string(loss_start) + "," +
                          std::to_string(loss_start + loss_len - 1) + "] must lie strictly inside history");
    }
  }

  std::vector<int64_t> loss_positions() const {
    std::vector<int64_t> out(static_cast<size_t>(loss_len));
    for (int64_t i = 0; i < loss_len; ++i) out[static_cast<size_t>(i)] = loss_start + i;
    return out;
  }

  // Statistic-mask over the window: the scored span plus every t >= T.
  std::vector<uint8_t> input_mask(int64_t S, int64_t T) const {
    std::vector<uint8_t> m(static_cast<size_t>(S), 0);
    for (int64_t t = loss_start; t < loss_start + loss_len; ++t) m[static_cast<size_t>(t)] = 1;
    for (int64_t t = T; t < S; ++t) m[static_cast<size_t>(t)] = 1;
    return m;
  }
};

// naive with probability p1, span with probability p2 = 1 - p1; the span
// start is uniform over the valid range. Series too short for a span fall
// back to the naive plan (flagged through fell_back).
inline MaskPlan sample_mask_plan(Rng& rng, int64_t T, int64_t L, double p1, double p2, bool* fell_back = nullptr) {
  if (p1 < 0.0 || p2 < 0.0 || std::fabs(p1 + p2 - 1.0) > 1e-9)
    throw ConfigError("mask plan: p1 and p2 must be nonnegative and sum to 1");
  if (fell_back != nullptr) *fell_back = false;
  bool span = rng.uniform() >= p1;
  if (span) {
    if (T - L < 1) {
      if (fell_back != nullptr) *fell_back = true;
      return MaskPlan::naive(T, L);
    }
    int64_t start = rng.uniform_int(1, T - L);
    return MaskPlan::span(start, T, L);
  }
  return MaskPlan::naive(T, L);
}

// -- the model ----------------------------------------------------------------

template <typename T>
struct Model {
  ModelConfig cfg;
  FeatureSchema schema;
  NormStats norm;  // filled by the training pipeline, persisted in checkpoints
  EmbeddingParams<T> emb;
  KnowledgeEmbeddingParams<T> kemb;  // ali layers only
  std::vector<AttentionLayerParams<T>> layers;
  Var<T> head_w, head_b;

  static Model init(const ModelConfig& cfg, const FeatureSchema& schema, uint64_t seed) {
    cfg.validate();
    schema.validate();
    cfg.assert_compatible(schema);
    Model m;
    m.cfg = cfg;
    m.schema = schema;
    Rng rng(mix_seed(seed, 0x1217ull));
    m.emb = init_embedding_params<T>(schema, cfg.d_x, rng);
    if (cfg.layer_kind == LayerKind::ali) {
      m.kemb = init_knowledge_embedding_params<T>(schema, cfg.d_x, rng);
    }
    for (int64_t i = 0; i < cfg.n_layers; ++i) {
      m.layers.push_back(init_attention_layer_params<T>(cfg.layer_kind, cfg.d_x, cfg.n_heads, cfg.d_ff, rng));
    }
    m.head_w = detail::gaussian_param<T>(rng, {cfg.d_x, cfg.target_dim});
    m.head_b = zeros_var<T>({cfg.target_dim}, true);
    return m;
  }

  std::vector<std::pair<std::string, Var<T>>> named_params() const {
    std::vector<std::pair<std::string, Var<T>>> out;
    auto push = [&](const std::string& name, const Var<T>& v) {
      if (v) out.emplace_back(name, v);
    };
    push("emb.numeric.W", emb.numeric_w);
    push("emb.numeric.b", emb.numeric_b);
    {
      auto stat_ids = schema.ids_of(ColGroup::statistic);
      for (size_t j = 0; j < emb.stat_id_tables.size(); ++j)
        push("emb.id." + schema.column_in_group(ColGroup::statistic, stat_ids[j]).name, emb.stat_id_tables[j]);
      auto know_ids = schema.ids_of(ColGroup::knowledge);
      for (size_t j = 0; j < emb.know_id_tables.size(); ++j)
        push("emb.id." + schema.column_in_group(ColGroup::knowledge, know_ids[j]).name, emb.know_id_tables[j]);
    }
    push("emb.pos", emb.pos);
    push("emb.mask_token", emb.mask_token);
    push("emb.neutral_future", emb.neutral_future);
    if (cfg.layer_kind == LayerKind::ali) {
      push("kemb.numeric.W", kemb.numeric_w);
      push("kemb.numeric.b", kemb.numeric_b);
      auto know_ids = schema.ids_of(ColGroup::knowledge);
      for (size_t j = 0; j < kemb.id_tables.size(); ++j)
        push("kemb.id." + schema.column_in_group(ColGroup::knowledge, know_ids[j]).name, kemb.id_tables[j]);
      push("kemb.pos", kemb.pos);
      push("kemb.neutral_future", kemb.neutral_future);
    }
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      std::string base = "layer." + std::to_string(i) + ".";
      for (int64_t h = 0; h < l.n_heads; ++h) {
        std::string hb = base + "head." + std::to_string(h) + ".";
        push(hb + "wq", l.wq[static_cast<size_t>(h)]);
        push(hb + "wk", l.wk[static_cast<size_t>(h)]);
        push(hb + "wv", l.wv[static_cast<size_t>(h)]);
        if (l.kind == LayerKind::ali) {
          push(hb + "kwq", l.kwq[static_cast<size_t>(h)]);
          push(hb + "kwk", l.kwk[static_cast<size_t>(h)]);
        }
      }
      push(base + "out.W", l.out_w);
      push(base + "out.b", l.out_b);
      push(base + "ffn.W1", l.ffn_w1);
      push(base + "ffn.b1", l.ffn_b1);
      push(base + "ffn.W2", l.ffn_w2);
      push(base + "ffn.b2", l.ffn_b2);
      push(base + "ln1.g", l.ln1_g);
      push(base + "ln1.b", l.ln1_b);
      push(base + "ln2.g", l.ln2_g);
      push(base + "ln2.b", l.ln2_b);
    }
    push("head.W", head_w);
    push("head.b", head_b);
    return out;
  }

  std::vector<Var<T>> params() const {
    std::vector<Var<T>> out;
    for (auto& [name, v] : named_params()) out.push_back(v);
    return out;
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& p : params()) n += p->size();
    return n;
  }

  // One window through the model. Predictions cover the plan's scored
  // positions, in order, one row per position.
  Var<T> forward_window(Tape<T>& tape, const WindowInput& w, const MaskPlan& plan,
                        std::vector<AttentionMaps>* maps = nullptr, int64_t* knowledge_evals = nullptr) const {
    int64_t S = cfg.history_len + cfg.horizon;
    plan.validate(cfg.history_len, cfg.horizon);
    auto in = make_sequence_inputs<T>(w);
    auto mask = plan.input_mask(S, cfg.history_len);
    auto x = embed_integrated(tape, emb, in, mask, cfg.use_future_knowledge, cfg.history_len);

    Var<T> x_bar;
    std::vector<T> x_bar_snapshot;
    if (cfg.layer_kind == LayerKind::ali) {
      x_bar = embed_knowledge(tape, kemb, in, cfg.use_future_knowledge, cfg.history_len);
      if (checked_mode()) x_bar_snapshot = x_bar->v;
    }
    if (maps != nullptr) maps->assign(layers.size(), AttentionMaps{});
    for (size_t i = 0; i < layers.size(); ++i) {
      if (checked_mode() && x_bar) {
        // the same knowledge embedding must reach every layer untouched
        if (x_bar->v != x_bar_snapshot)
          throw NumericError("forward: knowledge embedding changed between layers");
      }
      x = attention_layer_forward(tape, layers[i], x, x_bar, maps ? &(*maps)[i] : nullptr, knowledge_evals);
    }
    auto scored = take_rows(tape, x, plan.loss_positions());
    return linear(tape, scored, head_w, head_b);
  }

  // Normalized-space label slice for a plan.
  Var<T> labels_for(const WindowInput& w, const MaskPlan& plan) const {
    DenseMat m(plan.loss_len, w.targets_win.cols);
    for (int64_t i = 0; i < plan.loss_len; ++i)
      for (int64_t j = 0; j < w.targets_win.cols; ++j) {
        double v = w.targets_win.at(plan.loss_start + i, j);
        if (std::isnan(v))
          throw DataError("labels: unobserved target at scored position " + std::to_string(plan.loss_start + i));
        m.at(i, j) = v;
      }
    return from_dense<T>(m);
  }
};

template <typename T>
struct BatchForward {
  std::vector<Var<T>> predictions;  // one (loss_len x D) tensor per record
  Var<T> loss;                      // mean over records of the per-record MSE
  int64_t knowledge_branch_evals = 0;
};

template <typename T>
BatchForward<T> forward_batch(Tape<T>& tape, const Model<T>& model, const WindowBatch& batch,
                              const std::vector<MaskPlan>& plans) {
  if (batch.items.empty()) throw DataError("forward_batch: empty batch");
  if (plans.size() != batch.items.size()) throw ConfigError("forward_batch: one mask plan per record required");
  BatchForward<T> out;
  Var<T> acc;
  for (size_t i = 0; i < batch.items.size(); ++i) {
    auto preds = model.forward_window(tape, batch.items[i], plans[i], nullptr, &out.knowledge_branch_evals);
    out.predictions.push_back(preds);
    auto labels = model.labels_for(batch.items[i], plans[i]);
    auto record_loss = mean_squared_error(tape, preds, labels);
    acc = acc ? add(tape, acc, record_loss) : record_loss;
  }
  out.loss = scale(tape, acc, T(1) / static_cast<T>(batch.items.size()));
  return out;
}

}  // namespace kgf
