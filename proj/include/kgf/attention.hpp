#pragma once

// Encoder layers: plain bidirectional self-attention, and the knowledge-
// guided variant whose pre-softmax score map is revised additively by a
// branch computed from the knowledge-only embedding. Per head h:
//
//   att(i,j)     = (x W_q)(x W_k)^T / denom
//   att_bar(i,j) = (xb W_q')(xb W_k')^T / denom        (guided only)
//   att_star     = att + att_bar
//   out_h        = softmax_rows(att_star) (x W_v)
//
// denom is sqrt(d) for the plain layer and sqrt(2 d) for the guided one,
// with d the head dimension. The value path always reads x; the knowledge
// embedding passes through unchanged. Heads are concatenated, projected,
// then the usual post-norm add&norm and feed-forward sublayers apply.

#include <string>
#include <vector>

#include "kgf/ops.hpp"

namespace kgf {

enum class LayerKind { vsa, ali };

inline const char* to_string(LayerKind k) { return k == LayerKind::vsa ? "vsa" : "ali"; }
inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "vsa") return LayerKind::vsa;
  if (s == "ali") return LayerKind::ali;
  throw ConfigError("unknown layer kind '" + s + "' (expected vsa|ali)");
}

template <typename T>
struct AttentionLayerParams {
  LayerKind kind = LayerKind::ali;
  int64_t n_heads = 1;
  int64_t head_dim = 1;  // d = d_x / n_heads

  std::vector<Var<T>> wq, wk, wv;  // per head, d_x x d
  std::vector<Var<T>> kwq, kwk;    // knowledge branch, present iff guided
  Var<T> out_w;                    // (H d) x d_x
  Var<T> out_b;                    // d_x
  Var<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Var<T> ln1_g, ln1_b, ln2_g, ln2_b;
};

template <typename T>
AttentionLayerParams<T> init_attention_layer_params(LayerKind kind, int64_t d_x, int64_t n_heads, int64_t d_ff,
                                                    Rng& rng) {
  if (n_heads < 1 || d_x % n_heads != 0) {
    throw ConfigError("attention layer: n_heads must divide d_x (d_x=" + std::to_string(d_x) +
                      ", n_heads=" + std::to_string(n_heads) + ")");
  }
  AttentionLayerParams<T> p;
  p.kind = kind;
  p.n_heads = n_heads;
  p.head_dim = d_x / n_heads;
  auto gauss = [&](std::vector<int64_t> shape) {
    std::vector<T> v(static_cast<size_t>(shape_product(shape)));
    for (auto& x : v) x = static_cast<T>(0.02 * rng.normal());
    return make_var<T>(std::move(shape), std::move(v), true);
  };
  for (int64_t h = 0; h < n_heads; ++h) {
    p.wq.push_back(gauss({d_x, p.head_dim}));
    p.wk.push_back(gauss({d_x, p.head_dim}));
    p.wv.push_back(gauss({d_x, p.head_dim}));
    if (kind == LayerKind::ali) {
      p.kwq.push_back(gauss({d_x, p.head_dim}));
      p.kwk.push_back(gauss({d_x, p.head_dim}));
    }
  }
  p.out_w = gauss({n_heads * p.head_dim, d_x});
  p.out_b = zeros_var<T>({d_x}, true);
  p.ffn_w1 = gauss({d_x, d_ff});
  p.ffn_b1 = zeros_var<T>({d_ff}, true);
  p.ffn_w2 = gauss({d_ff, d_x});
  p.ffn_b2 = zeros_var<T>({d_x}, true);
  p.ln1_g = make_var<T>({d_x}, std::vector<T>(static_cast<size_t>(d_x), T(1)), true);
  p.ln1_b = zeros_var<T>({d_x}, true);
  p.ln2_g = make_var<T>({d_x}, std::vector<T>(static_cast<size_t>(d_x), T(1)), true);
  p.ln2_b = zeros_var<T>({d_x}, true);
  return p;
}

// Captured score matrices of one layer forward (opt-in; values only).
struct HeadMaps {
  DenseMat att;       // S x S pre-softmax scores of the integrated branch
  DenseMat att_bar;   // knowledge-branch scores (zeros for plain layers)
  DenseMat att_star;  // att + att_bar, the map that feeds softmax
  DenseMat weights;   // post-softmax rows
};

struct AttentionMaps {
  LayerKind kind = LayerKind::ali;
  std::vector<HeadMaps> heads;
};

template <typename T>
Var<T> attention_layer_forward(Tape<T>& tape, const AttentionLayerParams<T>& p, const Var<T>& x,
                               const Var<T>& x_bar, AttentionMaps* maps = nullptr,
                               int64_t* knowledge_evals = nullptr) {
  if (x->rank() != 2 || x->cols() != p.out_w->cols())
    throw ShapeError("attention: input must be S x d_x, got " + shape_to_string(x->shape));
  bool guided = p.kind == LayerKind::ali;
  if (guided) {
    if (!x_bar) throw ShapeError("attention: guided layer requires the knowledge embedding");
    if (x_bar->shape != x->shape)
      throw ShapeError("attention: x and knowledge embedding shapes differ, " + shape_to_string(x->shape) + " vs " +
                       shape_to_string(x_bar->shape));
  }
  T denom = static_cast<T>(
      std::sqrt(static_cast<double>(guided ? 2 * p.head_dim : p.head_dim)));
  T inv_denom = T(1) / denom;

  if (maps != nullptr) {
    maps->kind = p.kind;
    maps->heads.clear();
  }

  std::vector<Var<T>> head_outputs;
  head_outputs.reserve(static_cast<size_t>(p.n_heads));
  for (int64_t h = 0; h < p.n_heads; ++h) {
    size_t hi = static_cast<size_t>(h);
    auto q = matmul(tape, x, p.wq[hi]);
    auto k = matmul(tape, x, p.wk[hi]);
    auto att = scale(tape, matmul_nt(tape, q, k), inv_denom);
    Var<T> att_bar;
    Var<T> att_star = att;
    if (guided) {
      auto qb = matmul(tape, x_bar, p.kwq[hi]);
      auto kb = matmul(tape, x_bar, p.kwk[hi]);
      att_bar = scale(tape, matmul_nt(tape, qb, kb), inv_denom);
      att_star = add(tape, att, att_bar);
      if (knowledge_evals != nullptr) ++(*knowledge_evals);
    }
    auto weights = softmax(tape, att_star, 1);
    auto v = matmul(tape, x, p.wv[hi]);
    head_outputs.push_back(matmul(tape, weights, v));
    if (maps != nullptr) {
      HeadMaps hm;
      hm.att = to_dense(*att);
      hm.att_bar = guided ? to_dense(*att_bar) : DenseMat(x->rows(), x->rows(), 0.0);
      hm.att_star = to_dense(*att_star);
      hm.weights = to_dense(*weights);
      maps->heads.push_back(std::move(hm));
    }
  }

  auto concat = p.n_heads == 1 ? head_outputs[0] : concat_cols(tape, head_outputs);
  auto proj = linear(tape, concat, p.out_w, p.out_b);
  auto y = layer_norm(tape, add(tape, x, proj), p.ln1_g, p.ln1_b);
  auto hidden = relu(tape, linear(tape, y, p.ffn_w1, p.ffn_b1));
  auto ffn = linear(tape, hidden, p.ffn_w2, p.ffn_b2);
  return layer_norm(tape, add(tape, y, ffn), p.ln2_g, p.ln2_b);
}

// -- attention-weight statistics ----------------------------------------------

struct AttentionHistRow {
  int64_t layer = 0;
  int64_t head = 0;
  std::string branch;  // "att" or "att_bar"
  double lo = 0, hi = 0;
  int64_t count = 0;
};

struct AttentionStatsReport {
  int64_t n_layers = 0;
  int64_t bins = 0;
  std::vector<AttentionHistRow> hist;
  // per layer: fraction of (head, i, j) positions where att_bar > att
  std::vector<std::pair<int64_t, double>> proportion;
};

// Aggregates recorded maps (outer index: forward pass / record, inner:
// layer). Histograms share one value range per layer across both branches.
inline AttentionStatsReport extract_attention_stats(const std::vector<std::vector<AttentionMaps>>& recorded,
                                                    int64_t bins = 50) {
  if (recorded.empty() || recorded.front().empty())
    throw ConfigError("attention stats: no recorded maps (enable map recording)");
  if (bins < 1) throw ConfigError("attention stats: bins must be >= 1");
  size_t n_layers = recorded.front().size();
  for (const auto& layers : recorded) {
    if (layers.size() != n_layers) throw ConfigError("attention stats: inconsistent layer counts across records");
  }
  AttentionStatsReport report;
  report.n_layers = static_cast<int64_t>(n_layers);
  report.bins = bins;

  for (size_t layer = 0; layer < n_layers; ++layer) {
    bool guided = recorded.front()[layer].kind == LayerKind::ali;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& layers : recorded) {
      for (const auto& head : layers[layer].heads) {
        for (double v : head.att.v) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        if (guided) {
          for (double v : head.att_bar.v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
        }
      }
    }
    if (!(hi > lo)) hi = lo + 1.0;
    double width = (hi - lo) / static_cast<double>(bins);
    size_t n_heads = recorded.front()[layer].heads.size();

    auto histogram = [&](int64_t head, bool bar) {
      std::vector<int64_t> counts(static_cast<size_t>(bins), 0);
      for (const auto& layers : recorded) {
        const auto& hm = layers[layer].heads[static_cast<size_t>(head)];
        const auto& values = bar ? hm.att_bar.v : hm.att.v;
        for (double v : values) {
          int64_t b = std::min<int64_t>(bins - 1, static_cast<int64_t>((v - lo) / width));
          ++counts[static_cast<size_t>(std::max<int64_t>(0, b))];
        }
      }
      for (int64_t b = 0; b < bins; ++b) {
        report.hist.push_back(AttentionHistRow{static_cast<int64_t>(layer), head, bar ? "att_bar" : "att",
                                               lo + width * static_cast<double>(b),
                                               lo + width * static_cast<double>(b + 1),
                                               counts[static_cast<size_t>(b)]});
      }
    };
    for (size_t head = 0; head < n_heads; ++head) {
      histogram(static_cast<int64_t>(head), false);
      if (guided) histogram(static_cast<int64_t>(head), true);
    }

    int64_t above = 0, total = 0;
    if (guided) {
      for (const auto& layers : recorded) {
        for (const auto& hm : layers[layer].heads) {
          for (size_t i = 0; i < hm.att.v.size(); ++i) {
            if (hm.att_bar.v[i] > hm.att.v[i]) ++above;
            ++total;
          }
        }
      }
    }
    report.proportion.emplace_back(static_cast<int64_t>(layer),
                                   total > 0 ? static_cast<double>(above) / static_cast<double>(total) : 0.0);
  }
  return report;
}

}  // namespace kgf
