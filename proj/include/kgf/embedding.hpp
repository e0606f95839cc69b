#pragma once

// Embedding of per-timestep features into d_x vectors. The integrated branch
// sums a numeric projection, id lookups and a position row, substituting the
// learnable mask token for the statistic contribution at masked positions.
// The knowledge-only branch has its own parameters and never sees statistics
// or the mask token.

#include <numeric>
#include <vector>

#include "kgf/dataset.hpp"
#include "kgf/ops.hpp"
#include "kgf/schema.hpp"

namespace kgf {

template <typename T>
struct EmbeddingParams {
  Var<T> numeric_w;  // (n_stat_num + n_know_num) x d_x, statistic rows first
  Var<T> numeric_b;  // d_x
  std::vector<Var<T>> stat_id_tables;
  std::vector<Var<T>> know_id_tables;
  Var<T> pos;             // (T+L) x d_x
  Var<T> mask_token;      // d_x, replaces the statistic contribution
  Var<T> neutral_future;  // d_x, hides future knowledge in the ablation
  int64_t n_stat_num = 0;
  int64_t n_know_num = 0;
};

template <typename T>
struct KnowledgeEmbeddingParams {
  Var<T> numeric_w;  // n_know_num x d_x
  Var<T> numeric_b;  // d_x
  std::vector<Var<T>> id_tables;
  Var<T> pos;             // (T+L) x d_x
  Var<T> neutral_future;  // d_x
  int64_t n_know_num = 0;
};

namespace detail {

template <typename T>
Var<T> gaussian_param(Rng& rng, std::vector<int64_t> shape, double stddev = 0.02) {
  std::vector<T> v(static_cast<size_t>(shape_product(shape)));
  for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
  return make_var<T>(std::move(shape), std::move(v), true);
}

}  // namespace detail

// Tables and projections start at N(0, 0.02^2); biases and tokens at zero.
template <typename T>
EmbeddingParams<T> init_embedding_params(const FeatureSchema& schema, int64_t d_x, Rng& rng) {
  EmbeddingParams<T> p;
  auto stat_num = schema.numeric_of(ColGroup::statistic);
  auto know_num = schema.numeric_of(ColGroup::knowledge);
  p.n_stat_num = static_cast<int64_t>(stat_num.size());
  p.n_know_num = static_cast<int64_t>(know_num.size());
  int64_t n_num = p.n_stat_num + p.n_know_num;
  p.numeric_w = n_num > 0 ? detail::gaussian_param<T>(rng, {n_num, d_x}) : nullptr;
  p.numeric_b = zeros_var<T>({d_x}, true);
  for (int64_t pos : schema.ids_of(ColGroup::statistic)) {
    const Column& c = schema.column_in_group(ColGroup::statistic, pos);
    p.stat_id_tables.push_back(detail::gaussian_param<T>(rng, {c.vocab_size, d_x}));
  }
  for (int64_t pos : schema.ids_of(ColGroup::knowledge)) {
    const Column& c = schema.column_in_group(ColGroup::knowledge, pos);
    p.know_id_tables.push_back(detail::gaussian_param<T>(rng, {c.vocab_size, d_x}));
  }
  p.pos = detail::gaussian_param<T>(rng, {schema.history_len + schema.horizon, d_x});
  p.mask_token = zeros_var<T>({d_x}, true);
  p.neutral_future = zeros_var<T>({d_x}, true);
  return p;
}

template <typename T>
KnowledgeEmbeddingParams<T> init_knowledge_embedding_params(const FeatureSchema& schema, int64_t d_x, Rng& rng) {
  KnowledgeEmbeddingParams<T> p;
  auto know_num = schema.numeric_of(ColGroup::knowledge);
  p.n_know_num = static_cast<int64_t>(know_num.size());
  p.numeric_w = p.n_know_num > 0 ? detail::gaussian_param<T>(rng, {p.n_know_num, d_x}) : nullptr;
  p.numeric_b = zeros_var<T>({d_x}, true);
  for (int64_t pos : schema.ids_of(ColGroup::knowledge)) {
    const Column& c = schema.column_in_group(ColGroup::knowledge, pos);
    p.id_tables.push_back(detail::gaussian_param<T>(rng, {c.vocab_size, d_x}));
  }
  p.pos = detail::gaussian_param<T>(rng, {schema.history_len + schema.horizon, d_x});
  p.neutral_future = zeros_var<T>({d_x}, true);
  return p;
}

// Window features lifted to (constant) tensors plus id index lists.
template <typename T>
struct SequenceInputs {
  Var<T> stat_num;  // null when the schema has no numeric statistics
  std::vector<std::vector<int64_t>> stat_ids;
  Var<T> know_num;  // null when the schema has no numeric knowledge
  std::vector<std::vector<int64_t>> know_ids;
};

template <typename T>
SequenceInputs<T> make_sequence_inputs(const WindowInput& w) {
  SequenceInputs<T> in;
  if (w.stat_num.cols > 0) in.stat_num = from_dense<T>(w.stat_num);
  if (w.know_num.cols > 0) in.know_num = from_dense<T>(w.know_num);
  in.stat_ids = w.stat_ids;
  in.know_ids = w.know_ids;
  return in;
}

namespace detail {

inline std::vector<int64_t> iota_rows(int64_t from, int64_t count) {
  std::vector<int64_t> idx(static_cast<size_t>(count));
  std::iota(idx.begin(), idx.end(), from);
  return idx;
}

template <typename T>
Var<T> add_or_init(Tape<T>& tape, Var<T> acc, const Var<T>& term) {
  return acc ? add(tape, acc, term) : term;
}

}  // namespace detail

// Integrated embedding x. `mask` flags positions whose statistic contribution
// is replaced by the mask token; the caller always includes t >= T in it.
template <typename T>
Var<T> embed_integrated(Tape<T>& tape, const EmbeddingParams<T>& p, const SequenceInputs<T>& in,
                        const std::vector<uint8_t>& mask, bool use_future_knowledge, int64_t history_len) {
  int64_t S = p.pos->rows();
  int64_t d_x = p.pos->cols();
  if (static_cast<int64_t>(mask.size()) != S)
    throw ShapeError("embed_integrated: mask length does not match sequence length");

  Var<T> stat_contrib;
  if (in.stat_num) {
    auto w_stat = take_rows(tape, p.numeric_w, detail::iota_rows(0, p.n_stat_num));
    stat_contrib = matmul(tape, in.stat_num, w_stat);
  }
  for (size_t j = 0; j < in.stat_ids.size(); ++j) {
    stat_contrib = detail::add_or_init(tape, stat_contrib, take_rows(tape, p.stat_id_tables[j], in.stat_ids[j]));
  }
  if (!stat_contrib) stat_contrib = zeros_var<T>({S, d_x});
  auto masked_stat = substitute_rows(tape, stat_contrib, p.mask_token, mask);

  Var<T> know_contrib;
  if (in.know_num) {
    auto w_know = take_rows(tape, p.numeric_w, detail::iota_rows(p.n_stat_num, p.n_know_num));
    know_contrib = matmul(tape, in.know_num, w_know);
  }
  for (size_t j = 0; j < in.know_ids.size(); ++j) {
    know_contrib = detail::add_or_init(tape, know_contrib, take_rows(tape, p.know_id_tables[j], in.know_ids[j]));
  }
  know_contrib = know_contrib ? add_rowvec(tape, know_contrib, p.numeric_b)
                              : add_rowvec(tape, zeros_var<T>({S, d_x}), p.numeric_b);
  if (!use_future_knowledge) {
    std::vector<uint8_t> future(static_cast<size_t>(S), 0);
    for (int64_t t = history_len; t < S; ++t) future[static_cast<size_t>(t)] = 1;
    know_contrib = substitute_rows(tape, know_contrib, p.neutral_future, future);
  }

  return add(tape, add(tape, masked_stat, know_contrib), p.pos);
}

// Knowledge-only embedding x-bar: its own projection, lookups and position
// rows. Depends on knowledge columns and position only.
template <typename T>
Var<T> embed_knowledge(Tape<T>& tape, const KnowledgeEmbeddingParams<T>& p, const SequenceInputs<T>& in,
                       bool use_future_knowledge, int64_t history_len) {
  int64_t S = p.pos->rows();
  int64_t d_x = p.pos->cols();
  Var<T> contrib;
  if (in.know_num) contrib = matmul(tape, in.know_num, p.numeric_w);
  for (size_t j = 0; j < in.know_ids.size(); ++j) {
    contrib = detail::add_or_init(tape, contrib, take_rows(tape, p.id_tables[j], in.know_ids[j]));
  }
  contrib = contrib ? add_rowvec(tape, contrib, p.numeric_b)
                    : add_rowvec(tape, zeros_var<T>({S, d_x}), p.numeric_b);
  if (!use_future_knowledge) {
    std::vector<uint8_t> future(static_cast<size_t>(S), 0);
    for (int64_t t = history_len; t < S; ++t) future[static_cast<size_t>(t)] = 1;
    contrib = substitute_rows(tape, contrib, p.neutral_future, future);
  }
  return add(tape, contrib, p.pos);
}

}  // namespace kgf
