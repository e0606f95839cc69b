#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kgf/embedding.hpp"
#include "kgf/synthetic.hpp"
#include "test_util.hpp"

using namespace kgf;

namespace {

constexpr int64_t kT = 4, kL = 2, kS = 6, kDx = 5;

struct Fixture {
  FeatureSchema schema = FeatureSchema::synthetic_default(kT, kL);
  std::vector<SeriesRecord> records;
  WindowInput window;
  EmbeddingParams<double> emb;
  KnowledgeEmbeddingParams<double> kemb;

  Fixture() {
    SyntheticConfig cfg;
    cfg.n_series = 1;
    cfg.T = kT;
    cfg.L = kL;
    cfg.seed = 42;
    records = generate_synthetic(cfg);
    auto stats = compute_norm_stats(records, schema);
    auto normalized = normalize_records(records, schema, stats);
    window = build_window_input(normalized[0], schema, 0);
    Rng rng(7);
    emb = init_embedding_params<double>(schema, kDx, rng);
    kemb = init_knowledge_embedding_params<double>(schema, kDx, rng);
  }

  std::vector<uint8_t> future_only_mask() const {
    std::vector<uint8_t> m(kS, 0);
    for (int64_t t = kT; t < kS; ++t) m[static_cast<size_t>(t)] = 1;
    return m;
  }
};

void zero_all(EmbeddingParams<double>& p) {
  auto z = [](Var<double>& v) {
    if (v) std::fill(v->v.begin(), v->v.end(), 0.0);
  };
  z(p.numeric_w);
  z(p.numeric_b);
  for (auto& t : p.stat_id_tables) z(t);
  for (auto& t : p.know_id_tables) z(t);
  z(p.pos);
  z(p.mask_token);
  z(p.neutral_future);
}

}  // namespace

TEST_CASE("zero weights isolate the position table") {
  Fixture f;
  zero_all(f.emb);
  Rng rng(3);
  for (auto& v : f.emb.pos->v) v = rng.normal();

  Tape<double> tape(false);
  auto in = make_sequence_inputs<double>(f.window);
  auto x = embed_integrated(tape, f.emb, in, f.future_only_mask(), true, kT);
  REQUIRE(x->rows() == kS);
  REQUIRE(x->cols() == kDx);
  for (int64_t t = 0; t < kS; ++t)
    for (int64_t j = 0; j < kDx; ++j) CHECK(x->at(t, j) == f.emb.pos->at(t, j));
}

TEST_CASE("masked positions ignore statistic values bitwise") {
  Fixture f;
  auto mask = f.future_only_mask();
  mask[1] = 1;  // also mask one history position

  Tape<double> tape(false);
  auto in = make_sequence_inputs<double>(f.window);
  auto x1 = embed_integrated(tape, f.emb, in, mask, true, kT);

  auto perturbed = f.window;
  perturbed.stat_num.at(1, 0) += 123.0;
  perturbed.stat_num.at(1, 1) -= 45.0;
  auto in2 = make_sequence_inputs<double>(perturbed);
  auto x2 = embed_integrated(tape, f.emb, in2, mask, true, kT);
  CHECK(testutil::bitwise_equal(x1->v, x2->v));

  // unmasked history position must react
  auto perturbed3 = f.window;
  perturbed3.stat_num.at(2, 0) += 1.0;
  auto in3 = make_sequence_inputs<double>(perturbed3);
  auto x3 = embed_integrated(tape, f.emb, in3, mask, true, kT);
  bool changed = false;
  for (int64_t j = 0; j < kDx; ++j) changed = changed || x3->at(2, j) != x1->at(2, j);
  CHECK(changed);
}

TEST_CASE("integrated embedding matches the component-sum oracle") {
  Fixture f;
  auto mask = f.future_only_mask();
  Tape<double> tape(false);
  auto in = make_sequence_inputs<double>(f.window);
  auto x = embed_integrated(tape, f.emb, in, mask, true, kT);

  for (int64_t t = 0; t < kS; ++t) {
    for (int64_t j = 0; j < kDx; ++j) {
      double expect = 0.0;
      if (mask[static_cast<size_t>(t)]) {
        expect += f.emb.mask_token->v[static_cast<size_t>(j)];
      } else {
        for (int64_t c = 0; c < 2; ++c) expect += f.window.stat_num.at(t, c) * f.emb.numeric_w->at(c, j);
      }
      expect += f.window.know_num.at(t, 0) * f.emb.numeric_w->at(2, j);
      expect += f.emb.numeric_b->v[static_cast<size_t>(j)];
      expect += f.emb.know_id_tables[0]->at(f.window.know_ids[0][static_cast<size_t>(t)], j);
      expect += f.emb.know_id_tables[1]->at(f.window.know_ids[1][static_cast<size_t>(t)], j);
      expect += f.emb.pos->at(t, j);
      CHECK(x->at(t, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("knowledge embedding is bitwise invariant to statistics and mask plans") {
  Fixture f;
  Tape<double> tape(false);
  auto in = make_sequence_inputs<double>(f.window);
  auto xb1 = embed_knowledge(tape, f.kemb, in, true, kT);

  auto perturbed = f.window;
  for (int64_t t = 0; t < kT; ++t) {
    perturbed.stat_num.at(t, 0) *= -3.0;
    perturbed.stat_num.at(t, 1) += 9.0;
  }
  auto in2 = make_sequence_inputs<double>(perturbed);
  auto xb2 = embed_knowledge(tape, f.kemb, in2, true, kT);
  CHECK(testutil::bitwise_equal(xb1->v, xb2->v));
}

TEST_CASE("knowledge embedding of a single id column is table row plus position row") {
  FeatureSchema schema;
  schema.history_len = 3;
  schema.horizon = 1;
  schema.columns = {
      Column{"y", ColKind::numeric, ColGroup::statistic, true, 0, Transform::none},
      Column{"tag", ColKind::id, ColGroup::knowledge, false, 4, Transform::none},
  };
  schema.validate();
  Rng rng(5);
  auto kemb = init_knowledge_embedding_params<double>(schema, 3, rng);

  SequenceInputs<double> in;
  in.know_ids = {{2, 0, 3, 1}};
  Tape<double> tape(false);
  auto xb = embed_knowledge(tape, kemb, in, true, 3);
  for (int64_t t = 0; t < 4; ++t) {
    int64_t id = in.know_ids[0][static_cast<size_t>(t)];
    for (int64_t j = 0; j < 3; ++j) {
      CHECK(xb->at(t, j) == kemb.id_tables[0]->at(id, j) + kemb.pos->at(t, j));
    }
  }

  // all-zero knowledge and zero position table give exactly zero
  std::fill(kemb.id_tables[0]->v.begin(), kemb.id_tables[0]->v.end(), 0.0);
  std::fill(kemb.pos->v.begin(), kemb.pos->v.end(), 0.0);
  auto zero = embed_knowledge(tape, kemb, in, true, 3);
  for (double v : zero->v) CHECK(v == 0.0);
}

TEST_CASE("autodiff: masked positions have zero statistic gradient and live mask-token gradient") {
  Fixture f;
  auto mask = f.future_only_mask();
  mask[1] = 1;

  auto in = make_sequence_inputs<double>(f.window);
  in.stat_num->requires_grad = true;

  Tape<double> tape;
  auto x = embed_integrated(tape, f.emb, in, mask, true, kT);
  auto row = take_rows(tape, x, {1});
  auto loss = sum(tape, row);
  tape.backward(loss);

  in.stat_num->ensure_grad();
  for (int64_t c = 0; c < in.stat_num->cols(); ++c) CHECK(in.stat_num->grad_at(1, c) == 0.0);

  f.emb.mask_token->ensure_grad();
  double token_grad = 0;
  for (double g : f.emb.mask_token->g) token_grad += std::fabs(g);
  CHECK(token_grad > 0.0);

  // unmasked positions keep their statistic gradient
  Tape<double> tape2;
  in.stat_num->zero_grad();
  auto x2 = embed_integrated(tape2, f.emb, in, mask, true, kT);
  auto row2 = take_rows(tape2, x2, {2});
  tape2.backward(sum(tape2, row2));
  double stat_grad = 0;
  for (int64_t c = 0; c < in.stat_num->cols(); ++c) stat_grad += std::fabs(in.stat_num->grad_at(2, c));
  CHECK(stat_grad > 0.0);
}

TEST_CASE("hidden future knowledge replaces the contribution with the neutral vector") {
  Fixture f;
  Tape<double> tape(false);
  auto in = make_sequence_inputs<double>(f.window);

  auto open_x = embed_integrated(tape, f.emb, in, f.future_only_mask(), true, kT);
  auto hidden_x = embed_integrated(tape, f.emb, in, f.future_only_mask(), false, kT);
  // history rows agree bitwise
  for (int64_t t = 0; t < kT; ++t)
    for (int64_t j = 0; j < kDx; ++j) CHECK(open_x->at(t, j) == hidden_x->at(t, j));

  auto perturbed = f.window;
  perturbed.know_num.at(kT + 1, 0) += 5.0;
  auto in2 = make_sequence_inputs<double>(perturbed);
  auto hidden_x2 = embed_integrated(tape, f.emb, in2, f.future_only_mask(), false, kT);
  CHECK(testutil::bitwise_equal(hidden_x->v, hidden_x2->v));

  auto kb = embed_knowledge(tape, f.kemb, in, false, kT);
  auto kb2 = embed_knowledge(tape, f.kemb, in2, false, kT);
  CHECK(testutil::bitwise_equal(kb->v, kb2->v));
}

TEST_CASE("position rows are pairwise distinct at init") {
  Fixture f;
  for (int64_t a = 0; a < kS; ++a)
    for (int64_t b = a + 1; b < kS; ++b) {
      bool same = true;
      for (int64_t j = 0; j < kDx; ++j) same = same && f.emb.pos->at(a, j) == f.emb.pos->at(b, j);
      CHECK(!same);
    }
}

TEST_CASE("id out of vocabulary is rejected at lookup") {
  Fixture f;
  auto in = make_sequence_inputs<double>(f.window);
  in.know_ids[0][0] = 99;  // vocab is 2
  Tape<double> tape(false);
  CHECK_THROWS_AS(embed_integrated(tape, f.emb, in, f.future_only_mask(), true, kT), ShapeError);
}
