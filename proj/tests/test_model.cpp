#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ctrkd/graph.hpp"
#include "ctrkd/model.hpp"
#include "test_util.hpp"

using namespace ctrkd;
using namespace ctrkd::testutil;

namespace {

// din_pool rebuilt from tape primitives the same way base_forward does it,
// with hand-set tables. One example per call.
std::vector<double> din_pool(const std::vector<std::vector<double>>& behaviors,
                             const std::vector<double>& target,
                             bool zero_attn_weights) {
  const int64_t d = static_cast<int64_t>(target.size());
  const int64_t L = 5;
  ParamStore store;
  std::mt19937_64 rng(17);
  if (zero_attn_weights) {
    store.create("h.W", {4 * d, 3});
    store.create("h.b", {3});
    store.create("out.W", {3, 1});
    store.create("out.b", {1});
  } else {
    init_uniform(store.create("h.W", {4 * d, 3}), 4 * d, rng);
    init_uniform(store.create("h.b", {3}), 4 * d, rng);
    init_uniform(store.create("out.W", {3, 1}), 3, rng);
    init_uniform(store.create("out.b", {1}), 3, rng);
  }
  Tensor items({L, d});
  for (size_t i = 0; i < behaviors.size(); ++i)
    for (int64_t j = 0; j < d; ++j) items.at(static_cast<int64_t>(i), j) = behaviors[i][j];
  Tape t;
  Tape::Ref E = t.constant(items);
  Tape::Ref trep = t.tile_rows(t.constant(Tensor({1, d}, target)), L);
  Tape::Ref a = t.concat_cols({E, trep, t.mul(E, trep), t.sub(E, trep)});
  Tape::Ref h = t.relu(t.dense(a, t.param(store, "h.W"), t.param(store, "h.b")));
  Tape::Ref s = t.dense(h, t.param(store, "out.W"), t.param(store, "out.b"));
  Tape::Ref w = t.masked_softmax_rows(
      t.reshape(s, {1, L}), {static_cast<int64_t>(behaviors.size())});
  return t.seq_weighted_sum(w, E)->val.values;
}

}  // namespace

TEST_CASE("din_pool: empty sequence pools to zero vector") {
  CHECK(din_pool({}, {1.0, 2.0}, false) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("din_pool: identical items return that item") {
  auto out = din_pool({{0.5, -1.0}, {0.5, -1.0}}, {1.0, 2.0}, false);
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("din_pool: zero attention weights average distinct items") {
  auto out = din_pool({{1.0, 0.0}, {0.0, 1.0}}, {1.0, 2.0}, true);
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("din_pool: attention weights sum to 1 over real items") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Tensor scores({3, 6});
  for (double& v : scores.values) v = dist(rng);
  Tape t;
  Tape::Ref w = t.masked_softmax_rows(t.constant(scores), {6, 1, 3});
  const std::vector<int64_t> lens = {6, 1, 3};
  for (int64_t b = 0; b < 3; ++b) {
    double sum = 0.0;
    for (int64_t l = 0; l < 6; ++l) sum += w->val.at(b, l);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int64_t l = lens[static_cast<size_t>(b)]; l < 6; ++l)
      CHECK(w->val.at(b, l) == 0.0);
  }
}

namespace {
std::vector<double> cross_once(const std::vector<double>& x0,
                               const std::vector<double>& xl,
                               const std::vector<double>& w,
                               const std::vector<double>& b) {
  const int64_t n = static_cast<int64_t>(x0.size());
  Tape t;
  Tape::Ref x0r = t.constant(Tensor({1, n}, x0));
  Tape::Ref xlr = t.constant(Tensor({1, n}, xl));
  Tape::Ref s = t.matmul(xlr, t.constant(Tensor({n, 1}, w)));
  return t.add(t.add_row_broadcast(t.row_scale(x0r, s), t.constant(Tensor({n}, b))),
               xlr)
      ->val.values;
}
}  // namespace

TEST_CASE("cross_layer examples") {
  CHECK(cross_once({1, 2}, {3, 4}, {0, 0}, {0, 0}) == std::vector<double>{3, 4});
  CHECK(cross_once({1, 0}, {1, 0}, {1, 0}, {0, 0}) == std::vector<double>{2, 0});
  CHECK(cross_once({0, 0}, {3, 4}, {1, 1}, {5, 6}) == std::vector<double>{8, 10});
}

TEST_CASE("concat splits gradient over both inputs") {
  Tape t;
  Tape::Ref a = t.input(Tensor({1, 1}, {1.0}));
  Tape::Ref b = t.input(Tensor({1, 2}, {2.0, 3.0}));
  Tape::Ref h = t.concat_cols({a, b});
  CHECK(h->val.values == std::vector<double>{1, 2, 3});
  t.backward(t.sum(h));
  CHECK(a->grad.values == std::vector<double>{1});
  CHECK(b->grad.values == std::vector<double>{1, 1});
}

TEST_CASE("teacher and student with all-zero weights output 0.5") {
  FeatureSchema schema = tiny_schema();
  TowerConfig tower = tiny_tower();
  CtrNet net(schema, tower, ModelKind::kOurs, 3);
  for (auto& [name, e] : net.params())
    if (name.rfind("teacher", 0) == 0 || name.rfind("student", 0) == 0)
      e.value.zero();
  std::mt19937_64 rng(8);
  Example ex = random_example(schema, rng);
  Tape t;
  auto fwd = net.forward_train(t, {&ex}, {ex.pos});
  CHECK(fwd.y_t->val.values[0] == 0.5);
  CHECK(fwd.y_s->val.values[0] == 0.5);
}

TEST_CASE("teacher is position-sensitive; student positionally blind") {
  FeatureSchema schema = tiny_schema();
  CtrNet net(schema, tiny_tower(), ModelKind::kOurs, 5);
  std::mt19937_64 rng(9);
  Example ex = random_example(schema, rng);
  auto run = [&](int64_t pos) {
    Tape t;
    auto fwd = net.forward_train(t, {&ex}, {pos});
    return std::pair(fwd.y_t->val.values[0], fwd.y_s->val.values[0]);
  };
  auto [t0, s0] = run(0);
  auto [t3, s3] = run(3);
  CHECK(t0 != t3);       // distinct position embeddings, nonzero weights
  CHECK(s0 == s3);       // student never sees the position
  CHECK(t0 > 0.0);
  CHECK(t0 < 1.0);
}

TEST_CASE("z_t and z_s share a dimension under one TowerConfig") {
  FeatureSchema schema = tiny_schema();
  TowerConfig tower = tiny_tower();
  CtrNet net(schema, tower, ModelKind::kOurs, 1);
  std::mt19937_64 rng(2);
  Example ex = random_example(schema, rng);
  Tape t;
  auto fwd = net.forward_train(t, {&ex}, {ex.pos});
  CHECK(fwd.z_t->val.cols() == fwd.z_s->val.cols());
  CHECK(fwd.z_t->val.cols() == tower.z_dim());
}

TEST_CASE("invalid position index rejected") {
  FeatureSchema schema = tiny_schema();
  CtrNet net(schema, tiny_tower(), ModelKind::kOurs, 1);
  std::mt19937_64 rng(4);
  Example ex = random_example(schema, rng);
  Tape t;
  CHECK_THROWS_AS(net.forward_train(t, {&ex}, {schema.num_positions + 1}),
                  ContractViolation);
}

TEST_CASE("tower outputs finite over 1000 random examples") {
  FeatureSchema schema = tiny_schema();
  CtrNet net(schema, tiny_tower(), ModelKind::kOurs, 11);
  std::mt19937_64 rng(1000);
  std::vector<Example> exs;
  for (int i = 0; i < 1000; ++i) exs.push_back(random_example(schema, rng));
  std::vector<const Example*> batch;
  std::vector<int64_t> pos;
  for (const auto& e : exs) {
    batch.push_back(&e);
    pos.push_back(e.pos);
  }
  Tape t;
  auto fwd = net.forward_train(t, batch, pos);
  for (double v : fwd.y_t->val.values) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  for (double v : fwd.y_s->val.values) CHECK(std::isfinite(v));
  for (double v : fwd.h_s->val.values) CHECK(std::isfinite(v));
}

TEST_CASE("full teacher+student graph passes gradient check") {
  FeatureSchema schema = tiny_schema();
  TowerConfig tower = tiny_tower();
  std::mt19937_64 rng(77);
  std::vector<Example> exs;
  for (int i = 0; i < 3; ++i) exs.push_back(random_example(schema, rng, false));
  std::vector<const Example*> batch;
  std::vector<int64_t> pos;
  std::vector<double> labels;
  for (const auto& e : exs) {
    batch.push_back(&e);
    pos.push_back(e.pos);
    labels.push_back(e.click);
  }
  CtrNet net(schema, tower, ModelKind::kOurs, 21);
  auto eval = [&](bool with_grad) {
    Tape t;
    auto fwd = net.forward_train(t, batch, pos);
    Tape::Ref loss = t.add(t.bce_mean(fwd.y_s, labels),
                           t.bce_mean(fwd.y_t, labels));
    // Soft targets left attached so the loss stays a plain differentiable
    // function of every parameter (finite differences cannot honor a detach).
    loss = t.add(loss, t.scale(t.bce_mean_soft(fwd.y_s, fwd.y_t), 0.5));
    loss = t.add(loss, t.scale(t.mse_mean(fwd.z_s, fwd.z_t), 0.5));
    if (with_grad) t.backward(loss);
    return loss->val.values[0];
  };
  CHECK(grad_check(eval, net.params(), 1e-5) < 1e-4);
}

TEST_CASE("dcn with zero cross layers returns the concatenation") {
  FeatureSchema schema = tiny_schema();
  TowerConfig tower = tiny_tower();
  tower.cross_layers = 0;
  CtrNet net(schema, tower, ModelKind::kBackbone, 6);
  std::mt19937_64 rng(3);
  Example ex = random_example(schema, rng);
  Tape t;
  Tape::Ref h_s = net.base_forward(t, {&ex});
  // The trailing x0_dim coordinates of h_s are h_dcn; with no cross layers
  // they must equal the raw field-embedding concatenation.
  std::vector<double> expect;
  auto push_row = [&](const std::string& name, int64_t idx) {
    const Tensor& tab = net.params().value(name);
    for (int64_t j = 0; j < tab.cols(); ++j) expect.push_back(tab.at(idx, j));
  };
  for (size_t f = 0; f < schema.user_vocab.size(); ++f)
    push_row("base.emb.user" + std::to_string(f), ex.user[f]);
  for (size_t f = 0; f < schema.ctx_vocab.size(); ++f)
    push_row("base.emb.ctx" + std::to_string(f), ex.ctx[f]);
  for (size_t f = 0; f < schema.ad_vocab.size(); ++f)
    push_row("base.emb.ad" + std::to_string(f), ex.ad[f]);
  const int64_t off = schema.embed_dim;  // h_din comes first
  for (size_t i = 0; i < expect.size(); ++i)
    CHECK(h_s->val.values[static_cast<size_t>(off) + i] == expect[i]);
}

TEST_CASE("one cross layer with zero weights is the identity on x0") {
  FeatureSchema schema = tiny_schema();
  TowerConfig t1 = tiny_tower();
  t1.cross_layers = 1;
  TowerConfig t0 = t1;
  t0.cross_layers = 0;
  CtrNet with(schema, t1, ModelKind::kBackbone, 6);
  CtrNet without(schema, t0, ModelKind::kBackbone, 6);
  with.params().value("base.cross0.w").zero();
  with.params().value("base.cross0.b").zero();
  std::mt19937_64 rng(13);
  Example ex = random_example(schema, rng);
  Tape ta, tb;
  CHECK(with.base_forward(ta, {&ex})->val.values ==
        without.base_forward(tb, {&ex})->val.values);
}
