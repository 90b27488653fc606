#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctrkd/distill.hpp"
#include "ctrkd/graph.hpp"
#include "ctrkd/metrics.hpp"
#include "test_util.hpp"

using namespace ctrkd;
using namespace ctrkd::testutil;

TEST_CASE("ce_loss examples") {
  CHECK(ce_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ce_loss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ce_loss(0.9, 1) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(ce_loss(1.5, 1) == doctest::Approx(-std::log(1.0 - 1e-7)));  // clamped
  CHECK_THROWS_AS(ce_loss(0.5, 2), ContractViolation);
}

TEST_CASE("logit_distill_loss examples") {
  CHECK(logit_distill_loss(0.5, 0.5) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const double eps = 1e-4;
  const double v = logit_distill_loss(1.0 - eps, 1.0 - eps);
  CHECK(v == doctest::Approx(-((1 - eps) * std::log(1 - eps) +
                               eps * std::log(eps))).epsilon(1e-9));
  CHECK(v < 2e-3);
  // Gradient in the first argument vanishes at s == t.
  Tape t;
  Tape::Ref p = t.input(Tensor({1}, {0.3}));
  Tape::Ref target = t.constant(Tensor({1}, {0.3}));
  t.backward(t.bce_mean_soft(p, target));
  CHECK(p->grad.values[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("feature_distill_loss examples") {
  CHECK(feature_distill_loss({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(feature_distill_loss({1, 0}, {0, 0}) == doctest::Approx(0.5));
  CHECK(feature_distill_loss({1, 0}, {0, 0}, false) == doctest::Approx(1.0));
  CHECK(feature_distill_loss({1, 0}, {0, 0}) ==
        feature_distill_loss({0, 0}, {1, 0}));
  CHECK_THROWS_AS(feature_distill_loss({1}, {1, 2}), ContractViolation);
}

TEST_CASE("total_loss examples") {
  DistillMode logit{DistillVariant::kLogit, 1.0};
  CHECK(total_loss(0.5, 0.5, {}, {}, 1, logit) ==
        doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
  DistillMode zero{DistillVariant::kLogit, 0.0};
  CHECK(total_loss(0.7, 0.6, {}, {}, 1, zero) ==
        ce_loss(0.7, 1) + ce_loss(0.6, 1));  // bitwise
  DistillMode feat{DistillVariant::kFeature, 2.0};
  CHECK(total_loss(0.7, 0.6, {1, 2}, {1, 2}, 0, feat) ==
        ce_loss(0.7, 0) + ce_loss(0.6, 0));
  DistillMode none{DistillVariant::kNone, 5.0};
  CHECK(none.effective_lambda() == 0.0);
  CHECK(total_loss(0.7, 0.6, {1}, {2}, 1, none) ==
        ce_loss(0.7, 1) + ce_loss(0.6, 1));
  // Non-negative on a small sweep of inputs.
  for (double s : {0.1, 0.5, 0.9})
    for (double t : {0.2, 0.8})
      for (int y : {0, 1})
        CHECK(total_loss(s, t, {0.3}, {-0.4}, y, feat) >= 0.0);
}

namespace {
TrainConfig small_train_config(uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return cfg;
}
}  // namespace

TEST_CASE("train rejects an empty dataset") {
  FeatureSchema schema = tiny_schema();
  CHECK_THROWS_AS(train({}, {}, schema, tiny_tower(), small_train_config(0),
                        ModelKind::kOurs),
                  ContractViolation);
}

TEST_CASE("lambda=0: LOGIT and FEATURE give bitwise identical parameters") {
  FeatureSchema schema = tiny_schema();
  Dataset data = random_dataset(schema, 64, 5);
  TrainConfig cfg = small_train_config(3);
  cfg.mode = DistillMode{DistillVariant::kLogit, 0.0};
  auto a = train(data, {}, schema, tiny_tower(), cfg, ModelKind::kOurs);
  cfg.mode = DistillMode{DistillVariant::kFeature, 0.0};
  auto b = train(data, {}, schema, tiny_tower(), cfg, ModelKind::kOurs);
  for (const auto& [name, e] : a.net->params())
    CHECK(e.value.values == b.net->params().value(name).values);
}

TEST_CASE("training is deterministic given the seed") {
  FeatureSchema schema = tiny_schema();
  Dataset data = random_dataset(schema, 128, 9);
  Dataset val = random_dataset(schema, 32, 10);
  TrainConfig cfg = small_train_config(7);
  auto a = train(data, val, schema, tiny_tower(), cfg, ModelKind::kOurs);
  auto b = train(data, val, schema, tiny_tower(), cfg, ModelKind::kOurs);
  CHECK(history_csv(a.history) == history_csv(b.history));
  for (const auto& [name, e] : a.net->params())
    CHECK(e.value.values == b.net->params().value(name).values);
}

TEST_CASE("stop-gradient keeps teacher head gradients independent of lambda") {
  FeatureSchema schema = tiny_schema();
  Dataset data = random_dataset(schema, 32, 21);
  std::vector<const Example*> batch;
  std::vector<int64_t> pos;
  std::vector<double> labels;
  for (const auto& e : data) {
    batch.push_back(&e);
    pos.push_back(e.pos);
    labels.push_back(e.click);
  }
  auto teacher_grads = [&](double lambda) {
    CtrNet net(schema, tiny_tower(), ModelKind::kOurs, 4);
    Tape t;
    auto fwd = net.forward_train(t, batch, pos);
    Tape::Ref loss =
        t.add(t.bce_mean(fwd.y_s, labels), t.bce_mean(fwd.y_t, labels));
    if (lambda > 0.0)
      loss = t.add(loss,
                   t.scale(t.bce_mean_soft(fwd.y_s, t.detach(fwd.y_t)), lambda));
    net.params().zero_grads();
    t.backward(loss);
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, e] : net.params())
      if (name.rfind("teacher.head", 0) == 0) out[name] = e.grad.values;
    return out;
  };
  CHECK(teacher_grads(0.0) == teacher_grads(1.0));
}

TEST_CASE("serve ignores the position field and matches training forward") {
  FeatureSchema schema = tiny_schema();
  Dataset data = random_dataset(schema, 16, 33);
  TrainConfig cfg = small_train_config(1);
  cfg.epochs = 1;
  auto r = train(data, {}, schema, tiny_tower(), cfg, ModelKind::kOurs);
  Example ex = data[0];
  ex.pos = 1;
  const double a = serve(*r.net, ex);
  ex.pos = 3;
  CHECK(serve(*r.net, ex) == a);
  // serve equals the student head of a training-mode forward.
  Tape t;
  auto fwd = r.net->forward_train(t, {&ex}, {ex.pos});
  CHECK(fwd.y_s->val.values[0] == a);
}

TEST_CASE("sweep: single-element grid selects that lambda") {
  FeatureSchema schema = tiny_schema();
  Dataset data = random_dataset(schema, 64, 41);
  Dataset val = random_dataset(schema, 32, 42);
  TrainConfig cfg = small_train_config(2);
  cfg.epochs = 1;
  auto res = sweep_lambda(data, val, schema, tiny_tower(), cfg, {0.5},
                          DistillVariant::kLogit);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0].ok);
  CHECK(res.selected_lambda == 0.5);
  CHECK(res.rows[0].selected);
}

TEST_CASE("sweep: winner has the lowest validation logloss") {
  FeatureSchema schema = tiny_schema();
  Dataset data = random_dataset(schema, 96, 51);
  Dataset val = random_dataset(schema, 48, 52);
  TrainConfig cfg = small_train_config(6);
  cfg.epochs = 1;
  auto res = sweep_lambda(data, val, schema, tiny_tower(), cfg,
                          {0.01, 0.5, 1.0}, DistillVariant::kFeature);
  REQUIRE(res.selected_lambda.has_value());
  double best = 1e30;
  for (const auto& r : res.rows) {
    REQUIRE(r.ok);
    best = std::min(best, r.val_logloss);
  }
  for (const auto& r : res.rows)
    if (r.selected) CHECK(r.val_logloss == best);
}

TEST_CASE("history csv schema") {
  TrainHistory h{{1, 0.1, 0.2, 0.3, 0.6, 0.5, 0.7, 0.4}};
  const std::string csv = history_csv(h);
  CHECK(csv.rfind("epoch,student_ce,teacher_ce,distill,val_auc_s,"
                  "val_logloss_s,val_auc_t,val_logloss_t\n",
                  0) == 0);
}
