#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ctrkd/metrics.hpp"
#include "ctrkd/tensor.hpp"
#include "test_util.hpp"

using namespace ctrkd;
using namespace ctrkd::testutil;

TEST_CASE("auc examples") {
  CHECK(auc({0.9, 0.1}, {1, 0}) == 1.0);
  CHECK(auc({0.5, 0.5, 0.5}, {1, 0, 1}) == 0.5);
  CHECK(auc({0.8, 0.6, 0.4, 0.2}, {1, 0, 1, 0}) == doctest::Approx(0.75));
  CHECK_THROWS_WITH_AS(auc({0.1, 0.2}, {1, 1}),
                       doctest::Contains("AUC undefined"), ContractViolation);
}

TEST_CASE("auc matches the brute-force pair count with and without ties") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_int_distribution<size_t> size(2, 200);
    const size_t n = size(rng);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    // Coarse score grid to force ties in about half of the trials.
    const int levels = trial % 2 == 0 ? 5 : 1000;
    std::uniform_int_distribution<int> level(0, levels);
    std::uniform_int_distribution<int> coin(0, 1);
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(level(rng)) / levels;
      labels[i] = coin(rng);
      (labels[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    CHECK(auc(scores, labels) ==
          doctest::Approx(auc_bruteforce(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("auc invariant under strictly increasing transforms") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> scores(100);
  std::vector<int> labels(100);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = dist(rng);
    labels[i] = i % 3 == 0;
  }
  const double base = auc(scores, labels);
  std::vector<double> affine = scores, cubed = scores;
  for (auto& v : affine) v = 2.0 * v + 1.0;
  for (auto& v : cubed) v = v * v * v;
  CHECK(auc(affine, labels) == base);
  CHECK(auc(cubed, labels) == base);
}

TEST_CASE("auc complement identity for tie-free scores") {
  std::vector<double> scores = {0.11, 0.52, 0.23, 0.94, 0.35, 0.77};
  std::vector<int> labels = {1, 0, 1, 1, 0, 0};
  std::vector<int> flipped;
  for (int y : labels) flipped.push_back(1 - y);
  CHECK(auc(scores, labels) + auc(scores, flipped) == doctest::Approx(1.0));
}

TEST_CASE("logloss examples") {
  std::vector<double> half(4, 0.5);
  CHECK(logloss(half, {1, 0, 1, 0}) == doctest::Approx(std::log(2.0)));
  CHECK(logloss({1.0, 0.0}, {1, 0}) ==
        doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-6));
  // Equals the mean of per-example ce values.
  std::vector<double> s = {0.3, 0.8, 0.6};
  std::vector<int> y = {0, 1, 0};
  double mean = 0.0;
  for (size_t i = 0; i < s.size(); ++i)
    mean += y[i] ? -std::log(s[i]) : -std::log(1 - s[i]);
  CHECK(logloss(s, y) == doctest::Approx(mean / 3.0).epsilon(1e-12));
}

TEST_CASE("logloss decreases when a score moves toward its label") {
  std::vector<double> s = {0.3, 0.8, 0.6};
  std::vector<int> y = {0, 1, 0};
  const double before = logloss(s, y);
  s[1] = 0.9;
  CHECK(logloss(s, y) < before);
}

TEST_CASE("empirical ctr by position") {
  Dataset d;
  for (int i = 0; i < 2; ++i) {
    Example ex;
    ex.pos = 0;
    ex.click = i == 0;
    d.push_back(ex);
  }
  auto buckets = empirical_ctr_by_position(d, 3);
  REQUIRE(buckets.size() == 3);
  CHECK(buckets[0].ctr == 0.5);
  CHECK(buckets[0].impressions == 2);
  CHECK(!buckets[1].ctr.has_value());  // empty bucket is null, never 0
  CHECK(!buckets[2].ctr.has_value());
}

TEST_CASE("constant model gives a flat pctr line") {
  Dataset d;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    Example ex;
    ex.pos = std::uniform_int_distribution<int64_t>(0, 4)(rng);
    d.push_back(ex);
  }
  std::vector<double> scores(d.size(), 0.5);
  auto buckets = mean_score_by_position(d, scores, 5);
  for (const auto& b : buckets)
    if (b.mean_pctr) CHECK(*b.mean_pctr == 0.5);
}

TEST_CASE("spearman is -1 for strictly decreasing bucket means") {
  std::vector<PositionBucket> buckets;
  for (int k = 0; k < 6; ++k) {
    PositionBucket b;
    b.position = k;
    b.impressions = 1;
    b.mean_pctr = 1.0 / (k + 1);
    buckets.push_back(b);
  }
  CHECK(spearman_vs_position(buckets) == doctest::Approx(-1.0));
}

TEST_CASE("sample std on {0.1,0.2,0.3} is 0.1") {
  CHECK(sample_std({0.1, 0.2, 0.3}) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(sample_std({0.42}) == 0.0);
}

TEST_CASE("aggregate flags the best-AUC row; single model is best") {
  MetricsReport a{.name = "m1", .auc = 0.7, .logloss = 0.5, .n = 10};
  auto single = aggregate_reports({a});
  REQUIRE(single.size() == 1);
  CHECK(single[0].best);

  MetricsReport b{.name = "m2", .auc = 0.8, .logloss = 0.4, .n = 10};
  MetricsReport a2{.name = "m1", .auc = 0.72, .logloss = 0.49, .n = 10};
  auto rows = aggregate_reports({a, b, a2});
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    if (r.name == "m1") {
      CHECK(r.runs == 2);
      CHECK(r.auc_mean == doctest::Approx(0.71));
      CHECK(!r.best);
    } else {
      CHECK(r.best);
    }
  }
  const std::string table = render_comparison_table(rows);
  CHECK(table.find("m2") != std::string::npos);
  CHECK(table.find("*best") != std::string::npos);
  const std::string csv = comparison_table_csv(rows);
  CHECK(csv.rfind("model,auc_mean", 0) == 0);
}

TEST_CASE("relevance auc ranks by thresholded true relevance") {
  Dataset d;
  std::vector<double> scores;
  for (int i = 0; i < 10; ++i) {
    Example ex;
    ex.rel = i / 10.0;
    ex.has_rel = true;
    d.push_back(ex);
    scores.push_back(i / 10.0);  // perfectly aligned with relevance
  }
  CHECK(relevance_auc(d, scores) == 1.0);
  Example no_rel;
  d.push_back(no_rel);
  scores.push_back(0.5);
  CHECK_THROWS_AS(relevance_auc(d, scores), ContractViolation);
}
