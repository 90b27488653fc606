#pragma once

#include <random>
#include <vector>

#include "ctrkd/data.hpp"
#include "ctrkd/model.hpp"

namespace ctrkd::testutil {

// O(n^2) pair-counting AUC, the independent oracle for the fast path.
inline double auc_bruteforce(const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Small schema/tower so full-graph gradient checks stay fast.
inline FeatureSchema tiny_schema() {
  FeatureSchema s;
  s.user_vocab = {5, 3};
  s.ctx_vocab = {4};
  s.ad_vocab = {6};
  s.behavior_vocab = 6;
  s.embed_dim = 3;
  s.pos_embed_dim = 2;
  s.num_positions = 4;
  s.max_seq_len = 5;
  return s;
}

inline TowerConfig tiny_tower() {
  TowerConfig t;
  t.encoder_hidden = {6, 4};
  t.head_hidden = {3, 1};
  t.attn_hidden = 4;
  t.cross_layers = 1;
  return t;
}

inline Example random_example(const FeatureSchema& s, std::mt19937_64& rng,
                              bool allow_empty_seq = true) {
  Example ex;
  auto pick = [&](int64_t v) {
    return std::uniform_int_distribution<int64_t>(0, v - 1)(rng);
  };
  for (int64_t v : s.user_vocab) ex.user.push_back(pick(v));
  for (int64_t v : s.ctx_vocab) ex.ctx.push_back(pick(v));
  for (int64_t v : s.ad_vocab) ex.ad.push_back(pick(v));
  const int64_t lo = allow_empty_seq ? 0 : 1;
  const int64_t len =
      std::uniform_int_distribution<int64_t>(lo, s.max_seq_len)(rng);
  for (int64_t i = 0; i < len; ++i)
    ex.behaviors.push_back(pick(s.behavior_vocab));
  ex.pos = pick(s.num_positions);
  ex.click = static_cast<int>(pick(2));
  return ex;
}

inline Dataset random_dataset(const FeatureSchema& s, size_t n,
                              uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  for (size_t i = 0; i < n; ++i) {
    Example ex = random_example(s, rng);
    ex.id = static_cast<int64_t>(i);
    d.push_back(std::move(ex));
  }
  return d;
}

}  // namespace ctrkd::testutil
