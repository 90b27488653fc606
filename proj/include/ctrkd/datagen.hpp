#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ctrkd/data.hpp"
#include "ctrkd/model.hpp"

namespace ctrkd {

// Synthetic biased click log under the examination hypothesis:
//   P(click | features, k) = propensity(k) * true_relevance(features)
// with propensity(k) = (k+1)^-eta. A logging policy ranks each request's K
// candidates by relevance + Gaussian noise, so logged position and relevance
// are confounded the way production logs are.
struct GenConfig {
  int64_t n_train = 200000;
  int64_t n_val = 10000;
  int64_t n_test = 20000;
  int64_t num_positions = 10;  // K; one request fills positions 0..K-1
  double eta = 2.0;            // propensity exponent
  double policy_noise = 0.15;  // sigma of the ranking noise

  std::vector<int64_t> user_vocab{50, 20};
  std::vector<int64_t> ctx_vocab{10};
  std::vector<int64_t> ad_vocab{200};
  int64_t behavior_vocab = 200;
  int64_t max_seq_len = 20;
  int64_t min_seq_len = 1;  // behavior length uniform in [min, max]

  uint64_t relevance_seed = 1234;  // hidden relevance model
  double relevance_scale = 1.4;    // sharpness of the relevance sigmoid
  double relevance_bias = -0.3;    // shifts mean relevance
  // Weight of request-shared features (user/ctx/behaviors) in the hidden
  // relevance model relative to ad-side features. Small values make relevance
  // mostly an ad property, so a request's candidates genuinely compete.
  double context_weight = 0.25;

  void validate() const;
  FeatureSchema schema() const;
};

struct SplitManifest {
  uint64_t seed = 0;
  int64_t n_train = 0, n_val = 0, n_test = 0;
};

struct DatasetSplit {
  Dataset train, val, test;
  SplitManifest manifest;
};

double propensity(int64_t k, double eta);

// One Bernoulli click draw for the examination model.
int sample_click(double propensity_k, double relevance, std::mt19937_64& rng);

// Deterministic given (config, seed). Validation examples are extracted from
// the training period; the test tranche is generated afterwards from the
// same stream (next-day protocol).
DatasetSplit generate(const GenConfig& config, uint64_t seed);

// JSONL persistence. Field names are fixed:
//   {"user":[...],"ctx":[...],"ad":[...],"behaviors":[...],
//    "pos":int,"click":0|1,"rel":float?,"id":int}
void write_jsonl(const Dataset& data, const std::string& path);
// Rejects unknown fields and out-of-vocab indices; "pos" is required; "rel"
// optional. An empty file loads as an empty dataset.
Dataset load_jsonl(const std::string& path, const FeatureSchema& schema);

}  // namespace ctrkd
