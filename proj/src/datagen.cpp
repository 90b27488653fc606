#include "ctrkd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace ctrkd {

using nlohmann::json;

void GenConfig::validate() const {
  require(n_train >= 1 && n_val >= 0 && n_test >= 0, "GenConfig: bad counts");
  require(num_positions >= 2, "GenConfig: need at least 2 positions");
  require(eta >= 0.0, "GenConfig: eta must be >= 0");
  require(policy_noise >= 0.0, "GenConfig: negative policy noise");
  require(!user_vocab.empty() && !ctx_vocab.empty() && !ad_vocab.empty(),
          "GenConfig: empty field group");
  for (int64_t v : user_vocab) require(v >= 1, "GenConfig: user vocab < 1");
  for (int64_t v : ctx_vocab) require(v >= 1, "GenConfig: ctx vocab < 1");
  for (int64_t v : ad_vocab) require(v >= 1, "GenConfig: ad vocab < 1");
  require(behavior_vocab >= 1, "GenConfig: behavior vocab < 1");
  require(min_seq_len >= 0 && min_seq_len <= max_seq_len,
          "GenConfig: bad behavior length range");
  require(context_weight >= 0.0, "GenConfig: negative context weight");
}

FeatureSchema GenConfig::schema() const {
  FeatureSchema s;
  s.user_vocab = user_vocab;
  s.ctx_vocab = ctx_vocab;
  s.ad_vocab = ad_vocab;
  s.behavior_vocab = behavior_vocab;
  s.num_positions = num_positions;
  s.max_seq_len = max_seq_len;
  return s;
}

double propensity(int64_t k, double eta) {
  require(k >= 0, "propensity: negative position");
  return std::pow(static_cast<double>(k + 1), -eta);
}

int sample_click(double propensity_k, double relevance,
                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < propensity_k * relevance ? 1 : 0;
}

namespace {

// Hidden linear relevance model drawn once per relevance_seed.
struct RelevanceModel {
  std::vector<std::vector<double>> field_weights;  // user.. ctx.. ad.. flattened order
  std::vector<double> beh_affinity;
  std::vector<double> ad_affinity;
  double scale = 1.0, bias = 0.0, norm = 1.0;
  double ctx_w = 1.0;
  size_t shared_fields = 0;  // leading entries of field_weights (user + ctx)

  explicit RelevanceModel(const GenConfig& cfg) {
    std::mt19937_64 rng(cfg.relevance_seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto draw = [&](int64_t n) {
      std::vector<double> w(static_cast<size_t>(n));
      for (double& x : w) x = n01(rng);
      return w;
    };
    for (int64_t v : cfg.user_vocab) field_weights.push_back(draw(v));
    for (int64_t v : cfg.ctx_vocab) field_weights.push_back(draw(v));
    for (int64_t v : cfg.ad_vocab) field_weights.push_back(draw(v));
    beh_affinity = draw(cfg.behavior_vocab);
    ad_affinity = draw(cfg.ad_vocab[0]);
    scale = cfg.relevance_scale;
    bias = cfg.relevance_bias;
    ctx_w = cfg.context_weight;
    shared_fields = cfg.user_vocab.size() + cfg.ctx_vocab.size();
    const double n_ad = static_cast<double>(cfg.ad_vocab.size());
    const double n_shared = static_cast<double>(shared_fields) + 1.0;
    norm = std::sqrt(ctx_w * ctx_w * n_shared + n_ad);
  }

  double score(const Example& ex) const {
    double s = 0.0;
    size_t f = 0;
    for (int64_t i : ex.user)
      s += ctx_w * field_weights[f++][static_cast<size_t>(i)];
    for (int64_t i : ex.ctx)
      s += ctx_w * field_weights[f++][static_cast<size_t>(i)];
    for (int64_t i : ex.ad) s += field_weights[f++][static_cast<size_t>(i)];
    if (!ex.behaviors.empty()) {
      double aff = 0.0;
      for (int64_t b : ex.behaviors)
        aff += beh_affinity[static_cast<size_t>(b)];
      aff = aff / static_cast<double>(ex.behaviors.size()) *
            ad_affinity[static_cast<size_t>(ex.ad[0])];
      s += ctx_w * aff;  // behaviors are shared across the request too
    }
    return s / norm * scale + bias;
  }

  double relevance(const Example& ex) const {
    return 1.0 / (1.0 + std::exp(-score(ex)));
  }
};

// Generates one request: K candidates sharing user/context/behaviors, ranked
// by noisy relevance score, clicked under the examination model.
void generate_request(const GenConfig& cfg, const RelevanceModel& rel,
                      std::mt19937_64& rng, int64_t& next_id, Dataset& out) {
  const int64_t K = cfg.num_positions;
  std::vector<Example> cands(static_cast<size_t>(K));
  std::vector<int64_t> user, ctx, behaviors;
  for (int64_t v : cfg.user_vocab)
    user.push_back(std::uniform_int_distribution<int64_t>(0, v - 1)(rng));
  for (int64_t v : cfg.ctx_vocab)
    ctx.push_back(std::uniform_int_distribution<int64_t>(0, v - 1)(rng));
  const int64_t len = std::uniform_int_distribution<int64_t>(
      cfg.min_seq_len, cfg.max_seq_len)(rng);
  for (int64_t i = 0; i < len; ++i)
    behaviors.push_back(std::uniform_int_distribution<int64_t>(
        0, cfg.behavior_vocab - 1)(rng));

  std::vector<double> noisy(static_cast<size_t>(K));
  std::normal_distribution<double> noise(0.0, cfg.policy_noise);
  for (int64_t c = 0; c < K; ++c) {
    Example& ex = cands[static_cast<size_t>(c)];
    ex.user = user;
    ex.ctx = ctx;
    ex.behaviors = behaviors;
    for (int64_t v : cfg.ad_vocab)
      ex.ad.push_back(std::uniform_int_distribution<int64_t>(0, v - 1)(rng));
    const double s = rel.score(ex);
    ex.rel = 1.0 / (1.0 + std::exp(-s));
    ex.has_rel = true;
    noisy[static_cast<size_t>(c)] = s + noise(rng);
  }
  std::vector<int64_t> order(static_cast<size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return noisy[static_cast<size_t>(a)] > noisy[static_cast<size_t>(b)];
  });
  for (int64_t k = 0; k < K; ++k) {
    Example& ex = cands[static_cast<size_t>(order[static_cast<size_t>(k)])];
    ex.pos = k;
    ex.click = sample_click(propensity(k, cfg.eta), ex.rel, rng);
    ex.id = next_id++;
  }
  // Emit in position order so the file layout is stable.
  for (int64_t k = 0; k < K; ++k)
    out.push_back(cands[static_cast<size_t>(order[static_cast<size_t>(k)])]);
}

Dataset generate_examples(const GenConfig& cfg, const RelevanceModel& rel,
                          std::mt19937_64& rng, int64_t& next_id, int64_t n) {
  Dataset out;
  out.reserve(static_cast<size_t>(n + cfg.num_positions));
  while (static_cast<int64_t>(out.size()) < n)
    generate_request(cfg, rel, rng, next_id, out);
  out.resize(static_cast<size_t>(n));
  return out;
}

}  // namespace

DatasetSplit generate(const GenConfig& config, uint64_t seed) {
  config.validate();
  RelevanceModel rel(config);
  std::mt19937_64 rng(seed);
  int64_t next_id = 0;

  // Training period first, then the held-out next-day tranche.
  Dataset period = generate_examples(config, rel, rng, next_id,
                                     config.n_train + config.n_val);
  Dataset test = generate_examples(config, rel, rng, next_id, config.n_test);

  // Extract the validation set from the training period.
  std::vector<size_t> order(period.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> is_val(period.size(), 0);
  for (int64_t i = 0; i < config.n_val; ++i) is_val[order[static_cast<size_t>(i)]] = 1;

  DatasetSplit split;
  split.train.reserve(static_cast<size_t>(config.n_train));
  split.val.reserve(static_cast<size_t>(config.n_val));
  for (size_t i = 0; i < period.size(); ++i)
    (is_val[i] ? split.val : split.train).push_back(std::move(period[i]));
  split.test = std::move(test);
  split.manifest = SplitManifest{seed, static_cast<int64_t>(split.train.size()),
                                 static_cast<int64_t>(split.val.size()),
                                 static_cast<int64_t>(split.test.size())};
  return split;
}

void write_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_jsonl: cannot open " + path);
  for (const Example& ex : data) {
    json j;
    j["id"] = ex.id;
    j["user"] = ex.user;
    j["ctx"] = ex.ctx;
    j["ad"] = ex.ad;
    j["behaviors"] = ex.behaviors;
    j["pos"] = ex.pos;
    j["click"] = ex.click;
    if (ex.has_rel) j["rel"] = ex.rel;
    out << j.dump() << "\n";
  }
  require(out.good(), "write_jsonl: write failed for " + path);
}

Dataset load_jsonl(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  require(in.good(), "load_jsonl: cannot open " + path);
  Dataset out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ContractViolation("load_jsonl: " + path + ":" +
                              std::to_string(lineno) + ": " + e.what());
    }
    for (const auto& [key, val] : j.items()) {
      (void)val;
      static const std::vector<std::string> known = {
          "id", "user", "ctx", "ad", "behaviors", "pos", "click", "rel"};
      require(std::find(known.begin(), known.end(), key) != known.end(),
              "load_jsonl: " + path + ":" + std::to_string(lineno) +
                  ": unknown field \"" + key + "\"");
    }
    require(j.contains("pos"),
            "load_jsonl: " + path + ":" + std::to_string(lineno) +
                ": missing required field \"pos\"");
    Example ex;
    if (j.contains("id")) ex.id = j["id"].get<int64_t>();
    ex.user = j.value("user", std::vector<int64_t>{});
    ex.ctx = j.value("ctx", std::vector<int64_t>{});
    ex.ad = j.value("ad", std::vector<int64_t>{});
    ex.behaviors = j.value("behaviors", std::vector<int64_t>{});
    ex.pos = j["pos"].get<int64_t>();
    ex.click = j.value("click", 0);
    if (j.contains("rel")) {
      ex.rel = j["rel"].get<double>();
      ex.has_rel = true;
    }
    try {
      schema.validate_example(ex);
    } catch (const ContractViolation& e) {
      throw ContractViolation("load_jsonl: " + path + ":" +
                              std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace ctrkd
