#include "ctrkd/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ctrkd {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  require(j.is_object(), where + ": expected a JSON object");
  for (const auto& [key, val] : j.items()) {
    (void)val;
    bool ok = false;
    for (const auto& a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    require(ok, where + ": unknown key \"" + key + "\"");
  }
}

void read_gen(const json& j, GenConfig& g) {
  check_keys(j, {"n_train", "n_val", "n_test", "num_positions", "eta",
                 "policy_noise", "user_vocab", "ctx_vocab", "ad_vocab",
                 "behavior_vocab", "max_seq_len", "min_seq_len",
                 "relevance_seed", "relevance_scale", "relevance_bias",
                 "context_weight"},
             "gen");
  g.n_train = j.value("n_train", g.n_train);
  g.n_val = j.value("n_val", g.n_val);
  g.n_test = j.value("n_test", g.n_test);
  g.num_positions = j.value("num_positions", g.num_positions);
  g.eta = j.value("eta", g.eta);
  g.policy_noise = j.value("policy_noise", g.policy_noise);
  g.user_vocab = j.value("user_vocab", g.user_vocab);
  g.ctx_vocab = j.value("ctx_vocab", g.ctx_vocab);
  g.ad_vocab = j.value("ad_vocab", g.ad_vocab);
  g.behavior_vocab = j.value("behavior_vocab", g.behavior_vocab);
  g.max_seq_len = j.value("max_seq_len", g.max_seq_len);
  g.min_seq_len = j.value("min_seq_len", g.min_seq_len);
  g.relevance_seed = j.value("relevance_seed", g.relevance_seed);
  g.relevance_scale = j.value("relevance_scale", g.relevance_scale);
  g.relevance_bias = j.value("relevance_bias", g.relevance_bias);
  g.context_weight = j.value("context_weight", g.context_weight);
}

void read_tower(const json& j, TowerConfig& t) {
  check_keys(j, {"encoder_hidden", "head_hidden", "attn_hidden",
                 "cross_layers", "attn_softmax"},
             "tower");
  t.encoder_hidden = j.value("encoder_hidden", t.encoder_hidden);
  t.head_hidden = j.value("head_hidden", t.head_hidden);
  t.attn_hidden = j.value("attn_hidden", t.attn_hidden);
  t.cross_layers = j.value("cross_layers", t.cross_layers);
  t.attn_softmax = j.value("attn_softmax", t.attn_softmax);
}

void read_train(const json& j, TrainConfig& t) {
  check_keys(j, {"epochs", "batch_size", "seed", "lr", "beta1", "beta2",
                 "epsilon", "mode", "lambda", "teacher_stop_gradient",
                 "mse_per_coord", "pos_dropout_rate", "eval_every"},
             "train");
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.seed = j.value("seed", t.seed);
  t.adam.lr = j.value("lr", t.adam.lr);
  t.adam.beta1 = j.value("beta1", t.adam.beta1);
  t.adam.beta2 = j.value("beta2", t.adam.beta2);
  t.adam.epsilon = j.value("epsilon", t.adam.epsilon);
  if (j.contains("mode"))
    t.mode.variant = distill_variant_from_name(j["mode"].get<std::string>());
  t.mode.lambda = j.value("lambda", t.mode.lambda);
  t.teacher_stop_gradient =
      j.value("teacher_stop_gradient", t.teacher_stop_gradient);
  t.mse_per_coord = j.value("mse_per_coord", t.mse_per_coord);
  t.pos_dropout_rate = j.value("pos_dropout_rate", t.pos_dropout_rate);
  t.eval_every = j.value("eval_every", t.eval_every);
}

json gen_json(const GenConfig& g) {
  return json{{"n_train", g.n_train},
              {"n_val", g.n_val},
              {"n_test", g.n_test},
              {"num_positions", g.num_positions},
              {"eta", g.eta},
              {"policy_noise", g.policy_noise},
              {"user_vocab", g.user_vocab},
              {"ctx_vocab", g.ctx_vocab},
              {"ad_vocab", g.ad_vocab},
              {"behavior_vocab", g.behavior_vocab},
              {"max_seq_len", g.max_seq_len},
              {"min_seq_len", g.min_seq_len},
              {"relevance_seed", g.relevance_seed},
              {"relevance_scale", g.relevance_scale},
              {"relevance_bias", g.relevance_bias},
              {"context_weight", g.context_weight}};
}

json tower_json(const TowerConfig& t) {
  return json{{"encoder_hidden", t.encoder_hidden},
              {"head_hidden", t.head_hidden},
              {"attn_hidden", t.attn_hidden},
              {"cross_layers", t.cross_layers},
              {"attn_softmax", t.attn_softmax}};
}

json train_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"seed", t.seed},
              {"lr", t.adam.lr},
              {"beta1", t.adam.beta1},
              {"beta2", t.adam.beta2},
              {"epsilon", t.adam.epsilon},
              {"mode", distill_variant_name(t.mode.variant)},
              {"lambda", t.mode.lambda},
              {"teacher_stop_gradient", t.teacher_stop_gradient},
              {"mse_per_coord", t.mse_per_coord},
              {"pos_dropout_rate", t.pos_dropout_rate},
              {"eval_every", t.eval_every}};
}

json schema_json(const FeatureSchema& s) {
  return json{{"user_vocab", s.user_vocab},
              {"ctx_vocab", s.ctx_vocab},
              {"ad_vocab", s.ad_vocab},
              {"behavior_vocab", s.behavior_vocab},
              {"embed_dim", s.embed_dim},
              {"pos_embed_dim", s.pos_embed_dim},
              {"num_positions", s.num_positions},
              {"max_seq_len", s.max_seq_len}};
}

FeatureSchema schema_from_json(const json& j) {
  FeatureSchema s;
  s.user_vocab = j.at("user_vocab").get<std::vector<int64_t>>();
  s.ctx_vocab = j.at("ctx_vocab").get<std::vector<int64_t>>();
  s.ad_vocab = j.at("ad_vocab").get<std::vector<int64_t>>();
  s.behavior_vocab = j.at("behavior_vocab").get<int64_t>();
  s.embed_dim = j.at("embed_dim").get<int64_t>();
  s.pos_embed_dim = j.at("pos_embed_dim").get<int64_t>();
  s.num_positions = j.at("num_positions").get<int64_t>();
  s.max_seq_len = j.at("max_seq_len").get<int64_t>();
  return s;
}

}  // namespace

FeatureSchema RunConfig::schema() const {
  FeatureSchema s = gen.schema();
  s.embed_dim = embed_dim;
  s.pos_embed_dim = pos_embed_dim;
  return s;
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ContractViolation(origin + ": " + e.what());
  }
  check_keys(j, {"gen", "tower", "train", "model", "data_dir", "out_dir",
                 "seeds", "embed_dim", "pos_embed_dim"},
             origin);
  RunConfig cfg;
  if (j.contains("gen")) read_gen(j["gen"], cfg.gen);
  if (j.contains("tower")) read_tower(j["tower"], cfg.tower);
  if (j.contains("train")) read_train(j["train"], cfg.train);
  cfg.model = j.value("model", cfg.model);
  cfg.data_dir = j.value("data_dir", cfg.data_dir);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.seeds = j.value("seeds", cfg.seeds);
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.pos_embed_dim = j.value("pos_embed_dim", cfg.pos_embed_dim);
  model_kind_from_name(cfg.model);  // fails early on a bad name
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

std::string serialize_run_config(const RunConfig& cfg) {
  json j{{"gen", gen_json(cfg.gen)},
         {"tower", tower_json(cfg.tower)},
         {"train", train_json(cfg.train)},
         {"model", cfg.model},
         {"data_dir", cfg.data_dir},
         {"out_dir", cfg.out_dir},
         {"seeds", cfg.seeds},
         {"embed_dim", cfg.embed_dim},
         {"pos_embed_dim", cfg.pos_embed_dim}};
  return j.dump(2);
}

uint64_t config_hash(const RunConfig& cfg) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : serialize_run_config(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string checkpoint_metadata(const CtrNet& net, const TrainConfig& train,
                                uint64_t seed) {
  json j{{"model", model_kind_name(net.kind())},
         {"schema", schema_json(net.schema())},
         {"tower", tower_json(net.tower())},
         {"train", train_json(train)},
         {"seed", seed}};
  return j.dump();
}

std::unique_ptr<CtrNet> net_from_metadata(const std::string& metadata_json) {
  json j;
  try {
    j = json::parse(metadata_json);
  } catch (const json::parse_error& e) {
    throw ContractViolation(std::string("checkpoint metadata: ") + e.what());
  }
  FeatureSchema schema = schema_from_json(j.at("schema"));
  TowerConfig tower;
  read_tower(j.at("tower"), tower);
  ModelKind kind = model_kind_from_name(j.at("model").get<std::string>());
  return std::make_unique<CtrNet>(std::move(schema), std::move(tower), kind);
}

std::string model_name_from_metadata(const std::string& metadata_json) {
  return json::parse(metadata_json).at("model").get<std::string>();
}

std::string manifest_json(const SplitManifest& m, const RunConfig& cfg) {
  json j{{"format", "ctrkd-split v1"},
         {"seed", m.seed},
         {"n_train", m.n_train},
         {"n_val", m.n_val},
         {"n_test", m.n_test},
         {"gen", gen_json(cfg.gen)},
         {"embed_dim", cfg.embed_dim},
         {"pos_embed_dim", cfg.pos_embed_dim}};
  return j.dump(2);
}

LoadedManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "manifest not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ContractViolation(path + ": " + e.what());
  }
  require(j.value("format", "") == "ctrkd-split v1",
          path + ": unknown manifest format");
  LoadedManifest m;
  m.split.seed = j.at("seed").get<uint64_t>();
  m.split.n_train = j.at("n_train").get<int64_t>();
  m.split.n_val = j.at("n_val").get<int64_t>();
  m.split.n_test = j.at("n_test").get<int64_t>();
  read_gen(j.at("gen"), m.gen);
  m.schema = m.gen.schema();
  m.schema.embed_dim = j.value("embed_dim", m.schema.embed_dim);
  m.schema.pos_embed_dim = j.value("pos_embed_dim", m.schema.pos_embed_dim);
  return m;
}

}  // namespace ctrkd
