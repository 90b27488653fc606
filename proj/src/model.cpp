#include "ctrkd/model.hpp"

#include <cmath>

namespace ctrkd {

void FeatureSchema::validate() const {
  require(!user_vocab.empty() && !ctx_vocab.empty() && !ad_vocab.empty(),
          "FeatureSchema: every field group needs at least one field");
  for (int64_t v : user_vocab) require(v >= 1, "FeatureSchema: user vocab < 1");
  for (int64_t v : ctx_vocab) require(v >= 1, "FeatureSchema: ctx vocab < 1");
  for (int64_t v : ad_vocab) require(v >= 1, "FeatureSchema: ad vocab < 1");
  require(behavior_vocab >= 1, "FeatureSchema: behavior vocab < 1");
  require(embed_dim >= 1 && pos_embed_dim >= 1, "FeatureSchema: dim < 1");
  require(num_positions >= 1, "FeatureSchema: need at least one position");
  require(max_seq_len >= 1, "FeatureSchema: max_seq_len < 1");
}

void FeatureSchema::validate_example(const Example& ex) const {
  auto check_group = [](const std::vector<int64_t>& idx,
                        const std::vector<int64_t>& vocab, const char* what) {
    require(idx.size() == vocab.size(),
            std::string("Example: wrong number of ") + what + " fields");
    for (size_t i = 0; i < idx.size(); ++i)
      require(idx[i] >= 0 && idx[i] < vocab[i],
              std::string("Example: ") + what + " index " +
                  std::to_string(idx[i]) + " out of vocab " +
                  std::to_string(vocab[i]));
  };
  check_group(ex.user, user_vocab, "user");
  check_group(ex.ctx, ctx_vocab, "ctx");
  check_group(ex.ad, ad_vocab, "ad");
  require(static_cast<int64_t>(ex.behaviors.size()) <= max_seq_len,
          "Example: behavior sequence longer than max_seq_len");
  for (int64_t b : ex.behaviors)
    require(b >= 0 && b < behavior_vocab,
            "Example: behavior index " + std::to_string(b) +
                " out of vocab " + std::to_string(behavior_vocab));
  require(ex.pos >= 0 && ex.pos < num_positions,
          "Example: position " + std::to_string(ex.pos) +
              " out of range K=" + std::to_string(num_positions));
  require(ex.click == 0 || ex.click == 1, "Example: click must be 0 or 1");
}

void TowerConfig::validate() const {
  require(!encoder_hidden.empty(), "TowerConfig: empty encoder");
  require(!head_hidden.empty() && head_hidden.back() == 1,
          "TowerConfig: head must end in a single unit");
  for (int64_t h : encoder_hidden) require(h >= 1, "TowerConfig: bad width");
  for (int64_t h : head_hidden) require(h >= 1, "TowerConfig: bad width");
  require(attn_hidden >= 1, "TowerConfig: bad attention width");
  require(cross_layers >= 0, "TowerConfig: negative cross layer count");
}

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kOurs: return "ours";
    case ModelKind::kBackbone: return "backbone";
    case ModelKind::kFixedPosition: return "fixed_pos";
    case ModelKind::kPosDropout: return "pos_dropout";
    case ModelKind::kPal: return "pal";
  }
  throw ContractViolation("model_kind_name: bad kind");
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "ours") return ModelKind::kOurs;
  if (name == "backbone") return ModelKind::kBackbone;
  if (name == "fixed_pos") return ModelKind::kFixedPosition;
  if (name == "pos_dropout") return ModelKind::kPosDropout;
  if (name == "pal") return ModelKind::kPal;
  throw ContractViolation("unknown model kind: " + name);
}

CtrNet::CtrNet(FeatureSchema schema, TowerConfig tower, ModelKind kind,
               uint64_t seed)
    : schema_(std::move(schema)), tower_(std::move(tower)), kind_(kind) {
  schema_.validate();
  tower_.validate();
  build_params(seed);
}

CtrNet::CtrNet(FeatureSchema schema, TowerConfig tower, ModelKind kind)
    : schema_(std::move(schema)), tower_(std::move(tower)), kind_(kind) {
  schema_.validate();
  tower_.validate();
}

namespace {
void make_dense(ParamStore& store, const std::string& prefix, int64_t in,
                int64_t out, std::mt19937_64& rng) {
  init_uniform(store.create(prefix + ".W", {in, out}), in, rng);
  init_uniform(store.create(prefix + ".b", {out}), in, rng);
}

void make_tower(ParamStore& store, const std::string& prefix, int64_t in,
                const TowerConfig& cfg, std::mt19937_64& rng) {
  int64_t cur = in;
  for (size_t i = 0; i < cfg.encoder_hidden.size(); ++i) {
    make_dense(store, prefix + ".enc" + std::to_string(i), cur,
               cfg.encoder_hidden[i], rng);
    cur = cfg.encoder_hidden[i];
  }
  for (size_t i = 0; i < cfg.head_hidden.size(); ++i) {
    make_dense(store, prefix + ".head" + std::to_string(i), cur,
               cfg.head_hidden[i], rng);
    cur = cfg.head_hidden[i];
  }
}
}  // namespace

void CtrNet::build_params(uint64_t seed) {
  // The base module draws from its own seeded stream so every kind shares a
  // bitwise-identical base initialization under the same seed.
  std::mt19937_64 rng_base(seed);
  std::mt19937_64 rng_tower(seed ^ 0x9E3779B97F4A7C15ull);

  const int64_t d = schema_.embed_dim;
  for (size_t f = 0; f < schema_.user_vocab.size(); ++f)
    init_uniform(params_.create("base.emb.user" + std::to_string(f),
                                {schema_.user_vocab[f], d}),
                 d, rng_base);
  for (size_t f = 0; f < schema_.ctx_vocab.size(); ++f)
    init_uniform(params_.create("base.emb.ctx" + std::to_string(f),
                                {schema_.ctx_vocab[f], d}),
                 d, rng_base);
  for (size_t f = 0; f < schema_.ad_vocab.size(); ++f)
    init_uniform(params_.create("base.emb.ad" + std::to_string(f),
                                {schema_.ad_vocab[f], d}),
                 d, rng_base);
  init_uniform(params_.create("base.emb.beh", {schema_.behavior_vocab, d}), d,
               rng_base);
  make_dense(params_, "base.attn.h", 4 * d, tower_.attn_hidden, rng_base);
  make_dense(params_, "base.attn.out", tower_.attn_hidden, 1, rng_base);
  const int64_t n0 = schema_.x0_dim();
  for (int64_t l = 0; l < tower_.cross_layers; ++l) {
    const std::string p = "base.cross" + std::to_string(l);
    init_uniform(params_.create(p + ".w", {n0, 1}), n0, rng_base);
    params_.create(p + ".b", {n0});  // zero-initialized
  }

  const bool uses_position = kind_ != ModelKind::kBackbone;
  if (uses_position && kind_ != ModelKind::kPal)
    init_uniform(params_.create("pos.table",
                                {schema_.num_positions + 1,
                                 schema_.pos_embed_dim}),
                 schema_.pos_embed_dim, rng_tower);
  if (has_teacher_tower())
    make_tower(params_, "teacher", schema_.hs_dim() + schema_.pos_embed_dim,
               tower_, rng_tower);
  if (has_student_tower())
    make_tower(params_, "student", schema_.hs_dim(), tower_, rng_tower);
  if (kind_ == ModelKind::kPal)
    init_uniform(params_.create("pal.pos_logit", {schema_.num_positions, 1}),
                 1, rng_tower);
}

Tape::Ref CtrNet::base_forward(Tape& tape,
                               const std::vector<const Example*>& batch) const {
  require(!batch.empty(), "base_forward: empty batch");
  const int64_t bsz = static_cast<int64_t>(batch.size());
  const int64_t d = schema_.embed_dim;
  const int64_t L = schema_.max_seq_len;
  for (const Example* ex : batch) schema_.validate_example(*ex);

  std::vector<Tape::Ref> fields;
  auto gather_group = [&](const char* group, size_t nfields,
                          auto get_index) {
    for (size_t f = 0; f < nfields; ++f) {
      std::vector<int64_t> idx(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) idx[i] = get_index(*batch[i], f);
      fields.push_back(tape.gather_rows(
          tape.param(const_cast<ParamStore&>(params_),
                     std::string("base.emb.") + group + std::to_string(f)),
          std::move(idx)));
    }
  };
  gather_group("user", schema_.user_vocab.size(),
               [](const Example& e, size_t f) { return e.user[f]; });
  gather_group("ctx", schema_.ctx_vocab.size(),
               [](const Example& e, size_t f) { return e.ctx[f]; });
  gather_group("ad", schema_.ad_vocab.size(),
               [](const Example& e, size_t f) { return e.ad[f]; });
  Tape::Ref x0 = tape.concat_cols(fields);

  auto& store = const_cast<ParamStore&>(params_);

  // DCN stack: x_{l+1} = x0 * (x_l . w) + b + x_l
  Tape::Ref xl = x0;
  for (int64_t l = 0; l < tower_.cross_layers; ++l) {
    const std::string p = "base.cross" + std::to_string(l);
    Tape::Ref s = tape.matmul(xl, tape.param(store, p + ".w"));
    Tape::Ref crossed = tape.row_scale(x0, s);
    xl = tape.add(tape.add_row_broadcast(crossed, tape.param(store, p + ".b")),
                  xl);
  }
  Tape::Ref h_dcn = xl;

  // DIN pooling over the behavior sequence against the target ad embedding.
  std::vector<int64_t> beh_idx(static_cast<size_t>(bsz * L), 0);
  std::vector<int64_t> lens(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    lens[i] = static_cast<int64_t>(batch[i]->behaviors.size());
    for (size_t j = 0; j < batch[i]->behaviors.size(); ++j)
      beh_idx[i * static_cast<size_t>(L) + j] = batch[i]->behaviors[j];
  }
  Tape::Ref beh_table = tape.param(store, "base.emb.beh");
  Tape::Ref E = tape.gather_rows(beh_table, std::move(beh_idx));
  std::vector<int64_t> ad0(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) ad0[i] = batch[i]->ad[0];
  Tape::Ref target = tape.gather_rows(
      tape.param(store, "base.emb.ad0"), std::move(ad0));
  Tape::Ref trep = tape.tile_rows(target, L);
  Tape::Ref attn_in = tape.concat_cols(
      {E, trep, tape.mul(E, trep), tape.sub(E, trep)});
  Tape::Ref hidden = tape.relu(tape.dense(attn_in,
                                          tape.param(store, "base.attn.h.W"),
                                          tape.param(store, "base.attn.h.b")));
  Tape::Ref scores = tape.dense(hidden, tape.param(store, "base.attn.out.W"),
                                tape.param(store, "base.attn.out.b"));
  Tape::Ref score_rows = tape.reshape(scores, {bsz, L});
  Tape::Ref weights = tower_.attn_softmax
                          ? tape.masked_softmax_rows(score_rows, lens)
                          : tape.masked_sigmoid_rows(score_rows, lens);
  Tape::Ref h_din = tape.seq_weighted_sum(weights, E);

  return tape.concat_cols({h_din, h_dcn});
}

std::pair<Tape::Ref, Tape::Ref> CtrNet::tower_forward(
    Tape& tape, Tape::Ref x, const std::string& prefix) const {
  auto& store = const_cast<ParamStore&>(params_);
  Tape::Ref cur = x;
  for (size_t i = 0; i < tower_.encoder_hidden.size(); ++i) {
    const std::string p = prefix + ".enc" + std::to_string(i);
    cur = tape.relu(tape.dense(cur, tape.param(store, p + ".W"),
                               tape.param(store, p + ".b")));
  }
  Tape::Ref z = cur;
  for (size_t i = 0; i < tower_.head_hidden.size(); ++i) {
    const std::string p = prefix + ".head" + std::to_string(i);
    cur = tape.dense(cur, tape.param(store, p + ".W"),
                     tape.param(store, p + ".b"));
    if (i + 1 < tower_.head_hidden.size()) cur = tape.relu(cur);
  }
  return {z, tape.sigmoid(cur)};
}

CtrNet::Forward CtrNet::forward_train(
    Tape& tape, const std::vector<const Example*>& batch,
    const std::vector<int64_t>& positions) const {
  Forward out;
  out.h_s = base_forward(tape, batch);
  auto& store = const_cast<ParamStore&>(params_);

  if (has_teacher_tower()) {
    require(positions.size() == batch.size(),
            "forward_train: positions size mismatch");
    for (int64_t p : positions)
      require(p >= 0 && p <= schema_.num_positions,
              "forward_train: position index " + std::to_string(p) +
                  " out of range (unknown slot is " +
                  std::to_string(schema_.num_positions) + ")");
    Tape::Ref e_p =
        tape.gather_rows(tape.param(store, "pos.table"), positions);
    auto [z, y] = tower_forward(tape, tape.concat_cols({out.h_s, e_p}),
                                "teacher");
    out.z_t = z;
    out.y_t = y;
  }
  if (has_student_tower()) {
    auto [z, y] = tower_forward(tape, out.h_s, "student");
    out.z_s = z;
    out.y_s = y;
  }
  if (kind_ == ModelKind::kPal) {
    require(positions.size() == batch.size(),
            "forward_train: positions size mismatch");
    for (int64_t p : positions)
      require(p >= 0 && p < schema_.num_positions,
              "forward_train: PAL position out of range");
    Tape::Ref logit =
        tape.gather_rows(tape.param(store, "pal.pos_logit"), positions);
    out.prob_seen = tape.sigmoid(logit);
    out.y_train = tape.mul(out.prob_seen, out.y_s);
  }
  return out;
}

std::vector<double> CtrNet::serve(
    const std::vector<const Example*>& batch) const {
  Tape tape;
  Tape::Ref h_s = base_forward(tape, batch);
  Tape::Ref y = nullptr;
  switch (kind_) {
    case ModelKind::kOurs:
    case ModelKind::kBackbone:
    case ModelKind::kPal:
      y = tower_forward(tape, h_s, "student").second;
      break;
    case ModelKind::kFixedPosition:
    case ModelKind::kPosDropout: {
      const int64_t slot = kind_ == ModelKind::kFixedPosition
                               ? 0
                               : schema_.unknown_position();
      std::vector<int64_t> pos(batch.size(), slot);
      Tape::Ref e_p = tape.gather_rows(
          tape.param(const_cast<ParamStore&>(params_), "pos.table"),
          std::move(pos));
      y = tower_forward(tape, tape.concat_cols({h_s, e_p}), "teacher").second;
      break;
    }
  }
  return y->val.values;
}

double CtrNet::serve_one(const Example& ex) const {
  return serve({&ex})[0];
}

std::vector<double> CtrNet::score_with_positions(
    const std::vector<const Example*>& batch,
    const std::vector<int64_t>& positions) const {
  require(has_teacher_tower(),
          "score_with_positions: kind has no position-aware tower");
  Tape tape;
  Forward f = forward_train(tape, batch, positions);
  return f.y_t->val.values;
}

}  // namespace ctrkd
