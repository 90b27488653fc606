#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctrkd/data.hpp"
#include "ctrkd/graph.hpp"
#include "ctrkd/params.hpp"

namespace ctrkd {

// Vocabulary sizes and embedding dims for every sparse field. The position
// table has num_positions+1 rows; the extra last slot is the reserved
// "unknown position" used by the dropout baseline's serving rule.
struct FeatureSchema {
  std::vector<int64_t> user_vocab{50, 20};
  std::vector<int64_t> ctx_vocab{10};
  std::vector<int64_t> ad_vocab{200};
  int64_t behavior_vocab = 200;
  int64_t embed_dim = 8;
  int64_t pos_embed_dim = 4;
  int64_t num_positions = 10;  // K
  int64_t max_seq_len = 20;    // L

  int64_t unknown_position() const { return num_positions; }
  int64_t num_flat_fields() const {
    return static_cast<int64_t>(user_vocab.size() + ctx_vocab.size() +
                                ad_vocab.size());
  }
  int64_t x0_dim() const { return num_flat_fields() * embed_dim; }
  int64_t hs_dim() const { return embed_dim + x0_dim(); }  // [h_din ; h_dcn]

  void validate() const;
  void validate_example(const Example& ex) const;
};

struct TowerConfig {
  std::vector<int64_t> encoder_hidden{64, 32};
  std::vector<int64_t> head_hidden{16, 1};
  int64_t attn_hidden = 16;
  int64_t cross_layers = 2;
  bool attn_softmax = true;

  int64_t z_dim() const { return encoder_hidden.back(); }
  void validate() const;
};

enum class ModelKind { kOurs, kBackbone, kFixedPosition, kPosDropout, kPal };

std::string model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

// One ensemble of embeddings + DIN + DCN (shared base) plus the towers the
// selected kind needs. Parameter layout:
//   base.*        shared base module
//   pos.table     position embeddings (position-aware kinds only)
//   teacher.*     position-aware tower (ours, fixed_position, pos_dropout)
//   student.*     position-free tower (ours, backbone, pal)
//   pal.pos_logit per-position seen-probability logits (pal only)
class CtrNet {
 public:
  CtrNet(FeatureSchema schema, TowerConfig tower, ModelKind kind,
         uint64_t seed);
  // Uninitialized parameters; filled by load_checkpoint.
  CtrNet(FeatureSchema schema, TowerConfig tower, ModelKind kind);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const FeatureSchema& schema() const { return schema_; }
  const TowerConfig& tower() const { return tower_; }
  ModelKind kind() const { return kind_; }

  struct Forward {
    Tape::Ref h_s = nullptr;
    Tape::Ref z_t = nullptr, y_t = nullptr;    // position-aware tower
    Tape::Ref z_s = nullptr, y_s = nullptr;    // position-free tower
    Tape::Ref prob_seen = nullptr;             // PAL position factor
    Tape::Ref y_train = nullptr;               // PAL prob_seen * pclick
  };

  // Base module: embeddings + DIN pooling + DCN cross stack -> h_s [B, ds].
  Tape::Ref base_forward(Tape& tape,
                         const std::vector<const Example*>& batch) const;

  // Training-mode graph. `positions` is the per-example index fed to the
  // position-aware tower (already transformed by the caller for dropout);
  // ignored by kinds without one.
  Forward forward_train(Tape& tape, const std::vector<const Example*>& batch,
                        const std::vector<int64_t>& positions) const;

  // Serving rule of the kind. Never reads an example's position field for
  // ours / backbone / pal; fixed_position serves position 0 and pos_dropout
  // serves the unknown slot regardless of the logged position.
  std::vector<double> serve(const std::vector<const Example*>& batch) const;
  double serve_one(const Example& ex) const;

  // Diagnostic: position-aware tower scored with the given positions.
  // Only valid for kinds that own one.
  std::vector<double> score_with_positions(
      const std::vector<const Example*>& batch,
      const std::vector<int64_t>& positions) const;

  bool has_teacher_tower() const {
    return kind_ == ModelKind::kOurs || kind_ == ModelKind::kFixedPosition ||
           kind_ == ModelKind::kPosDropout;
  }
  bool has_student_tower() const {
    return kind_ == ModelKind::kOurs || kind_ == ModelKind::kBackbone ||
           kind_ == ModelKind::kPal;
  }

 private:
  void build_params(uint64_t seed);
  // (z, y_hat) of a dense+relu encoder followed by the prediction head.
  std::pair<Tape::Ref, Tape::Ref> tower_forward(Tape& tape, Tape::Ref x,
                                                const std::string& prefix) const;

  FeatureSchema schema_;
  TowerConfig tower_;
  ModelKind kind_;
  ParamStore params_;
};

}  // namespace ctrkd
