#include "ctrkd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "ctrkd/graph.hpp"
#include "ctrkd/metrics.hpp"

namespace ctrkd {

std::string distill_variant_name(DistillVariant v) {
  switch (v) {
    case DistillVariant::kLogit: return "logit";
    case DistillVariant::kFeature: return "feature";
    case DistillVariant::kNone: return "none";
  }
  throw ContractViolation("distill_variant_name: bad variant");
}

DistillVariant distill_variant_from_name(const std::string& name) {
  if (name == "logit") return DistillVariant::kLogit;
  if (name == "feature") return DistillVariant::kFeature;
  if (name == "none") return DistillVariant::kNone;
  throw ContractViolation("unknown distill variant: " + name);
}

void DistillMode::validate() const {
  require(lambda >= 0.0, "DistillMode: lambda must be >= 0");
}

void TrainConfig::validate() const {
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  require(batch_size >= 1, "TrainConfig: batch size must be >= 1");
  require(eval_every >= 1, "TrainConfig: eval_every must be >= 1");
  require(pos_dropout_rate >= 0.0 && pos_dropout_rate <= 1.0,
          "TrainConfig: dropout rate outside [0,1]");
  mode.validate();
}

namespace {
inline double clamp_prob(double p) {
  return std::clamp(p, Tape::kProbClamp, 1.0 - Tape::kProbClamp);
}
}  // namespace

double ce_loss(double p, int y) {
  require(y == 0 || y == 1, "ce_loss: label must be 0 or 1");
  const double pc = clamp_prob(p);
  return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

double logit_distill_loss(double y_hat_s, double y_hat_t) {
  const double pc = clamp_prob(y_hat_s);
  return -(y_hat_t * std::log(pc) + (1.0 - y_hat_t) * std::log(1.0 - pc));
}

double feature_distill_loss(const std::vector<double>& z_s,
                            const std::vector<double>& z_t,
                            bool per_coordinate_mean) {
  require(z_s.size() == z_t.size(),
          "feature_distill_loss: dim mismatch " + std::to_string(z_s.size()) +
              " vs " + std::to_string(z_t.size()));
  require(!z_s.empty(), "feature_distill_loss: empty vectors");
  double acc = 0.0;
  for (size_t i = 0; i < z_s.size(); ++i) {
    const double d = z_s[i] - z_t[i];
    acc += d * d;
  }
  return per_coordinate_mean ? acc / static_cast<double>(z_s.size()) : acc;
}

double total_loss(double y_hat_s, double y_hat_t,
                  const std::vector<double>& z_s,
                  const std::vector<double>& z_t, int y_g,
                  const DistillMode& mode, bool mse_per_coord) {
  const double base = ce_loss(y_hat_s, y_g) + ce_loss(y_hat_t, y_g);
  const double lambda = mode.effective_lambda();
  if (lambda == 0.0) return base;
  const double term = mode.variant == DistillVariant::kLogit
                          ? logit_distill_loss(y_hat_s, y_hat_t)
                          : feature_distill_loss(z_s, z_t, mse_per_coord);
  return base + lambda * term;
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,student_ce,teacher_ce,distill,val_auc_s,val_logloss_s,"
         "val_auc_t,val_logloss_t\n";
  char buf[320];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.student_ce, r.teacher_ce, r.distill, r.val_auc_s,
                  r.val_logloss_s, r.val_auc_t, r.val_logloss_t);
    out << buf;
  }
  return out.str();
}

namespace {

std::vector<double> serve_scores(const CtrNet& net, const Dataset& data,
                                 int batch_size) {
  std::vector<double> scores;
  scores.reserve(data.size());
  for (size_t start = 0; start < data.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(data.size(), start + static_cast<size_t>(batch_size));
    std::vector<const Example*> batch;
    batch.reserve(end - start);
    for (size_t i = start; i < end; ++i) batch.push_back(&data[i]);
    auto part = net.serve(batch);
    scores.insert(scores.end(), part.begin(), part.end());
  }
  return scores;
}

std::vector<double> teacher_scores(const CtrNet& net, const Dataset& data,
                                   int batch_size) {
  std::vector<double> scores;
  scores.reserve(data.size());
  for (size_t start = 0; start < data.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(data.size(), start + static_cast<size_t>(batch_size));
    std::vector<const Example*> batch;
    std::vector<int64_t> pos;
    for (size_t i = start; i < end; ++i) {
      batch.push_back(&data[i]);
      pos.push_back(data[i].pos);
    }
    auto part = net.score_with_positions(batch, pos);
    scores.insert(scores.end(), part.begin(), part.end());
  }
  return scores;
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  const FeatureSchema& schema, const TowerConfig& tower,
                  const TrainConfig& config, ModelKind kind) {
  require(!train_set.empty(), "train: empty training set");
  config.validate();

  TrainResult result;
  result.net = std::make_unique<CtrNet>(schema, tower, kind, config.seed);
  CtrNet& net = *result.net;
  AdamState adam;
  std::mt19937_64 rng(config.seed ^ 0xD1B54A32D192ED03ull);
  const double lambda = config.mode.effective_lambda();
  const bool stop_grad = config.teacher_stop_gradient;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  int64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_s = 0.0, sum_t = 0.0, sum_d = 0.0;
    int64_t batches = 0;

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      std::vector<const Example*> batch;
      std::vector<int64_t> positions;
      std::vector<double> labels;
      for (size_t i = start; i < end; ++i) {
        const Example& ex = train_set[order[i]];
        batch.push_back(&ex);
        labels.push_back(static_cast<double>(ex.click));
        int64_t p = ex.pos;
        if (kind == ModelKind::kPosDropout) {
          std::uniform_real_distribution<double> u(0.0, 1.0);
          if (u(rng) < config.pos_dropout_rate) p = schema.unknown_position();
        }
        positions.push_back(p);
      }

      Tape tape;
      CtrNet::Forward fwd = net.forward_train(tape, batch, positions);
      Tape::Ref loss = nullptr;
      double comp_s = 0.0, comp_t = 0.0, comp_d = 0.0;
      switch (kind) {
        case ModelKind::kOurs: {
          Tape::Ref ls = tape.bce_mean(fwd.y_s, labels);
          Tape::Ref lt = tape.bce_mean(fwd.y_t, std::move(labels));
          loss = tape.add(ls, lt);
          comp_s = ls->val.values[0];
          comp_t = lt->val.values[0];
          if (lambda > 0.0) {
            Tape::Ref ld = nullptr;
            if (config.mode.variant == DistillVariant::kLogit) {
              Tape::Ref target = stop_grad ? tape.detach(fwd.y_t) : fwd.y_t;
              ld = tape.bce_mean_soft(fwd.y_s, target);
            } else {
              Tape::Ref target = stop_grad ? tape.detach(fwd.z_t) : fwd.z_t;
              ld = tape.mse_mean(fwd.z_s, target);
              if (!config.mse_per_coord)
                ld = tape.scale(ld, static_cast<double>(tower.z_dim()));
            }
            comp_d = ld->val.values[0];
            loss = tape.add(loss, tape.scale(ld, lambda));
          }
          break;
        }
        case ModelKind::kBackbone: {
          loss = tape.bce_mean(fwd.y_s, std::move(labels));
          comp_s = loss->val.values[0];
          break;
        }
        case ModelKind::kFixedPosition:
        case ModelKind::kPosDropout: {
          loss = tape.bce_mean(fwd.y_t, std::move(labels));
          comp_t = loss->val.values[0];
          break;
        }
        case ModelKind::kPal: {
          loss = tape.bce_mean(fwd.y_train, std::move(labels));
          comp_s = loss->val.values[0];
          break;
        }
      }
      ++step;
      if (!std::isfinite(loss->val.values[0])) {
        char msg[256];
        std::snprintf(msg, sizeof(msg),
                      "train: non-finite loss at step %lld "
                      "(student_ce=%g teacher_ce=%g distill=%g)",
                      static_cast<long long>(step), comp_s, comp_t, comp_d);
        throw ContractViolation(msg);
      }
      sum_s += comp_s;
      sum_t += comp_t;
      sum_d += comp_d;
      ++batches;

      net.params().zero_grads();
      tape.backward(loss);
      adam.apply(net.params(), config.adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.student_ce = sum_s / static_cast<double>(batches);
    rec.teacher_ce = sum_t / static_cast<double>(batches);
    rec.distill = sum_d / static_cast<double>(batches);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.val_auc_s = rec.val_logloss_s = rec.val_auc_t = rec.val_logloss_t = nan;
    const bool do_eval =
        !val_set.empty() && (epoch % config.eval_every == 0 || epoch == config.epochs);
    if (do_eval) {
      std::vector<int> labels;
      labels.reserve(val_set.size());
      for (const auto& ex : val_set) labels.push_back(ex.click);
      auto scores = serve_scores(net, val_set, config.batch_size);
      rec.val_auc_s = auc(scores, labels);
      rec.val_logloss_s = logloss(scores, labels);
      if (net.has_teacher_tower()) {
        auto tscores = teacher_scores(net, val_set, config.batch_size);
        rec.val_auc_t = auc(tscores, labels);
        rec.val_logloss_t = logloss(tscores, labels);
      }
    }
    result.history.push_back(rec);
  }
  return result;
}

double serve(const CtrNet& net, const Example& ex) { return net.serve_one(ex); }

SweepResult sweep_lambda(const Dataset& train_set, const Dataset& val_set,
                         const FeatureSchema& schema, const TowerConfig& tower,
                         const TrainConfig& base_config,
                         const std::vector<double>& grid,
                         DistillVariant variant) {
  require(!grid.empty(), "sweep_lambda: empty grid");
  require(!val_set.empty(), "sweep_lambda: empty validation set");
  SweepResult result;
  result.variant = variant;
  for (double lambda : grid) {
    SweepRow row;
    row.lambda = lambda;
    try {
      TrainConfig cfg = base_config;
      cfg.mode = DistillMode{variant, lambda};
      TrainResult tr = train(train_set, val_set, schema, tower, cfg,
                             ModelKind::kOurs);
      const EpochRecord& last = tr.history.back();
      row.val_logloss = last.val_logloss_s;
      row.val_auc = last.val_auc_s;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    result.rows.push_back(row);
  }
  const SweepRow* best = nullptr;
  for (const auto& r : result.rows)
    if (r.ok && (!best || r.val_logloss < best->val_logloss)) best = &r;
  if (best) {
    result.selected_lambda = best->lambda;
    for (auto& r : result.rows)
      r.selected = r.ok && r.lambda == best->lambda;
  }
  return result;
}

}  // namespace ctrkd
