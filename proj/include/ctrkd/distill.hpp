#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctrkd/data.hpp"
#include "ctrkd/model.hpp"
#include "ctrkd/params.hpp"

namespace ctrkd {

enum class DistillVariant { kLogit, kFeature, kNone };

std::string distill_variant_name(DistillVariant v);
DistillVariant distill_variant_from_name(const std::string& name);

struct DistillMode {
  DistillVariant variant = DistillVariant::kLogit;
  double lambda = 1.0;  // forced to 0 for kNone

  void validate() const;
  double effective_lambda() const {
    return variant == DistillVariant::kNone ? 0.0 : lambda;
  }
};

// Scalar loss helpers (also the contract surface; the training loop uses the
// tape equivalents with identical arithmetic).
double ce_loss(double p, int y);
double logit_distill_loss(double y_hat_s, double y_hat_t);
double feature_distill_loss(const std::vector<double>& z_s,
                            const std::vector<double>& z_t,
                            bool per_coordinate_mean = true);
double total_loss(double y_hat_s, double y_hat_t,
                  const std::vector<double>& z_s,
                  const std::vector<double>& z_t, int y_g,
                  const DistillMode& mode, bool mse_per_coord = true);

struct TrainConfig {
  int epochs = 3;
  int batch_size = 256;
  uint64_t seed = 0;
  AdamConfig adam;
  DistillMode mode;
  bool teacher_stop_gradient = true;  // detach teacher inside distill term
  bool mse_per_coord = true;          // raw squared norm when false
  double pos_dropout_rate = 0.1;      // POS_DROPOUT only
  int eval_every = 1;                 // epochs between validation evals

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double student_ce = 0.0;
  double teacher_ce = 0.0;
  double distill = 0.0;
  double val_auc_s = 0.0, val_logloss_s = 0.0;
  double val_auc_t = 0.0, val_logloss_t = 0.0;  // NaN without a teacher tower
};

using TrainHistory = std::vector<EpochRecord>;

std::string history_csv(const TrainHistory& history);

struct TrainResult {
  std::unique_ptr<CtrNet> net;
  TrainHistory history;
};

// Joint seeded mini-batch training of the selected kind. Throws on NaN loss
// with a diagnostic naming the step and loss components. Deterministic given
// (datasets, configs, seed).
TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  const FeatureSchema& schema, const TowerConfig& tower,
                  const TrainConfig& config, ModelKind kind);

// Serving rule of the trained model; the example's position field is never
// read for ours / backbone / pal.
double serve(const CtrNet& net, const Example& ex);

struct SweepRow {
  double lambda = 0.0;
  double val_logloss = 0.0;
  double val_auc = 0.0;
  bool ok = false;
  std::string error;
  bool selected = false;
};

struct SweepResult {
  DistillVariant variant = DistillVariant::kLogit;
  std::vector<SweepRow> rows;
  std::optional<double> selected_lambda;  // argmin validation LogLoss
};

inline std::vector<double> default_lambda_grid() {
  return {0.01, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
}

// Trains one model per lambda at a fixed seed; failed cells are recorded and
// the sweep continues.
SweepResult sweep_lambda(const Dataset& train_set, const Dataset& val_set,
                         const FeatureSchema& schema, const TowerConfig& tower,
                         const TrainConfig& base_config,
                         const std::vector<double>& grid,
                         DistillVariant variant);

}  // namespace ctrkd
