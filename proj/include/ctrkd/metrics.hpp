#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctrkd/data.hpp"

namespace ctrkd {

// Probability that a random positive outranks a random negative, ties 0.5.
// Sort-and-rank, O(n log n). Throws on single-class input.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean binary cross entropy with scores clamped to [1e-7, 1-1e-7].
double logloss(const std::vector<double>& scores,
               const std::vector<int>& labels);

struct PositionBucket {
  int64_t position = 0;
  int64_t impressions = 0;
  int64_t clicks = 0;
  std::optional<double> ctr;        // empty bucket -> null, never 0
  std::optional<double> mean_pctr;  // filled by pctr_by_position
};

std::vector<PositionBucket> empirical_ctr_by_position(const Dataset& data,
                                                      int64_t num_positions);

// Groups by logged position and averages the given scores (one per example).
std::vector<PositionBucket> mean_score_by_position(
    const Dataset& data, const std::vector<double>& scores,
    int64_t num_positions);

// Spearman rank correlation of (position, value) over buckets with a value.
double spearman_vs_position(const std::vector<PositionBucket>& buckets);

struct MetricsReport {
  std::string name;
  double auc = 0.0;
  double logloss = 0.0;
  int64_t n = 0;
  std::vector<PositionBucket> by_position;
  std::optional<double> relevance_auc;  // synthetic data only
};

struct AggregateRow {
  std::string name;
  double auc_mean = 0.0, auc_std = 0.0;
  double logloss_mean = 0.0, logloss_std = 0.0;
  std::optional<double> rel_auc_mean, rel_auc_std;
  int64_t runs = 0;
  bool best = false;
};

// Sample standard deviation (n-1 denominator; 0 for a single value).
double sample_std(const std::vector<double>& v);

// Mean +- std per model name; the best-mean-AUC row is flagged.
std::vector<AggregateRow> aggregate_reports(
    const std::vector<MetricsReport>& reports);

std::string render_comparison_table(const std::vector<AggregateRow>& rows);
std::string comparison_table_csv(const std::vector<AggregateRow>& rows);

// AUC of scores against true relevance thresholded at its median.
// Requires every example to carry rel.
double relevance_auc(const Dataset& data, const std::vector<double>& scores);

}  // namespace ctrkd
