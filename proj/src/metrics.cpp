#include "ctrkd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "ctrkd/tensor.hpp"

namespace ctrkd {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "auc: size mismatch");
  require(!scores.empty(), "auc: empty input");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tied scores, then Mann-Whitney.
  double pos_rank_sum = 0.0;
  int64_t n_pos = 0, n_neg = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      } else {
        ++n_neg;
      }
    }
    i = j;
  }
  require(n_pos > 0 && n_neg > 0, "AUC undefined: single-class input");
  return (pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double logloss(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "logloss: size mismatch");
  require(!scores.empty(), "logloss: empty input");
  double acc = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], 1e-7, 1.0 - 1e-7);
    acc += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / static_cast<double>(scores.size());
}

std::vector<PositionBucket> empirical_ctr_by_position(const Dataset& data,
                                                      int64_t num_positions) {
  require(!data.empty(), "empirical_ctr_by_position: empty dataset");
  std::vector<PositionBucket> out(static_cast<size_t>(num_positions));
  for (int64_t k = 0; k < num_positions; ++k) out[static_cast<size_t>(k)].position = k;
  for (const Example& ex : data) {
    require(ex.pos >= 0 && ex.pos < num_positions,
            "empirical_ctr_by_position: position out of range");
    auto& b = out[static_cast<size_t>(ex.pos)];
    ++b.impressions;
    b.clicks += ex.click;
  }
  for (auto& b : out)
    if (b.impressions > 0)
      b.ctr = static_cast<double>(b.clicks) / static_cast<double>(b.impressions);
  return out;
}

std::vector<PositionBucket> mean_score_by_position(
    const Dataset& data, const std::vector<double>& scores,
    int64_t num_positions) {
  require(data.size() == scores.size(), "mean_score_by_position: size mismatch");
  std::vector<PositionBucket> out(static_cast<size_t>(num_positions));
  std::vector<double> sums(static_cast<size_t>(num_positions), 0.0);
  for (int64_t k = 0; k < num_positions; ++k) out[static_cast<size_t>(k)].position = k;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    require(ex.pos >= 0 && ex.pos < num_positions,
            "mean_score_by_position: position out of range");
    auto& b = out[static_cast<size_t>(ex.pos)];
    ++b.impressions;
    b.clicks += ex.click;
    sums[static_cast<size_t>(ex.pos)] += scores[i];
  }
  for (size_t k = 0; k < out.size(); ++k)
    if (out[k].impressions > 0) {
      out[k].mean_pctr = sums[k] / static_cast<double>(out[k].impressions);
      out[k].ctr = static_cast<double>(out[k].clicks) /
                   static_cast<double>(out[k].impressions);
    }
  return out;
}

namespace {
std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) r[order[k]] = avg;
    i = j;
  }
  return r;
}
}  // namespace

double spearman_vs_position(const std::vector<PositionBucket>& buckets) {
  std::vector<double> pos, val;
  for (const auto& b : buckets)
    if (b.mean_pctr) {
      pos.push_back(static_cast<double>(b.position));
      val.push_back(*b.mean_pctr);
    }
  require(pos.size() >= 2, "spearman_vs_position: need at least 2 buckets");
  const auto rp = ranks_of(pos);
  const auto rv = ranks_of(val);
  const double n = static_cast<double>(pos.size());
  double mp = 0, mv = 0;
  for (size_t i = 0; i < pos.size(); ++i) {
    mp += rp[i];
    mv += rv[i];
  }
  mp /= n;
  mv /= n;
  double cov = 0, vp = 0, vv = 0;
  for (size_t i = 0; i < pos.size(); ++i) {
    cov += (rp[i] - mp) * (rv[i] - mv);
    vp += (rp[i] - mp) * (rp[i] - mp);
    vv += (rv[i] - mv) * (rv[i] - mv);
  }
  require(vp > 0 && vv > 0, "spearman_vs_position: degenerate ranks");
  return cov / std::sqrt(vp * vv);
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) /
                      static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::vector<AggregateRow> aggregate_reports(
    const std::vector<MetricsReport>& reports) {
  require(!reports.empty(), "aggregate_reports: no reports");
  std::vector<AggregateRow> rows;
  for (const auto& r : reports) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const AggregateRow& a) { return a.name == r.name; });
    if (it == rows.end()) {
      rows.push_back(AggregateRow{.name = r.name});
      it = rows.end() - 1;
    }
    ++it->runs;
  }
  for (auto& row : rows) {
    std::vector<double> aucs, lls, rels;
    for (const auto& r : reports)
      if (r.name == row.name) {
        aucs.push_back(r.auc);
        lls.push_back(r.logloss);
        if (r.relevance_auc) rels.push_back(*r.relevance_auc);
      }
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) /
             static_cast<double>(v.size());
    };
    row.auc_mean = mean(aucs);
    row.auc_std = sample_std(aucs);
    row.logloss_mean = mean(lls);
    row.logloss_std = sample_std(lls);
    if (!rels.empty()) {
      row.rel_auc_mean = mean(rels);
      row.rel_auc_std = sample_std(rels);
    }
  }
  auto best = std::max_element(rows.begin(), rows.end(),
                               [](const AggregateRow& a, const AggregateRow& b) {
                                 return a.auc_mean < b.auc_mean;
                               });
  best->best = true;
  return rows;
}

std::string render_comparison_table(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-14s %-17s %-17s %-17s %5s\n", "Model",
                "AUC", "LogLoss", "RelAUC", "Runs");
  out << buf;
  out << std::string(75, '-') << "\n";
  for (const auto& r : rows) {
    std::string rel = "-";
    if (r.rel_auc_mean) {
      char rb[64];
      std::snprintf(rb, sizeof(rb), "%.4f±%.4f", *r.rel_auc_mean,
                    r.rel_auc_std.value_or(0.0));
      rel = rb;
    }
    std::snprintf(buf, sizeof(buf), "%-14s %.4f±%.4f     %.4f±%.4f     %-17s %5lld%s\n",
                  r.name.c_str(), r.auc_mean, r.auc_std, r.logloss_mean,
                  r.logloss_std, rel.c_str(), static_cast<long long>(r.runs),
                  r.best ? "  *best" : "");
    out << buf;
  }
  return out.str();
}

std::string comparison_table_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << "model,auc_mean,auc_std,logloss_mean,logloss_std,rel_auc_mean,rel_auc_std,runs,best\n";
  char buf[256];
  for (const auto& r : rows) {
    out << r.name << ",";
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,", r.auc_mean,
                  r.auc_std, r.logloss_mean, r.logloss_std);
    out << buf;
    if (r.rel_auc_mean) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,", *r.rel_auc_mean,
                    r.rel_auc_std.value_or(0.0));
      out << buf;
    } else {
      out << ",,";
    }
    out << r.runs << "," << (r.best ? 1 : 0) << "\n";
  }
  return out.str();
}

double relevance_auc(const Dataset& data, const std::vector<double>& scores) {
  require(data.size() == scores.size(), "relevance_auc: size mismatch");
  require(!data.empty(), "relevance_auc: empty dataset");
  std::vector<double> rels;
  rels.reserve(data.size());
  for (const auto& ex : data) {
    require(ex.has_rel, "relevance_auc: example without true relevance");
    rels.push_back(ex.rel);
  }
  std::vector<double> sorted = rels;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  std::vector<int> labels(data.size());
  for (size_t i = 0; i < data.size(); ++i) labels[i] = rels[i] > median ? 1 : 0;
  return auc(scores, labels);
}

}  // namespace ctrkd
