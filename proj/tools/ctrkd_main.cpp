#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctrkd/config.hpp"
#include "ctrkd/datagen.hpp"
#include "ctrkd/distill.hpp"
#include "ctrkd/metrics.hpp"
#include "ctrkd/model.hpp"
#include "ctrkd/params.hpp"

namespace fs = std::filesystem;
using namespace ctrkd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitArtifact = 4;

std::string resolve_out(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const char* root = std::getenv("CTRKD_OUT_ROOT");
  if (!root || !*root) return path;
  return (fs::path(root) / path).string();
}

void echo_hash(const RunConfig& cfg) {
  std::printf("config-hash: %016llx\n",
              static_cast<unsigned long long>(config_hash(cfg)));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << text;
  require(out.good(), "write failed: " + path);
}

std::string position_csv(const std::vector<PositionBucket>& buckets,
                         bool with_pctr) {
  std::string out = with_pctr ? "position,mean_pctr\n"
                              : "position,impressions,ctr\n";
  char buf[128];
  for (const auto& b : buckets) {
    if (with_pctr) {
      if (b.mean_pctr)
        std::snprintf(buf, sizeof(buf), "%lld,%.6f\n",
                      static_cast<long long>(b.position), *b.mean_pctr);
      else
        std::snprintf(buf, sizeof(buf), "%lld,\n",
                      static_cast<long long>(b.position));
    } else {
      if (b.ctr)
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%.6f\n",
                      static_cast<long long>(b.position),
                      static_cast<long long>(b.impressions), *b.ctr);
      else
        std::snprintf(buf, sizeof(buf), "%lld,%lld,\n",
                      static_cast<long long>(b.position),
                      static_cast<long long>(b.impressions));
    }
    out += buf;
  }
  return out;
}

void print_ctr_table(const std::vector<PositionBucket>& buckets) {
  std::printf("%-9s %-12s %-8s %s\n", "position", "impressions", "clicks",
              "ctr");
  for (const auto& b : buckets) {
    if (b.ctr)
      std::printf("%-9lld %-12lld %-8lld %.4f\n",
                  static_cast<long long>(b.position),
                  static_cast<long long>(b.impressions),
                  static_cast<long long>(b.clicks), *b.ctr);
    else
      std::printf("%-9lld %-12lld %-8lld null\n",
                  static_cast<long long>(b.position),
                  static_cast<long long>(b.impressions),
                  static_cast<long long>(b.clicks));
  }
}

int cmd_generate(const RunConfig& cfg, const std::string& out_override) {
  const std::string out_dir =
      resolve_out(out_override.empty() ? cfg.data_dir : out_override);
  fs::create_directories(out_dir);
  echo_hash(cfg);
  DatasetSplit split = generate(cfg.gen, cfg.train.seed);
  write_jsonl(split.train, (fs::path(out_dir) / "train.jsonl").string());
  write_jsonl(split.val, (fs::path(out_dir) / "val.jsonl").string());
  write_jsonl(split.test, (fs::path(out_dir) / "test.jsonl").string());
  write_text((fs::path(out_dir) / "manifest.json").string(),
             manifest_json(split.manifest, cfg) + "\n");
  auto buckets = empirical_ctr_by_position(split.train, cfg.gen.num_positions);
  std::printf("wrote %lld train / %lld val / %lld test examples to %s\n",
              static_cast<long long>(split.manifest.n_train),
              static_cast<long long>(split.manifest.n_val),
              static_cast<long long>(split.manifest.n_test), out_dir.c_str());
  print_ctr_table(buckets);
  return kExitOk;
}

struct LoadedData {
  LoadedManifest manifest;
  Dataset train, val, test;
};

LoadedData load_data(const std::string& data_dir, bool need_test) {
  LoadedData d;
  d.manifest = load_manifest((fs::path(data_dir) / "manifest.json").string());
  d.train = load_jsonl((fs::path(data_dir) / "train.jsonl").string(),
                       d.manifest.schema);
  d.val = load_jsonl((fs::path(data_dir) / "val.jsonl").string(),
                     d.manifest.schema);
  if (need_test)
    d.test = load_jsonl((fs::path(data_dir) / "test.jsonl").string(),
                        d.manifest.schema);
  return d;
}

int cmd_train(const RunConfig& cfg, const std::string& out_override) {
  echo_hash(cfg);
  const std::string out_dir =
      resolve_out(out_override.empty() ? cfg.out_dir : out_override);
  fs::create_directories(out_dir);
  LoadedData data = load_data(resolve_out(cfg.data_dir), false);
  const ModelKind kind = model_kind_from_name(cfg.model);
  TrainResult result = train(data.train, data.val, data.manifest.schema,
                             cfg.tower, cfg.train, kind);
  const std::string stem =
      cfg.model + "_seed" + std::to_string(cfg.train.seed);
  save_checkpoint(result.net->params(),
                  (fs::path(out_dir) / (stem + ".ckpt")).string(),
                  checkpoint_metadata(*result.net, cfg.train, cfg.train.seed));
  write_text((fs::path(out_dir) / (stem + "_history.csv")).string(),
             history_csv(result.history));
  const EpochRecord& last = result.history.back();
  std::printf("model=%s seed=%llu final val AUC=%.4f LogLoss=%.4f\n",
              cfg.model.c_str(),
              static_cast<unsigned long long>(cfg.train.seed), last.val_auc_s,
              last.val_logloss_s);
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const std::string& out_override) {
  echo_hash(cfg);
  const std::string out_dir =
      resolve_out(out_override.empty() ? cfg.out_dir : out_override);
  fs::create_directories(out_dir);
  LoadedData data = load_data(resolve_out(cfg.data_dir), false);
  std::string csv = "mode,lambda,val_logloss,val_auc,selected,error\n";
  char buf[256];
  for (DistillVariant variant :
       {DistillVariant::kLogit, DistillVariant::kFeature}) {
    SweepResult res =
        sweep_lambda(data.train, data.val, data.manifest.schema, cfg.tower,
                     cfg.train, default_lambda_grid(), variant);
    for (const auto& row : res.rows) {
      if (row.ok)
        std::snprintf(buf, sizeof(buf), "%s,%g,%.6f,%.6f,%d,\n",
                      distill_variant_name(variant).c_str(), row.lambda,
                      row.val_logloss, row.val_auc, row.selected ? 1 : 0);
      else
        std::snprintf(buf, sizeof(buf), "%s,%g,,,0,%s\n",
                      distill_variant_name(variant).c_str(), row.lambda,
                      row.error.c_str());
      csv += buf;
      if (!row.ok)
        std::fprintf(stderr, "sweep cell failed (mode=%s lambda=%g): %s\n",
                     distill_variant_name(variant).c_str(), row.lambda,
                     row.error.c_str());
    }
    if (res.selected_lambda)
      std::printf("%s-based winner: lambda=%g\n",
                  distill_variant_name(variant).c_str(), *res.selected_lambda);
    else
      std::printf("%s-based: all cells failed\n",
                  distill_variant_name(variant).c_str());
  }
  write_text((fs::path(out_dir) / "sweep.csv").string(), csv);
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& ckpts,
                 const std::string& out_override, bool teacher_mode) {
  echo_hash(cfg);
  const std::string out_dir =
      resolve_out(out_override.empty() ? cfg.out_dir : out_override);
  fs::create_directories(out_dir);
  LoadedData data = load_data(resolve_out(cfg.data_dir), true);
  require(!data.test.empty(), "evaluate: empty test set");
  const bool have_rel =
      std::all_of(data.test.begin(), data.test.end(),
                  [](const Example& e) { return e.has_rel; });
  std::vector<int> labels;
  for (const auto& ex : data.test) labels.push_back(ex.click);

  std::vector<MetricsReport> reports;
  for (const auto& path : ckpts) {
    ParamStore store;
    std::string meta = load_checkpoint(store, path);
    auto net = net_from_metadata(meta);
    // Rebuild the net's own store from the file.
    for (const auto& [name, e] : store) {
      Tensor& dst = net->params().create(name, e.value.shape);
      dst.values = e.value.values;
    }
    if (teacher_mode)
      require(net->has_teacher_tower(),
              "evaluate: --teacher needs a position-aware tower in " + path);

    std::vector<double> scores;
    scores.reserve(data.test.size());
    const int bs = cfg.train.batch_size;
    for (size_t start = 0; start < data.test.size();
         start += static_cast<size_t>(bs)) {
      const size_t end =
          std::min(data.test.size(), start + static_cast<size_t>(bs));
      std::vector<const Example*> batch;
      std::vector<int64_t> pos;
      for (size_t i = start; i < end; ++i) {
        batch.push_back(&data.test[i]);
        pos.push_back(data.test[i].pos);
      }
      std::vector<double> part =
          teacher_mode ? net->score_with_positions(batch, pos)
                       : net->serve(batch);
      scores.insert(scores.end(), part.begin(), part.end());
    }

    MetricsReport rep;
    rep.name = model_name_from_metadata(meta) +
               (teacher_mode ? std::string("(teacher)") : std::string());
    rep.auc = auc(scores, labels);
    rep.logloss = logloss(scores, labels);
    rep.n = static_cast<int64_t>(scores.size());
    rep.by_position = mean_score_by_position(
        data.test, scores, data.manifest.schema.num_positions);
    if (have_rel) rep.relevance_auc = relevance_auc(data.test, scores);
    reports.push_back(rep);

    const std::string stem = fs::path(path).stem().string();
    write_text((fs::path(out_dir) / (stem + "_pctr_by_pos.csv")).string(),
               position_csv(rep.by_position, true));
  }

  auto rows = aggregate_reports(reports);
  const std::string table = render_comparison_table(rows);
  std::printf("%s", table.c_str());
  write_text((fs::path(out_dir) / "comparison.txt").string(), table);
  write_text((fs::path(out_dir) / "comparison.csv").string(),
             comparison_table_csv(rows));
  write_text((fs::path(out_dir) / "ctr_by_pos.csv").string(),
             position_csv(empirical_ctr_by_position(
                              data.test, data.manifest.schema.num_positions),
                          false));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CTR training with teacher-student position-bias distillation"};
  app.require_subcommand(1);

  std::string config_path, out_override, data_override, model_override,
      mode_override;
  std::optional<uint64_t> seed_override;
  std::optional<double> lambda_override;
  std::optional<int> epochs_override;
  std::vector<std::string> checkpoints;
  bool teacher_mode = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config JSON");
    sub->add_option("--out", out_override, "output directory");
    sub->add_option("--data-dir", data_override, "dataset directory");
    sub->add_option("--seed", seed_override, "seed override");
  };

  CLI::App* gen = app.add_subcommand("generate", "generate a synthetic click log");
  add_common(gen);
  CLI::App* tr = app.add_subcommand("train", "train one model");
  add_common(tr);
  tr->add_option("--model", model_override,
                 "ours|backbone|fixed_pos|pos_dropout|pal");
  tr->add_option("--lambda", lambda_override, "distillation weight");
  tr->add_option("--mode", mode_override, "logit|feature|none");
  tr->add_option("--epochs", epochs_override, "epoch override");
  CLI::App* sw = app.add_subcommand("sweep", "sweep lambda for both distill modes");
  add_common(sw);
  CLI::App* ev = app.add_subcommand("evaluate", "score checkpoints on the test split");
  add_common(ev);
  ev->add_option("checkpoints", checkpoints, "checkpoint files")->required();
  ev->add_flag("--teacher", teacher_mode,
               "diagnostic: score the position-aware tower with true positions");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (!data_override.empty()) cfg.data_dir = data_override;
    if (!model_override.empty()) cfg.model = model_override;
    if (seed_override) cfg.train.seed = *seed_override;
    if (lambda_override) cfg.train.mode.lambda = *lambda_override;
    if (!mode_override.empty())
      cfg.train.mode.variant = distill_variant_from_name(mode_override);
    if (epochs_override) cfg.train.epochs = *epochs_override;
    model_kind_from_name(cfg.model);

    if (gen->parsed()) return cmd_generate(cfg, out_override);
    if (tr->parsed()) return cmd_train(cfg, out_override);
    if (sw->parsed()) return cmd_sweep(cfg, out_override);
    if (ev->parsed())
      return cmd_evaluate(cfg, checkpoints, out_override, teacher_mode);
  } catch (const ContractViolation& e) {
    const std::string what = e.what();
    std::fprintf(stderr, "error: %s\n", what.c_str());
    if (what.find("non-finite loss") != std::string::npos) return kExitNumeric;
    if (what.find("checkpoint") != std::string::npos ||
        what.find("Example:") != std::string::npos ||
        what.find("manifest") != std::string::npos)
      return kExitArtifact;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
