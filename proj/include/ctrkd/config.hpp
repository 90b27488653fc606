#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ctrkd/datagen.hpp"
#include "ctrkd/distill.hpp"
#include "ctrkd/model.hpp"

namespace ctrkd {

// Resolved configuration of one run. JSON on disk (// comments allowed);
// CLI flags override file values which override defaults.
struct RunConfig {
  GenConfig gen;
  TowerConfig tower;
  TrainConfig train;
  std::string model = "ours";
  std::string data_dir = "data";
  std::string out_dir = "runs";
  std::vector<uint64_t> seeds{0, 1, 2, 3, 4};
  int64_t embed_dim = 8;
  int64_t pos_embed_dim = 4;

  FeatureSchema schema() const;
};

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& origin);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);  // canonical JSON
uint64_t config_hash(const RunConfig& cfg);              // FNV-1a of canonical form

// Checkpoint metadata <-> model reconstruction.
std::string checkpoint_metadata(const CtrNet& net, const TrainConfig& train,
                                uint64_t seed);
// Builds an empty net matching the metadata; load_checkpoint fills it.
std::unique_ptr<CtrNet> net_from_metadata(const std::string& metadata_json);
std::string model_name_from_metadata(const std::string& metadata_json);

std::string manifest_json(const SplitManifest& m, const RunConfig& cfg);

// Reads <data_dir>/manifest.json back into the generator config and the
// feature schema it implies.
struct LoadedManifest {
  SplitManifest split;
  GenConfig gen;
  FeatureSchema schema;
};
LoadedManifest load_manifest(const std::string& path);

}  // namespace ctrkd
