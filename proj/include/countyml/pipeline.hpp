#ifndef COUNTYML_PIPELINE_HPP
#define COUNTYML_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "countyml/preprocess.hpp"
#include "countyml/spatial.hpp"
#include "countyml/synth.hpp"
#include "json.hpp"

namespace countyml {

// One resolved configuration drives every subcommand; a run writes the
// resolved form into run-manifest.json so results can be reproduced from the
// manifest alone.
struct RunConfig {
  std::filesystem::path features;
  std::filesystem::path centroids;
  std::filesystem::path schema;  // empty = stock schema
  std::filesystem::path out = "out";
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0 = all hardware threads

  PreprocessConfig preprocess;
  // "train" fits the min-max scaler on the training split only (no leakage);
  // "all" reproduces scaling on the full table before the split.
  std::string scale_fit = "train";

  WeightsScheme weights = WeightsScheme::k_nearest(8);
  double test_fraction = 0.25;
  std::size_t cv_folds = 5;
  nlohmann::json forest_grid;  // defaulted in make_default_config
  nlohmann::json gbm_grid;
  std::size_t top_k = 6;
  std::string explain_rows = "all";  // all | train | test
};

RunConfig make_default_config();
nlohmann::json default_forest_grid();
nlohmann::json default_gbm_grid();

RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config_file(const std::filesystem::path& path);

// Pipeline stages. Each one reads its inputs from disk, writes its outputs
// under config.out, and refreshes run-manifest.json. Running the stages one
// by one produces the same files as one `report` run.
void run_ingest(const RunConfig& config);
void run_preprocess(const RunConfig& config);
void run_hotspots(const RunConfig& config);
void run_train(const RunConfig& config);
void run_explain(const RunConfig& config);
void run_report(const RunConfig& config);

// Writes features.csv, centroids.csv and schema.json under `dir`.
void run_synth(const SynthConfig& synth, const std::filesystem::path& dir);

std::uint64_t fnv1a64_file(const std::filesystem::path& path);

}  // namespace countyml

#endif  // COUNTYML_PIPELINE_HPP
