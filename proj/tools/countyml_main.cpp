#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "countyml/error.hpp"
#include "countyml/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string features;
  std::string centroids;
  std::string schema;
  std::string out;
  std::int64_t seed = -1;
  int threads = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--features", flags.features, "features CSV path");
  cmd->add_option("--centroids", flags.centroids, "centroids CSV path");
  cmd->add_option("--schema", flags.schema,
                  "schema JSON path (omit for the built-in county schema)");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--threads", flags.threads,
                  "worker thread cap, 0 = all cores (never changes results)");
}

// Config file first, CLI flags on top.
countyml::RunConfig resolve_config(const CommonFlags& flags) {
  countyml::RunConfig config = flags.config_path.empty()
                                   ? countyml::make_default_config()
                                   : countyml::load_config_file(flags.config_path);
  if (!flags.features.empty()) config.features = flags.features;
  if (!flags.centroids.empty()) config.centroids = flags.centroids;
  if (!flags.schema.empty()) config.schema = flags.schema;
  if (!flags.out.empty()) config.out = flags.out;
  if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.threads >= 0) config.threads = static_cast<unsigned>(flags.threads);
  return config;
}

void require_inputs(const countyml::RunConfig& config) {
  if (config.features.empty() || config.centroids.empty()) {
    throw countyml::Error(countyml::ErrorKind::ConfigError,
                          "both --features and --centroids are required");
  }
  for (const auto& path : {config.features, config.centroids}) {
    if (!std::filesystem::exists(path)) {
      throw countyml::Error(countyml::ErrorKind::IoError,
                            "input file not found: " + path.string());
    }
  }
  if (!config.schema.empty() && !std::filesystem::exists(config.schema)) {
    throw countyml::Error(countyml::ErrorKind::IoError,
                          "schema file not found: " + config.schema.string());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "County-level mortality analytics: spatial hotspots, ensemble "
      "regression and SHAP attributions"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic county benchmark dataset");
  countyml::SynthConfig synth_config;
  std::string synth_out = "synth-data";
  synth->add_option("--out", synth_out, "directory for the generated files");
  synth->add_option("--n", synth_config.n, "number of counties");
  synth->add_option("--seed", synth_config.seed, "generator seed");
  synth->add_option("--noise-sd", synth_config.noise_sd,
                    "outcome noise standard deviation");
  synth->add_option("--predictor-missing-rate",
                    synth_config.predictor_missing_rate,
                    "per-cell missing probability for predictors");
  synth->add_option("--outcome-missing-rate",
                    synth_config.outcome_missing_rate,
                    "missing probability for the outcome");
  synth->add_option("--sparse-counties", synth_config.sparse_counties,
                    "rows given more than five missing values");

  auto* ingest = app.add_subcommand("ingest", "load, validate and summarize");
  auto* preprocess = app.add_subcommand(
      "preprocess", "drop sparse counties, impute, winsorize, rescale");
  auto* hotspots =
      app.add_subcommand("hotspots", "Getis-Ord Gi* hotspot detection");
  auto* train = app.add_subcommand(
      "train", "cross-validated grid search and test-set comparison");
  auto* explain = app.add_subcommand("explain", "SHAP attributions and rankings");
  auto* report =
      app.add_subcommand("report", "run the whole pipeline end to end");
  for (auto* cmd : {ingest, preprocess, hotspots, train, explain, report}) {
    add_common_flags(cmd, flags);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      countyml::run_synth(synth_config, synth_out);
      std::cout << "wrote synthetic dataset to " << synth_out << "\n";
      return 0;
    }
    const countyml::RunConfig config = resolve_config(flags);
    if (ingest->parsed()) {
      require_inputs(config);
      countyml::run_ingest(config);
    } else if (preprocess->parsed()) {
      countyml::run_preprocess(config);
    } else if (hotspots->parsed()) {
      countyml::run_hotspots(config);
    } else if (train->parsed()) {
      countyml::run_train(config);
    } else if (explain->parsed()) {
      countyml::run_explain(config);
    } else if (report->parsed()) {
      require_inputs(config);
      countyml::run_report(config);
    }
    std::cout << "outputs written to " << config.out.string() << "\n";
    return 0;
  } catch (const countyml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return countyml::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
