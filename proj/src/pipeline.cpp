#include "countyml/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <unordered_set>

#include "countyml/error.hpp"
#include "countyml/eval.hpp"
#include "countyml/explain.hpp"
#include "countyml/models.hpp"

namespace countyml {

namespace fs = std::filesystem;

nlohmann::json default_forest_grid() {
  return {{"n_estimators", {200, 500}},
          {"max_features", {"sqrt", "third", "all"}},
          {"min_samples_leaf", {2, 5, 10}}};
}

nlohmann::json default_gbm_grid() {
  return {{"n_estimators", {100, 300}},
          {"learning_rate", {0.05, 0.1}},
          {"max_depth", {2, 3, 4}}};
}

RunConfig make_default_config() {
  RunConfig config;
  config.forest_grid = default_forest_grid();
  config.gbm_grid = default_gbm_grid();
  return config;
}

RunConfig config_from_json(const nlohmann::json& doc) {
  RunConfig config = make_default_config();
  try {
    if (doc.contains("features")) {
      config.features = doc.at("features").get<std::string>();
    }
    if (doc.contains("centroids")) {
      config.centroids = doc.at("centroids").get<std::string>();
    }
    if (doc.contains("schema")) {
      config.schema = doc.at("schema").get<std::string>();
    }
    if (doc.contains("out")) config.out = doc.at("out").get<std::string>();
    config.seed = doc.value("seed", config.seed);
    config.threads = doc.value("threads", config.threads);

    if (doc.contains("preprocess")) {
      const auto& pp = doc.at("preprocess");
      config.preprocess.max_missing_per_county = pp.value(
          "max_missing_per_county", config.preprocess.max_missing_per_county);
      config.preprocess.knn_k = pp.value("knn_k", config.preprocess.knn_k);
      config.preprocess.outlier_iqr_multiplier =
          pp.value("outlier_iqr_multiplier",
                   config.preprocess.outlier_iqr_multiplier);
      config.preprocess.impute_outcome =
          pp.value("impute_outcome", config.preprocess.impute_outcome);
      config.scale_fit = pp.value("scale_fit", config.scale_fit);
      if (pp.contains("scale_targets")) {
        std::set<std::string> targets;
        for (const auto& name : pp.at("scale_targets")) {
          targets.insert(name.get<std::string>());
        }
        config.preprocess.scale_targets = std::move(targets);
      }
    }
    if (config.scale_fit != "train" && config.scale_fit != "all") {
      throw Error(ErrorKind::ConfigError,
                  "scale_fit must be 'train' or 'all'");
    }

    if (doc.contains("weights")) {
      const auto& w = doc.at("weights");
      const auto scheme = w.value("scheme", std::string("k_nearest"));
      if (scheme == "k_nearest") {
        config.weights = WeightsScheme::k_nearest(w.value("k", std::size_t{8}));
      } else if (scheme == "distance_band") {
        if (!w.contains("d_km")) {
          throw Error(ErrorKind::ConfigError,
                      "distance_band weights need d_km");
        }
        config.weights =
            WeightsScheme::distance_band(w.at("d_km").get<double>());
      } else {
        throw Error(ErrorKind::ConfigError,
                    "unknown weights scheme '" + scheme + "'");
      }
    }

    if (doc.contains("split")) {
      config.test_fraction =
          doc.at("split").value("test_fraction", config.test_fraction);
    }
    if (doc.contains("cv")) {
      config.cv_folds = doc.at("cv").value("folds", config.cv_folds);
    }
    if (doc.contains("grids")) {
      const auto& grids = doc.at("grids");
      if (grids.contains("forest")) config.forest_grid = grids.at("forest");
      if (grids.contains("gbm")) config.gbm_grid = grids.at("gbm");
    }
    if (doc.contains("explain")) {
      const auto& ex = doc.at("explain");
      config.explain_rows = ex.value("rows", config.explain_rows);
      config.top_k = ex.value("top_k", config.top_k);
    }
    if (config.explain_rows != "all" && config.explain_rows != "train" &&
        config.explain_rows != "test") {
      throw Error(ErrorKind::ConfigError,
                  "explain.rows must be 'all', 'train' or 'test'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError,
                std::string("malformed config: ") + e.what());
  }
  return config;
}

nlohmann::json config_to_json(const RunConfig& config) {
  nlohmann::json weights;
  if (config.weights.kind == WeightsScheme::Kind::k_nearest) {
    weights = {{"scheme", "k_nearest"}, {"k", config.weights.k}};
  } else {
    weights = {{"scheme", "distance_band"}, {"d_km", config.weights.d_km}};
  }
  nlohmann::json preprocess = {
      {"max_missing_per_county", config.preprocess.max_missing_per_county},
      {"knn_k", config.preprocess.knn_k},
      {"outlier_iqr_multiplier", config.preprocess.outlier_iqr_multiplier},
      {"impute_outcome", config.preprocess.impute_outcome},
      {"scale_fit", config.scale_fit}};
  if (config.preprocess.scale_targets) {
    preprocess["scale_targets"] = *config.preprocess.scale_targets;
  }
  return {{"features", config.features.string()},
          {"centroids", config.centroids.string()},
          {"schema", config.schema.string()},
          {"out", config.out.string()},
          {"seed", config.seed},
          {"threads", config.threads},
          {"preprocess", preprocess},
          {"weights", weights},
          {"split", {{"test_fraction", config.test_fraction}}},
          {"cv", {{"folds", config.cv_folds}}},
          {"grids", {{"forest", config.forest_grid}, {"gbm", config.gbm_grid}}},
          {"explain", {{"rows", config.explain_rows}, {"top_k", config.top_k}}}};
}

RunConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open config " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

std::uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  }
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

namespace {

std::string hex64(std::uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

void write_json_file(const nlohmann::json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw Error(ErrorKind::IoError, "write failed for " + path.string());
  }
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError,
                "cannot open " + path.string() +
                    " (did the previous pipeline stage run?)");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return doc;
}

void write_manifest(const RunConfig& config, const std::string& command) {
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& path : {config.features, config.centroids, config.schema}) {
    if (!path.empty() && fs::exists(path)) {
      inputs[path.string()] = "fnv1a64:" + hex64(fnv1a64_file(path));
    }
  }
  const auto now = std::chrono::system_clock::now();
  const auto time = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&time));
  const nlohmann::json manifest = {{"command", command},
                                   {"config", config_to_json(config)},
                                   {"seed", config.seed},
                                   {"inputs", inputs},
                                   {"created", stamp}};
  write_json_file(manifest, config.out / "run-manifest.json");
}

std::vector<VariableSpec> resolve_schema(const RunConfig& config) {
  if (config.schema.empty()) return default_schema();
  return load_schema(config.schema);
}

Dataset load_stage_dataset(const fs::path& dir) {
  const auto schema = load_schema(dir / "schema.json");
  return load_dataset(dir / "features.csv", dir / "centroids.csv", schema);
}

void save_stage_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  save_dataset(dataset, dir / "features.csv", dir / "centroids.csv");
  save_schema(dataset.specs(), dir / "schema.json");
}

struct SplitFile {
  std::vector<std::string> train_fips;
  std::vector<std::string> test_fips;
};

SplitFile read_split(const fs::path& out) {
  const auto doc = read_json_file(out / "split.json");
  SplitFile split;
  split.train_fips = doc.at("train_fips").get<std::vector<std::string>>();
  split.test_fips = doc.at("test_fips").get<std::vector<std::string>>();
  return split;
}

// Record indices (in record order) whose fips belongs to the given set.
std::vector<std::size_t> rows_for_fips(
    const Dataset& dataset, const std::vector<std::string>& fips_list) {
  std::unordered_set<std::string> wanted(fips_list.begin(), fips_list.end());
  std::vector<std::size_t> rows;
  rows.reserve(fips_list.size());
  for (std::size_t i = 0; i < dataset.n_records(); ++i) {
    if (wanted.count(dataset.records()[i].fips)) rows.push_back(i);
  }
  if (rows.size() != fips_list.size()) {
    throw Error(ErrorKind::UnjoinedCounty,
                "split.json names counties absent from the preprocessed data");
  }
  return rows;
}

Model load_model(const fs::path& path) {
  return model_from_json(read_json_file(path));
}

}  // namespace

void run_synth(const SynthConfig& synth, const fs::path& dir) {
  const Dataset dataset = make_synthetic_dataset(synth);
  fs::create_directories(dir);
  save_dataset(dataset, dir / "features.csv", dir / "centroids.csv");
  save_schema(dataset.specs(), dir / "schema.json");
}

void run_ingest(const RunConfig& config) {
  const Dataset dataset =
      load_dataset(config.features, config.centroids, resolve_schema(config));
  fs::create_directories(config.out);
  save_stage_dataset(dataset, config.out / "dataset");

  nlohmann::json summary = nlohmann::json::object();
  for (const auto& spec : dataset.specs()) {
    const VariableSummary s = summarize(dataset, spec.name);
    nlohmann::json entry = {{"n_nonmissing", s.n_nonmissing}};
    if (s.mean) entry["mean"] = *s.mean;
    if (s.sd) entry["sd"] = *s.sd;
    if (s.min) entry["min"] = *s.min;
    if (s.max) entry["max"] = *s.max;
    summary[spec.name] = std::move(entry);
  }
  write_json_file({{"n_records", dataset.n_records()},
                   {"variables", summary}},
                  config.out / "summary.json");
  write_manifest(config, "ingest");
}

void run_preprocess(const RunConfig& config) {
  const Dataset raw = load_stage_dataset(config.out / "dataset");

  PreprocessReport report;
  Dataset dataset = drop_sparse_counties(raw, config.preprocess, &report);
  dataset = knn_impute(dataset, config.preprocess, &report, config.threads);
  dataset = handle_outliers(dataset, config.preprocess, &report);

  const std::vector<std::size_t> modeling_rows =
      dataset.rows_with_observed_outcome();
  if (modeling_rows.size() < 2) {
    throw Error(ErrorKind::EmptyDataset,
                "fewer than 2 counties have an observed outcome");
  }
  const SplitIndices split =
      split_indices(modeling_rows.size(), config.test_fraction, config.seed);

  std::vector<std::size_t> train_rows;
  std::vector<std::string> train_fips;
  for (const std::size_t i : split.train) {
    train_rows.push_back(modeling_rows[i]);
    train_fips.push_back(dataset.records()[modeling_rows[i]].fips);
  }
  std::vector<std::string> test_fips;
  for (const std::size_t i : split.test) {
    test_fips.push_back(dataset.records()[modeling_rows[i]].fips);
  }

  std::vector<std::size_t> fit_rows;
  if (config.scale_fit == "train") {
    fit_rows = train_rows;
  } else {
    fit_rows.resize(dataset.n_records());
    for (std::size_t i = 0; i < fit_rows.size(); ++i) fit_rows[i] = i;
  }
  report.scaling = fit_scaler(dataset, fit_rows, config.preprocess);
  dataset = apply_scaler(dataset, report.scaling);

  save_stage_dataset(dataset, config.out / "preprocessed");
  write_json_file(report.to_json(), config.out / "preprocess-report.json");
  write_json_file({{"seed", config.seed},
                   {"test_fraction", config.test_fraction},
                   {"train_fips", train_fips},
                   {"test_fips", test_fips}},
                  config.out / "split.json");
  write_manifest(config, "preprocess");
}

void run_hotspots(const RunConfig& config) {
  const Dataset dataset = load_stage_dataset(config.out / "preprocessed");
  const auto rows = dataset.rows_with_observed_outcome();
  if (rows.size() < 2) {
    throw Error(ErrorKind::EmptyDataset,
                "fewer than 2 counties have an observed outcome");
  }
  std::vector<CountyRecord> selected;
  selected.reserve(rows.size());
  for (const std::size_t i : rows) selected.push_back(dataset.records()[i]);
  const Dataset observed = dataset.with_records(std::move(selected));

  std::vector<double> values;
  values.reserve(observed.n_records());
  const std::size_t outcome = observed.outcome_index();
  for (const auto& record : observed.records()) {
    values.push_back(*record.values[outcome]);
  }

  const SpatialWeights weights = build_weights(observed, config.weights);
  const HotspotResult result =
      classify_hotspots(gi_star(values, weights, config.threads));
  export_hotspots_geojson(result, observed, values,
                          config.out / "hotspots.geojson");
  export_hotspots_csv(result, observed, values, config.out / "hotspots.csv");
  write_manifest(config, "hotspots");
}

void run_train(const RunConfig& config) {
  const Dataset dataset = load_stage_dataset(config.out / "preprocessed");
  const SplitFile split = read_split(config.out);
  const DesignMatrix train =
      build_design_matrix(dataset, rows_for_fips(dataset, split.train_fips));
  const DesignMatrix test =
      build_design_matrix(dataset, rows_for_fips(dataset, split.test_fips));

  const std::vector<LearnerSpec> specs = {
      {LearnerId::forest, config.forest_grid},
      {LearnerId::gbm, config.gbm_grid},
      {LearnerId::linear, nlohmann::json::object()},
  };
  const auto evaluations = evaluate_models(train, test, specs, config.cv_folds,
                                           config.seed, config.threads);

  write_comparison_csv(evaluations, config.out / "metrics.csv");
  fs::create_directories(config.out / "models");
  for (const auto& eval : evaluations) {
    const std::string id = to_string(eval.id);
    write_json_file(model_to_json(eval.model),
                    config.out / "models" / (id + ".json"));
    write_json_file(eval.search.to_json(),
                    config.out / ("cv_" + id + ".json"));
  }
  write_manifest(config, "train");
}

void run_explain(const RunConfig& config) {
  const Dataset dataset = load_stage_dataset(config.out / "preprocessed");
  const SplitFile split = read_split(config.out);

  std::vector<std::string> fips_list;
  if (config.explain_rows == "train") {
    fips_list = split.train_fips;
  } else if (config.explain_rows == "test") {
    fips_list = split.test_fips;
  } else {
    fips_list = split.train_fips;
    fips_list.insert(fips_list.end(), split.test_fips.begin(),
                     split.test_fips.end());
  }
  const DesignMatrix matrix =
      build_design_matrix(dataset, rows_for_fips(dataset, fips_list));

  std::map<std::string, FeatureRanking> rankings;
  for (const char* id : {"forest", "gbm", "linear"}) {
    const Model model =
        load_model(config.out / "models" / (std::string(id) + ".json"));
    const auto explanations = explain_rows(model, matrix, config.threads);
    const FeatureRanking ranking =
        mean_abs_shap(explanations, matrix.feature_names);
    write_ranking_csv(ranking,
                      config.out / ("ranking_" + std::string(id) + ".csv"));
    rankings.emplace(id, ranking);
    if (std::string(id) == "forest") {
      export_summary_plot_data(explanations, matrix.row_fips,
                               matrix.feature_names, config.top_k,
                               config.out / "shap_summary.csv");
    }
  }
  write_json_file(
      {{"spearman",
        {{"forest_vs_gbm",
          ranking_spearman(rankings.at("forest"), rankings.at("gbm"))},
         {"forest_vs_linear",
          ranking_spearman(rankings.at("forest"), rankings.at("linear"))},
         {"gbm_vs_linear",
          ranking_spearman(rankings.at("gbm"), rankings.at("linear"))}}}},
      config.out / "rank_agreement.json");
  write_manifest(config, "explain");
}

void run_report(const RunConfig& config) {
  run_ingest(config);
  run_preprocess(config);
  run_hotspots(config);
  run_train(config);
  run_explain(config);
  write_manifest(config, "report");
}

}  // namespace countyml
