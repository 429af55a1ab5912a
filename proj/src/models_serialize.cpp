#include "countyml/error.hpp"
#include "countyml/models.hpp"

namespace countyml {

namespace {

constexpr const char* kFormat = "countyml-model";
constexpr int kVersion = 1;

nlohmann::json max_features_to_json(const MaxFeatures& mf) {
  switch (mf.kind) {
    case MaxFeatures::Kind::all: return "all";
    case MaxFeatures::Kind::sqrt: return "sqrt";
    case MaxFeatures::Kind::third: return "third";
    case MaxFeatures::Kind::fraction: return mf.fraction;
  }
  return "all";
}

MaxFeatures max_features_from_json(const nlohmann::json& value) {
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "all") return MaxFeatures::all();
    if (s == "sqrt") return MaxFeatures::sqrt();
    if (s == "third") return MaxFeatures::third();
    throw Error(ErrorKind::ConfigError, "unknown max_features '" + s + "'");
  }
  if (value.is_number()) {
    return MaxFeatures::of_fraction(value.get<double>());
  }
  throw Error(ErrorKind::ConfigError,
              "max_features must be a name or a fraction");
}

nlohmann::json tree_node_to_json(const Tree& tree, std::size_t index) {
  const TreeNode& node = tree.nodes[index];
  if (node.is_leaf()) {
    return {{"value", node.node_mean}, {"coverage", node.coverage}};
  }
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"coverage", node.coverage},
          {"mean", node.node_mean},
          {"left", tree_node_to_json(tree, static_cast<std::size_t>(node.left))},
          {"right",
           tree_node_to_json(tree, static_cast<std::size_t>(node.right))}};
}

nlohmann::json tree_to_json(const Tree& tree) {
  return tree_node_to_json(tree, 0);
}

std::size_t tree_node_from_json(const nlohmann::json& doc, Tree& tree) {
  const std::size_t index = tree.nodes.size();
  tree.nodes.emplace_back();
  TreeNode node;
  node.coverage = doc.value("coverage", 0u);
  if (doc.contains("feature")) {
    node.feature = doc.at("feature").get<std::int32_t>();
    node.threshold = doc.at("threshold").get<double>();
    node.node_mean = doc.at("mean").get<double>();
    node.left = static_cast<std::int32_t>(
        tree_node_from_json(doc.at("left"), tree));
    node.right = static_cast<std::int32_t>(
        tree_node_from_json(doc.at("right"), tree));
  } else {
    node.node_mean = doc.at("value").get<double>();
  }
  tree.nodes[index] = node;
  return index;
}

Tree tree_from_json(const nlohmann::json& doc) {
  Tree tree;
  tree_node_from_json(doc, tree);
  return tree;
}

nlohmann::json trees_to_json(const std::vector<Tree>& trees) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& tree : trees) out.push_back(tree_to_json(tree));
  return out;
}

std::vector<Tree> trees_from_json(const nlohmann::json& doc) {
  std::vector<Tree> trees;
  for (const auto& item : doc) trees.push_back(tree_from_json(item));
  return trees;
}

}  // namespace

nlohmann::json forest_params_to_json(const ForestParams& params) {
  return {{"n_estimators", params.n_estimators},
          {"max_depth", params.tree.max_depth},
          {"min_samples_leaf", params.tree.min_samples_leaf},
          {"max_features", max_features_to_json(params.tree.max_features)},
          {"bootstrap", params.bootstrap}};
}

ForestParams forest_params_from_json(const nlohmann::json& doc) {
  ForestParams params;
  params.n_estimators = doc.value("n_estimators", params.n_estimators);
  params.tree.max_depth = doc.value("max_depth", params.tree.max_depth);
  params.tree.min_samples_leaf =
      doc.value("min_samples_leaf", params.tree.min_samples_leaf);
  if (doc.contains("max_features")) {
    params.tree.max_features = max_features_from_json(doc.at("max_features"));
  }
  params.bootstrap = doc.value("bootstrap", params.bootstrap);
  return params;
}

nlohmann::json gbm_params_to_json(const GbmParams& params) {
  return {{"n_estimators", params.n_estimators},
          {"learning_rate", params.learning_rate},
          {"max_depth", params.tree.max_depth},
          {"min_samples_leaf", params.tree.min_samples_leaf},
          {"max_features", max_features_to_json(params.tree.max_features)}};
}

GbmParams gbm_params_from_json(const nlohmann::json& doc) {
  GbmParams params;
  params.n_estimators = doc.value("n_estimators", params.n_estimators);
  params.learning_rate = doc.value("learning_rate", params.learning_rate);
  params.tree.max_depth = doc.value("max_depth", params.tree.max_depth);
  params.tree.min_samples_leaf =
      doc.value("min_samples_leaf", params.tree.min_samples_leaf);
  if (doc.contains("max_features")) {
    params.tree.max_features = max_features_from_json(doc.at("max_features"));
  }
  return params;
}

nlohmann::json model_to_json(const Model& model) {
  nlohmann::json doc = {{"format", kFormat},
                        {"version", kVersion},
                        {"type", model_type_name(model)},
                        {"feature_names", model_feature_names(model)}};
  if (const auto* linear = std::get_if<LinearModel>(&model)) {
    doc["coefficients"] = linear->coefficients;
    doc["intercept"] = linear->intercept;
    doc["training_feature_means"] = linear->training_feature_means;
  } else if (const auto* forest = std::get_if<ForestModel>(&model)) {
    doc["params"] = forest_params_to_json(forest->params);
    doc["seed"] = forest->seed;
    doc["trees"] = trees_to_json(forest->trees);
  } else if (const auto* gbm = std::get_if<GbmModel>(&model)) {
    doc["params"] = gbm_params_to_json(gbm->params);
    doc["seed"] = gbm->seed;
    doc["init"] = gbm->init;
    doc["learning_rate"] = gbm->learning_rate;
    doc["trees"] = trees_to_json(gbm->trees);
  }
  return doc;
}

Model model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", "") != kFormat) {
      throw Error(ErrorKind::ParseError, "not a model document");
    }
    if (doc.value("version", 0) != kVersion) {
      throw Error(ErrorKind::ParseError,
                  "unsupported model version " +
                      std::to_string(doc.value("version", 0)));
    }
    const auto type = doc.at("type").get<std::string>();
    const auto feature_names =
        doc.at("feature_names").get<std::vector<std::string>>();
    if (type == "linear") {
      LinearModel model;
      model.feature_names = feature_names;
      model.coefficients = doc.at("coefficients").get<std::vector<double>>();
      model.intercept = doc.at("intercept").get<double>();
      model.training_feature_means =
          doc.at("training_feature_means").get<std::vector<double>>();
      if (model.coefficients.size() != feature_names.size() ||
          model.training_feature_means.size() != feature_names.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "linear model arrays disagree with feature_names");
      }
      return model;
    }
    if (type == "forest") {
      ForestModel model;
      model.feature_names = feature_names;
      model.params = forest_params_from_json(doc.at("params"));
      model.seed = doc.value("seed", 0ull);
      model.trees = trees_from_json(doc.at("trees"));
      if (model.trees.empty()) {
        throw Error(ErrorKind::ParseError, "forest model with no trees");
      }
      return model;
    }
    if (type == "gbm") {
      GbmModel model;
      model.feature_names = feature_names;
      model.params = gbm_params_from_json(doc.at("params"));
      model.seed = doc.value("seed", 0ull);
      model.init = doc.at("init").get<double>();
      model.learning_rate = doc.at("learning_rate").get<double>();
      model.trees = trees_from_json(doc.at("trees"));
      return model;
    }
    throw Error(ErrorKind::ParseError, "unknown model type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError,
                std::string("malformed model document: ") + e.what());
  }
}

}  // namespace countyml
