#ifndef COUNTYML_MODELS_HPP
#define COUNTYML_MODELS_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "countyml/dataset.hpp"
#include "countyml/rng.hpp"
#include "json.hpp"

namespace countyml {

struct DesignMatrix {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> x;  // row-major, n * p
  std::vector<double> y;
  std::vector<std::string> feature_names;
  std::vector<std::string> row_fips;

  double at(std::size_t row, std::size_t col) const { return x[row * p + col]; }
  const double* row(std::size_t i) const { return x.data() + i * p; }

  // Finite entries, n >= 2, p >= 1, consistent sizes.
  void validate() const;

  DesignMatrix subset(const std::vector<std::size_t>& rows) const;
};

// Predictor columns in schema order, outcome as y. Every chosen row must be
// fully observed.
DesignMatrix build_design_matrix(const Dataset& dataset);
DesignMatrix build_design_matrix(const Dataset& dataset,
                                 const std::vector<std::size_t>& rows);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded uniform partition; test size = round(n * test_fraction). Both sides
// are returned in ascending original-index order.
SplitIndices split_indices(std::size_t n, double test_fraction,
                           std::uint64_t seed);

struct TrainTestSplit {
  DesignMatrix train;
  DesignMatrix test;
};

TrainTestSplit train_test_split(const DesignMatrix& matrix,
                                double test_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Trees

struct MaxFeatures {
  enum class Kind { all, sqrt, third, fraction };
  Kind kind = Kind::all;
  double fraction = 1.0;  // only for Kind::fraction

  static MaxFeatures all() { return {Kind::all, 1.0}; }
  static MaxFeatures sqrt() { return {Kind::sqrt, 1.0}; }
  static MaxFeatures third() { return {Kind::third, 1.0}; }
  static MaxFeatures of_fraction(double f) { return {Kind::fraction, f}; }

  std::size_t resolve(std::size_t p) const;
};

struct TreeParams {
  int max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_leaf = 5;
  MaxFeatures max_features = MaxFeatures::all();
};

// Internal node: feature >= 0, rows with x[feature] <= threshold go left.
// Leaf: feature == -1. node_mean is the mean training target at the node
// (for a leaf this is its prediction); coverage is the training-row count.
// Both are required downstream by the SHAP tree walker.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double node_mean = 0;
  std::uint32_t coverage = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  bool empty() const { return nodes.empty(); }
  double predict_row(const double* row) const;
  // coverage(parent) == coverage(left) + coverage(right) at every split.
  bool coverage_consistent() const;
};

// Greedy variance-reduction regression tree over the given rows (indices may
// repeat for bootstrap resamples). Candidate features are drawn from rng per
// node; thresholds sit at midpoints between consecutive distinct sorted
// values; gain ties resolve to the lowest (feature index, threshold).
Tree fit_tree(const DesignMatrix& matrix, const std::vector<std::size_t>& rows,
              const std::vector<double>& targets, const TreeParams& params,
              StreamRng& rng);
Tree fit_tree(const DesignMatrix& matrix, const TreeParams& params,
              StreamRng& rng);

// ---------------------------------------------------------------------------
// Learners

struct LinearModel {
  std::vector<double> coefficients;
  double intercept = 0;
  std::vector<double> training_feature_means;
  std::vector<std::string> feature_names;

  double predict_row(const double* row, std::size_t p) const;
};

struct LinearFitInfo {
  std::size_t rank = 0;
  bool rank_deficient = false;
  std::vector<std::string> dependent_columns;
  std::string warning;
};

// Least squares via a rank-revealing orthogonal decomposition on centered
// data; a rank-deficient design falls back to the minimum-norm solution and
// reports the dependent columns instead of failing.
LinearModel fit_linear(const DesignMatrix& matrix,
                       LinearFitInfo* info = nullptr);

struct ForestParams {
  std::size_t n_estimators = 500;
  TreeParams tree{0, 5, MaxFeatures::third()};
  bool bootstrap = true;
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;

  double predict_row(const double* row, std::size_t p) const;
};

// Each tree draws its bootstrap resample and feature subsets from a stream
// derived from (seed, tree index), so the fitted model is independent of
// tree-construction order and thread count.
ForestModel fit_forest(const DesignMatrix& matrix, const ForestParams& params,
                       std::uint64_t seed, unsigned threads = 1);

struct GbmParams {
  std::size_t n_estimators = 300;
  double learning_rate = 0.1;
  TreeParams tree{3, 5, MaxFeatures::all()};
};

struct GbmModel {
  double init = 0;  // training target mean
  double learning_rate = 0.1;
  std::vector<Tree> trees;
  GbmParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;

  double predict_row(const double* row, std::size_t p) const;
};

// Stagewise squared-error boosting: each tree fits the current residuals and
// is added with the learning rate as shrinkage.
GbmModel fit_gbm(const DesignMatrix& matrix, const GbmParams& params,
                 std::uint64_t seed, std::vector<double>* train_rmse_trace = nullptr);

// ---------------------------------------------------------------------------
// Common model handle

using Model = std::variant<LinearModel, ForestModel, GbmModel>;

double predict_row(const Model& model, const double* row, std::size_t p);
std::vector<double> predict(const Model& model, const DesignMatrix& matrix);
std::size_t model_feature_count(const Model& model);
const std::vector<std::string>& model_feature_names(const Model& model);
const char* model_type_name(const Model& model);

// Versioned JSON round-trip. Doubles survive bit-exactly, so a deserialized
// model predicts identically.
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

ForestParams forest_params_from_json(const nlohmann::json& params);
GbmParams gbm_params_from_json(const nlohmann::json& params);
nlohmann::json forest_params_to_json(const ForestParams& params);
nlohmann::json gbm_params_to_json(const GbmParams& params);

}  // namespace countyml

#endif  // COUNTYML_MODELS_HPP
