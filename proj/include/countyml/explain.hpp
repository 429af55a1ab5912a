#ifndef COUNTYML_EXPLAIN_HPP
#define COUNTYML_EXPLAIN_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "countyml/models.hpp"

namespace countyml {

// Additive attribution for one instance: base_value + sum(attributions)
// equals the model prediction (local accuracy, within 1e-6).
struct ShapExplanation {
  double base_value = 0;
  std::vector<double> attributions;
  std::vector<double> x;
  double prediction = 0;
};

// Closed form under independent features: phi_i = beta_i * (x_i - mean_i),
// base value = prediction at the training feature means.
ShapExplanation shap_linear(const LinearModel& model,
                            const std::vector<double>& x);

// Exact Shapley values of the path-dependent tree game: conditioned features
// follow x, unconditioned splits average both children by training coverage.
// Polynomial-time path algorithm; per-tree results aggregate as the mean
// over trees (forest) or init + learning_rate * sum (gbm).
ShapExplanation shap_tree(const ForestModel& model,
                          const std::vector<double>& x);
ShapExplanation shap_tree(const GbmModel& model, const std::vector<double>& x);

// Dispatches to shap_linear / shap_tree by model type.
ShapExplanation shap_model(const Model& model, const std::vector<double>& x);

// Subset-enumeration oracle: evaluates the Shapley sum
//   phi_i = sum_{S not containing i} |S|!(p-|S|-1)!/p! [v(S+i) - v(S)]
// with the same value function as the fast algorithms. Exponential in p;
// rejects p > 15.
ShapExplanation shap_brute_force(const Model& model,
                                 const std::vector<double>& x);

struct FeatureRanking {
  // Descending mean |attribution|; ties ordered by feature name.
  std::vector<std::pair<std::string, double>> entries;
};

FeatureRanking mean_abs_shap(const std::vector<ShapExplanation>& explanations,
                             const std::vector<std::string>& feature_names);

// Explanations for every matrix row, in row order.
std::vector<ShapExplanation> explain_rows(const Model& model,
                                          const DesignMatrix& matrix,
                                          unsigned threads = 1);

// rank,feature,mean_abs_shap
void write_ranking_csv(const FeatureRanking& ranking,
                       const std::filesystem::path& path);

// Long-format beeswarm data, `feature,fips,feature_value,shap_value`,
// restricted to the top_k features by mean |attribution|.
void export_summary_plot_data(const std::vector<ShapExplanation>& explanations,
                              const std::vector<std::string>& row_fips,
                              const std::vector<std::string>& feature_names,
                              std::size_t top_k,
                              const std::filesystem::path& path);

// Spearman rank correlation between two rankings over the same features.
double ranking_spearman(const FeatureRanking& a, const FeatureRanking& b);

}  // namespace countyml

#endif  // COUNTYML_EXPLAIN_HPP
