#include "countyml/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "countyml/csv.hpp"
#include "countyml/error.hpp"
#include "countyml/parallel.hpp"

namespace countyml {

namespace {

// --------------------------------------------------------------------------
// Path-dependent TreeSHAP (Lundberg & Lee's polynomial algorithm).
//
// A "path" records, for each unique feature split on between the root and
// the current node, the fraction of training coverage that flows through
// when the feature is unknown (zero_fraction), whether x follows the branch
// (one_fraction), and a permutation weight. Each recursion level owns a
// disjoint segment of one preallocated buffer and copies its parent's path
// on entry, so sibling subtrees never interfere.

struct PathElement {
  std::int32_t feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};

void extend_path(PathElement* path, int length, double zero_fraction,
                 double one_fraction, std::int32_t feature) {
  path[length] = {feature, zero_fraction, one_fraction,
                  length == 0 ? 1.0 : 0.0};
  for (int i = length - 1; i >= 0; --i) {
    path[i + 1].weight +=
        one_fraction * path[i].weight * (i + 1) / (length + 1);
    path[i].weight = zero_fraction * path[i].weight * (length - i) /
                     (length + 1);
  }
}

void unwind_path(PathElement* path, int length, int index) {
  const int n = length - 1;
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next = path[n].weight;
  for (int j = n - 1; j >= 0; --j) {
    if (one_fraction != 0.0) {
      const double tmp = path[j].weight;
      path[j].weight = next * (n + 1) / ((j + 1) * one_fraction);
      next = tmp - path[j].weight * zero_fraction * (n - j) / (n + 1);
    } else {
      path[j].weight = path[j].weight * (n + 1) / (zero_fraction * (n - j));
    }
  }
  for (int j = index; j < n; ++j) {
    path[j].feature = path[j + 1].feature;
    path[j].zero_fraction = path[j + 1].zero_fraction;
    path[j].one_fraction = path[j + 1].one_fraction;
  }
}

// Sum of permutation weights with element `index` hypothetically unwound.
double unwound_sum(const PathElement* path, int length, int index) {
  const int n = length - 1;
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next = path[n].weight;
  double total = 0.0;
  if (one_fraction != 0.0) {
    for (int j = n - 1; j >= 0; --j) {
      const double tmp = next / ((j + 1) * one_fraction);
      total += tmp;
      next = path[j].weight - tmp * zero_fraction * (n - j);
    }
  } else {
    for (int j = n - 1; j >= 0; --j) {
      total += path[j].weight / (zero_fraction * (n - j));
    }
  }
  return total * (n + 1);
}

void shap_recurse(const Tree& tree, const double* x, double* phi,
                  std::int32_t node_index, PathElement* parent_path,
                  int parent_length, double zero_fraction, double one_fraction,
                  std::int32_t feature) {
  PathElement* path = parent_path + parent_length;
  std::copy(parent_path, parent_path + parent_length, path);
  int length = parent_length;
  extend_path(path, length, zero_fraction, one_fraction, feature);
  ++length;

  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) {
    for (int i = 1; i < length; ++i) {
      const double w = unwound_sum(path, length, i);
      phi[path[i].feature] +=
          w * (path[i].one_fraction - path[i].zero_fraction) * node.node_mean;
    }
    return;
  }

  const bool goes_left = x[node.feature] <= node.threshold;
  const std::int32_t hot = goes_left ? node.left : node.right;
  const std::int32_t cold = goes_left ? node.right : node.left;
  const double total = static_cast<double>(node.coverage);
  const double hot_fraction =
      static_cast<double>(tree.nodes[static_cast<std::size_t>(hot)].coverage) /
      total;
  const double cold_fraction =
      static_cast<double>(tree.nodes[static_cast<std::size_t>(cold)].coverage) /
      total;

  // A feature met again on the same path: undo its earlier element and fold
  // its fractions into the new one.
  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  for (int i = 1; i < length; ++i) {
    if (path[i].feature == node.feature) {
      incoming_zero = path[i].zero_fraction;
      incoming_one = path[i].one_fraction;
      unwind_path(path, length, i);
      --length;
      break;
    }
  }

  shap_recurse(tree, x, phi, hot, path, length, incoming_zero * hot_fraction,
               incoming_one, node.feature);
  shap_recurse(tree, x, phi, cold, path, length, incoming_zero * cold_fraction,
               0.0, node.feature);
}

int max_leaf_depth(const Tree& tree, std::int32_t node_index, int depth) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) return depth;
  return std::max(max_leaf_depth(tree, node.left, depth + 1),
                  max_leaf_depth(tree, node.right, depth + 1));
}

void require_coverage(const Tree& tree) {
  for (const auto& node : tree.nodes) {
    if (node.coverage == 0) {
      throw Error(ErrorKind::MissingCoverage,
                  "tree node lacks training coverage; SHAP needs models "
                  "fitted (or serialized) with coverage counts");
    }
  }
}

// phi must hold p zeros; adds this tree's attributions.
void single_tree_shap(const Tree& tree, const double* x, double* phi) {
  if (tree.nodes.size() == 1) return;  // root leaf: no attributions
  const int depth = max_leaf_depth(tree, 0, 0);
  std::vector<PathElement> buffer(
      static_cast<std::size_t>((depth + 2) * (depth + 3) / 2));
  shap_recurse(tree, x, phi, 0, buffer.data(), 0, 1.0, 1.0, -1);
}

void check_features(std::size_t expected, std::size_t actual) {
  if (expected != actual) {
    throw Error(ErrorKind::DimensionMismatch,
                "model expects " + std::to_string(expected) +
                    " features, x has " + std::to_string(actual));
  }
}

ShapExplanation explain_forest(const ForestModel& model,
                               const std::vector<double>& x,
                               bool validate) {
  check_features(model.feature_names.size(), x.size());
  if (validate) {
    for (const auto& tree : model.trees) require_coverage(tree);
  }
  const std::size_t p = x.size();
  ShapExplanation out;
  out.x = x;
  out.attributions.assign(p, 0.0);
  double base = 0.0;
  for (const auto& tree : model.trees) {
    single_tree_shap(tree, x.data(), out.attributions.data());
    base += tree.nodes[0].node_mean;
  }
  const double inv = 1.0 / static_cast<double>(model.trees.size());
  for (auto& phi : out.attributions) phi *= inv;
  out.base_value = base * inv;
  out.prediction = model.predict_row(x.data(), p);
  return out;
}

ShapExplanation explain_gbm(const GbmModel& model,
                            const std::vector<double>& x, bool validate) {
  check_features(model.feature_names.size(), x.size());
  if (validate) {
    for (const auto& tree : model.trees) require_coverage(tree);
  }
  const std::size_t p = x.size();
  ShapExplanation out;
  out.x = x;
  out.attributions.assign(p, 0.0);
  double base = model.init;
  std::vector<double> tree_phi(p);
  for (const auto& tree : model.trees) {
    std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
    single_tree_shap(tree, x.data(), tree_phi.data());
    for (std::size_t j = 0; j < p; ++j) {
      out.attributions[j] += model.learning_rate * tree_phi[j];
    }
    base += model.learning_rate * tree.nodes[0].node_mean;
  }
  out.base_value = base;
  out.prediction = model.predict_row(x.data(), p);
  return out;
}

// --------------------------------------------------------------------------
// Brute-force oracle

double tree_subset_expectation(const Tree& tree, std::int32_t node_index,
                               const double* x, std::uint32_t mask) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) return node.node_mean;
  if ((mask >> node.feature) & 1u) {
    const std::int32_t child =
        x[node.feature] <= node.threshold ? node.left : node.right;
    return tree_subset_expectation(tree, child, x, mask);
  }
  const double left_cov =
      static_cast<double>(tree.nodes[static_cast<std::size_t>(node.left)].coverage);
  const double right_cov = static_cast<double>(
      tree.nodes[static_cast<std::size_t>(node.right)].coverage);
  return (left_cov * tree_subset_expectation(tree, node.left, x, mask) +
          right_cov * tree_subset_expectation(tree, node.right, x, mask)) /
         (left_cov + right_cov);
}

double subset_value(const Model& model, const double* x, std::uint32_t mask) {
  if (const auto* linear = std::get_if<LinearModel>(&model)) {
    double v = linear->intercept;
    for (std::size_t j = 0; j < linear->coefficients.size(); ++j) {
      const double xj =
          ((mask >> j) & 1u) ? x[j] : linear->training_feature_means[j];
      v += linear->coefficients[j] * xj;
    }
    return v;
  }
  if (const auto* forest = std::get_if<ForestModel>(&model)) {
    double sum = 0.0;
    for (const auto& tree : forest->trees) {
      sum += tree_subset_expectation(tree, 0, x, mask);
    }
    return sum / static_cast<double>(forest->trees.size());
  }
  const auto& gbm = std::get<GbmModel>(model);
  double sum = gbm.init;
  for (const auto& tree : gbm.trees) {
    sum += gbm.learning_rate * tree_subset_expectation(tree, 0, x, mask);
  }
  return sum;
}

}  // namespace

ShapExplanation shap_linear(const LinearModel& model,
                            const std::vector<double>& x) {
  check_features(model.coefficients.size(), x.size());
  ShapExplanation out;
  out.x = x;
  out.attributions.resize(x.size());
  double base = model.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) {
    out.attributions[j] =
        model.coefficients[j] * (x[j] - model.training_feature_means[j]);
    base += model.coefficients[j] * model.training_feature_means[j];
  }
  out.base_value = base;
  out.prediction = model.predict_row(x.data(), x.size());
  return out;
}

ShapExplanation shap_tree(const ForestModel& model,
                          const std::vector<double>& x) {
  return explain_forest(model, x, true);
}

ShapExplanation shap_tree(const GbmModel& model, const std::vector<double>& x) {
  return explain_gbm(model, x, true);
}

ShapExplanation shap_model(const Model& model, const std::vector<double>& x) {
  if (const auto* linear = std::get_if<LinearModel>(&model)) {
    return shap_linear(*linear, x);
  }
  if (const auto* forest = std::get_if<ForestModel>(&model)) {
    return shap_tree(*forest, x);
  }
  return shap_tree(std::get<GbmModel>(model), x);
}

ShapExplanation shap_brute_force(const Model& model,
                                 const std::vector<double>& x) {
  const std::size_t p = model_feature_count(model);
  if (p > 15) {
    throw Error(ErrorKind::TooManyFeatures,
                "brute-force Shapley enumerates 2^p subsets; p = " +
                    std::to_string(p) + " exceeds 15");
  }
  check_features(p, x.size());
  if (const auto* forest = std::get_if<ForestModel>(&model)) {
    for (const auto& tree : forest->trees) require_coverage(tree);
  } else if (const auto* gbm = std::get_if<GbmModel>(&model)) {
    for (const auto& tree : gbm->trees) require_coverage(tree);
  }

  const std::uint32_t n_masks = 1u << p;
  std::vector<double> value(n_masks);
  for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
    value[mask] = subset_value(model, x.data(), mask);
  }

  std::vector<double> factorial(p + 1, 1.0);
  for (std::size_t i = 1; i <= p; ++i) {
    factorial[i] = factorial[i - 1] * static_cast<double>(i);
  }

  ShapExplanation out;
  out.x = x;
  out.attributions.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const std::uint32_t bit = 1u << i;
    double phi = 0.0;
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      const double weight = factorial[s] * factorial[p - s - 1] / factorial[p];
      phi += weight * (value[mask | bit] - value[mask]);
    }
    out.attributions[i] = phi;
  }
  out.base_value = value[0];
  out.prediction = predict_row(model, x.data(), p);
  return out;
}

FeatureRanking mean_abs_shap(const std::vector<ShapExplanation>& explanations,
                             const std::vector<std::string>& feature_names) {
  if (explanations.empty()) {
    throw Error(ErrorKind::EmptyInput, "no explanations to rank");
  }
  const std::size_t p = feature_names.size();
  std::vector<double> totals(p, 0.0);
  for (const auto& explanation : explanations) {
    if (explanation.attributions.size() != p) {
      throw Error(ErrorKind::DimensionMismatch,
                  "explanations disagree on feature count");
    }
    for (std::size_t j = 0; j < p; ++j) {
      totals[j] += std::abs(explanation.attributions[j]);
    }
  }
  FeatureRanking ranking;
  ranking.entries.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    ranking.entries.emplace_back(
        feature_names[j], totals[j] / static_cast<double>(explanations.size()));
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  return ranking;
}

std::vector<ShapExplanation> explain_rows(const Model& model,
                                          const DesignMatrix& matrix,
                                          unsigned threads) {
  check_features(model_feature_count(model), matrix.p);
  if (const auto* forest = std::get_if<ForestModel>(&model)) {
    for (const auto& tree : forest->trees) require_coverage(tree);
  } else if (const auto* gbm = std::get_if<GbmModel>(&model)) {
    for (const auto& tree : gbm->trees) require_coverage(tree);
  }
  std::vector<ShapExplanation> out(matrix.n);
  parallel_for(matrix.n, threads, [&](std::size_t i) {
    std::vector<double> x(matrix.row(i), matrix.row(i) + matrix.p);
    if (const auto* linear = std::get_if<LinearModel>(&model)) {
      out[i] = shap_linear(*linear, x);
    } else if (const auto* forest = std::get_if<ForestModel>(&model)) {
      out[i] = explain_forest(*forest, x, false);
    } else {
      out[i] = explain_gbm(std::get<GbmModel>(model), x, false);
    }
  });
  return out;
}

void write_ranking_csv(const FeatureRanking& ranking,
                       const std::filesystem::path& path) {
  csv::Table table;
  table.header = {"rank", "feature", "mean_abs_shap"};
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    table.rows.push_back({std::to_string(i + 1), ranking.entries[i].first,
                          csv::format_double(ranking.entries[i].second)});
  }
  csv::write_file(path, table);
}

void export_summary_plot_data(const std::vector<ShapExplanation>& explanations,
                              const std::vector<std::string>& row_fips,
                              const std::vector<std::string>& feature_names,
                              std::size_t top_k,
                              const std::filesystem::path& path) {
  if (top_k > feature_names.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "top_k = " + std::to_string(top_k) + " exceeds feature count " +
                    std::to_string(feature_names.size()));
  }
  if (explanations.size() != row_fips.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "explanations and row fips disagree on size");
  }
  csv::Table table;
  table.header = {"feature", "fips", "feature_value", "shap_value"};
  if (top_k > 0) {
    const FeatureRanking ranking = mean_abs_shap(explanations, feature_names);
    for (std::size_t r = 0; r < top_k; ++r) {
      const std::string& feature = ranking.entries[r].first;
      const std::size_t j = static_cast<std::size_t>(
          std::find(feature_names.begin(), feature_names.end(), feature) -
          feature_names.begin());
      for (std::size_t i = 0; i < explanations.size(); ++i) {
        table.rows.push_back({feature, row_fips[i],
                              csv::format_double(explanations[i].x[j]),
                              csv::format_double(
                                  explanations[i].attributions[j])});
      }
    }
  }
  csv::write_file(path, table);
}

double ranking_spearman(const FeatureRanking& a, const FeatureRanking& b) {
  const std::size_t n = a.entries.size();
  if (b.entries.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "rankings cover different feature counts");
  }
  if (n <= 1) return 1.0;
  std::map<std::string, std::size_t> position_b;
  for (std::size_t i = 0; i < n; ++i) position_b[b.entries[i].first] = i;
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = position_b.find(a.entries[i].first);
    if (it == position_b.end()) {
      throw Error(ErrorKind::InvalidArgument,
                  "rankings cover different features ('" +
                      a.entries[i].first + "')");
    }
    const double d = static_cast<double>(i) - static_cast<double>(it->second);
    d2 += d * d;
  }
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

}  // namespace countyml
