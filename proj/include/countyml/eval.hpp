#ifndef COUNTYML_EVAL_HPP
#define COUNTYML_EVAL_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "countyml/models.hpp"
#include "json.hpp"

namespace countyml {

struct MetricReport {
  double r2 = 0;
  double rmse = 0;  // same units as y
  double mae = 0;
  std::size_t n = 0;
};

// 1 - sum (y - yhat)^2 / sum (y - ybar)^2; may be negative.
double r2(const std::vector<double>& y, const std::vector<double>& yhat);
double rmse(const std::vector<double>& y, const std::vector<double>& yhat);
double mae(const std::vector<double>& y, const std::vector<double>& yhat);
MetricReport metric_report(const std::vector<double>& y,
                           const std::vector<double>& yhat);

// Seeded shuffle then contiguous chunking; fold sizes differ by at most one
// and the folds partition [0, n) exactly.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n,
                                                    std::size_t k,
                                                    std::uint64_t seed);

enum class LearnerId { linear, forest, gbm };
const char* to_string(LearnerId id);
LearnerId learner_from_string(const std::string& name);

// Fits one learner with a flat JSON parameter set (missing keys take the
// learner defaults). LearnerId::linear ignores params.
Model fit_learner(LearnerId id, const DesignMatrix& train,
                  const nlohmann::json& params, std::uint64_t seed,
                  unsigned threads = 1);

struct GridRow {
  nlohmann::json params;
  double mean_rmse = 0;
  std::vector<double> fold_rmses;
};

struct GridSearchResult {
  nlohmann::json best_params;
  std::vector<GridRow> cv_table;

  nlohmann::json to_json() const;
};

// Cartesian expansion of {name: [values...]} in alphabetical key order; the
// empty grid expands to a single empty parameter set.
std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid);

// For every grid point: fit on k-1 folds, score RMSE on the held-out fold,
// average; the minimizer wins, ties going to the earliest grid point. Fold
// fits are seeded by (seed, grid index, fold index) so parallel evaluation
// reports identical numbers.
GridSearchResult grid_search(const DesignMatrix& train, LearnerId learner,
                             const nlohmann::json& grid, std::size_t k,
                             std::uint64_t seed, unsigned threads = 1);

struct LearnerSpec {
  LearnerId id;
  nlohmann::json grid;  // empty object = single default fit
};

struct LearnerEvaluation {
  LearnerId id;
  GridSearchResult search;
  MetricReport test_metrics;
  Model model;  // refit with best params on the full training split
};

// Grid-search on train, refit the winner, score on test. The test split is
// never touched during selection.
std::vector<LearnerEvaluation> evaluate_models(
    const DesignMatrix& train, const DesignMatrix& test,
    const std::vector<LearnerSpec>& specs, std::size_t k, std::uint64_t seed,
    unsigned threads = 1);

// learner,r2,rmse,mae,n_test
void write_comparison_csv(const std::vector<LearnerEvaluation>& evaluations,
                          const std::filesystem::path& path);

}  // namespace countyml

#endif  // COUNTYML_EVAL_HPP
