#include "countyml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <utility>

#include "countyml/csv.hpp"
#include "countyml/error.hpp"
#include "countyml/parallel.hpp"

namespace countyml {

namespace {

void check_lengths(const std::vector<double>& y,
                   const std::vector<double>& yhat, std::size_t min_n) {
  if (y.size() != yhat.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "y has " + std::to_string(y.size()) + " entries, yhat has " +
                    std::to_string(yhat.size()));
  }
  if (y.size() < min_n) {
    throw Error(ErrorKind::InvalidArgument,
                "need at least " + std::to_string(min_n) + " observations");
  }
}

}  // namespace

double r2(const std::vector<double>& y, const std::vector<double>& yhat) {
  check_lengths(y, yhat, 2);
  double mean = 0.0;
  for (const double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) {
    throw Error(ErrorKind::ZeroVariance, "r2 undefined for a constant target");
  }
  return 1.0 - ss_res / ss_tot;
}

double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
  check_lengths(y, yhat, 1);
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(const std::vector<double>& y, const std::vector<double>& yhat) {
  check_lengths(y, yhat, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += std::abs(y[i] - yhat[i]);
  }
  return sum / static_cast<double>(y.size());
}

MetricReport metric_report(const std::vector<double>& y,
                           const std::vector<double>& yhat) {
  return {r2(y, yhat), rmse(y, yhat), mae(y, yhat), y.size()};
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n,
                                                    std::size_t k,
                                                    std::uint64_t seed) {
  if (k < 2 || k > n) {
    throw Error(ErrorKind::InvalidK,
                "k must satisfy 2 <= k <= n; got k = " + std::to_string(k) +
                    ", n = " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  StreamRng rng = StreamRng::from_seed(seed).derive(0x4b464f4c44ULL);  // "KFOLD"
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k;
  const std::size_t remainder = n % k;
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < remainder ? 1 : 0);
    folds[f].assign(order.begin() + cursor, order.begin() + cursor + size);
    cursor += size;
  }
  return folds;
}

const char* to_string(LearnerId id) {
  switch (id) {
    case LearnerId::linear: return "linear";
    case LearnerId::forest: return "forest";
    case LearnerId::gbm: return "gbm";
  }
  return "unknown";
}

LearnerId learner_from_string(const std::string& name) {
  if (name == "linear") return LearnerId::linear;
  if (name == "forest") return LearnerId::forest;
  if (name == "gbm") return LearnerId::gbm;
  throw Error(ErrorKind::ConfigError, "unknown learner '" + name + "'");
}

Model fit_learner(LearnerId id, const DesignMatrix& train,
                  const nlohmann::json& params, std::uint64_t seed,
                  unsigned threads) {
  switch (id) {
    case LearnerId::linear:
      return fit_linear(train);
    case LearnerId::forest:
      return fit_forest(train, forest_params_from_json(params), seed, threads);
    case LearnerId::gbm:
      return fit_gbm(train, gbm_params_from_json(params), seed);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown learner id");
}

std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid) {
  if (!grid.is_object()) {
    throw Error(ErrorKind::ConfigError, "grid must be a JSON object");
  }
  std::vector<nlohmann::json> points;
  points.push_back(nlohmann::json::object());
  // nlohmann objects iterate in sorted key order, which fixes the expansion
  // order and therefore the documented tie-break.
  for (const auto& [name, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw Error(ErrorKind::ConfigError,
                  "grid entry '" + name + "' must be a nonempty array");
    }
    std::vector<nlohmann::json> expanded;
    expanded.reserve(points.size() * values.size());
    for (const auto& point : points) {
      for (const auto& value : values) {
        nlohmann::json next = point;
        next[name] = value;
        expanded.push_back(std::move(next));
      }
    }
    points = std::move(expanded);
  }
  return points;
}

nlohmann::json GridSearchResult::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : cv_table) {
    rows.push_back({{"params", row.params},
                    {"mean_rmse", row.mean_rmse},
                    {"fold_rmses", row.fold_rmses}});
  }
  return {{"best_params", best_params}, {"cv_table", rows}};
}

GridSearchResult grid_search(const DesignMatrix& train, LearnerId learner,
                             const nlohmann::json& grid, std::size_t k,
                             std::uint64_t seed, unsigned threads) {
  const std::vector<nlohmann::json> points = expand_grid(grid);
  const auto folds = kfold_indices(train.n, k, seed);

  // Hold-out fold f trains on every other fold, in fold order.
  std::vector<DesignMatrix> fold_train(k);
  std::vector<DesignMatrix> fold_test(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < k; ++g) {
      if (g == f) continue;
      rest.insert(rest.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(rest.begin(), rest.end());
    fold_train[f] = train.subset(rest);
    std::vector<std::size_t> held = folds[f];
    std::sort(held.begin(), held.end());
    fold_test[f] = train.subset(held);
  }

  // One work item per (grid point, fold); each writes only its own cell.
  std::vector<std::vector<double>> fold_rmse(points.size(),
                                             std::vector<double>(k, 0.0));
  const StreamRng base = StreamRng::from_seed(seed).derive(0x47524944ULL);
  std::optional<std::pair<ErrorKind, std::string>> first_error;
  std::mutex error_mutex;
  parallel_for(points.size() * k, threads, [&](std::size_t item) {
    const std::size_t gi = item / k;
    const std::size_t f = item % k;
    try {
      const std::uint64_t fit_seed = base.derive(gi).derive(f).next_u64();
      const Model model =
          fit_learner(learner, fold_train[f], points[gi], fit_seed, 1);
      fold_rmse[gi][f] =
          rmse(fold_test[f].y, predict(model, fold_test[f]));
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) {
        first_error = {e.kind(), "grid point " + points[gi].dump() +
                                     " fold " + std::to_string(f) + ": " +
                                     e.what()};
      }
    } catch (const std::exception& e) {
      // Typically a malformed grid value surfacing during param parsing.
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) {
        first_error = {ErrorKind::ConfigError,
                       "grid point " + points[gi].dump() + ": " + e.what()};
      }
    }
  });
  if (first_error) {
    throw Error(first_error->first, first_error->second);
  }

  GridSearchResult result;
  std::size_t best_index = 0;
  double best_mean = std::numeric_limits<double>::infinity();
  for (std::size_t gi = 0; gi < points.size(); ++gi) {
    double mean = 0.0;
    for (const double v : fold_rmse[gi]) mean += v;
    mean /= static_cast<double>(k);
    result.cv_table.push_back({points[gi], mean, fold_rmse[gi]});
    if (mean < best_mean) {
      best_mean = mean;
      best_index = gi;
    }
  }
  result.best_params = points[best_index];
  return result;
}

std::vector<LearnerEvaluation> evaluate_models(
    const DesignMatrix& train, const DesignMatrix& test,
    const std::vector<LearnerSpec>& specs, std::size_t k, std::uint64_t seed,
    unsigned threads) {
  if (train.p != test.p || train.feature_names != test.feature_names) {
    throw Error(ErrorKind::DimensionMismatch,
                "train and test splits disagree on features");
  }
  std::vector<LearnerEvaluation> evaluations;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto& spec = specs[s];
    LearnerEvaluation eval;
    eval.id = spec.id;
    const std::uint64_t search_seed =
        StreamRng::from_seed(seed).derive(0x4556414cULL).derive(s).next_u64();
    eval.search = grid_search(train, spec.id, spec.grid, k, search_seed,
                              threads);
    const std::uint64_t refit_seed =
        StreamRng::from_seed(seed).derive(0x524546ULL).derive(s).next_u64();
    eval.model = fit_learner(spec.id, train, eval.search.best_params,
                             refit_seed, threads);
    eval.test_metrics = metric_report(test.y, predict(eval.model, test));
    evaluations.push_back(std::move(eval));
  }
  return evaluations;
}

void write_comparison_csv(const std::vector<LearnerEvaluation>& evaluations,
                          const std::filesystem::path& path) {
  csv::Table table;
  table.header = {"learner", "r2", "rmse", "mae", "n_test"};
  for (const auto& eval : evaluations) {
    table.rows.push_back({to_string(eval.id),
                          csv::format_double(eval.test_metrics.r2),
                          csv::format_double(eval.test_metrics.rmse),
                          csv::format_double(eval.test_metrics.mae),
                          std::to_string(eval.test_metrics.n)});
  }
  csv::write_file(path, table);
}

}  // namespace countyml
