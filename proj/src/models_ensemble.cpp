#include <cmath>
#include <numeric>

#include "countyml/error.hpp"
#include "countyml/models.hpp"
#include "countyml/parallel.hpp"

namespace countyml {

namespace {
constexpr std::uint64_t kTreeStreamTag = 0x54524545ULL;  // "TREE"
}

double ForestModel::predict_row(const double* row, std::size_t p) const {
  if (p != feature_names.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "forest expects " + std::to_string(feature_names.size()) +
                    " features, input has " + std::to_string(p));
  }
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict_row(row);
  return sum / static_cast<double>(trees.size());
}

ForestModel fit_forest(const DesignMatrix& matrix, const ForestParams& params,
                       std::uint64_t seed, unsigned threads) {
  matrix.validate();
  if (params.n_estimators < 1) {
    throw Error(ErrorKind::InvalidArgument, "n_estimators must be >= 1");
  }
  if (params.tree.min_samples_leaf < 1) {
    throw Error(ErrorKind::InvalidArgument, "min_samples_leaf must be >= 1");
  }
  params.tree.max_features.resolve(matrix.p);  // rejects bad fractions early
  ForestModel model;
  model.params = params;
  model.seed = seed;
  model.feature_names = matrix.feature_names;
  model.trees.resize(params.n_estimators);

  const StreamRng base = StreamRng::from_seed(seed).derive(kTreeStreamTag);
  std::vector<std::size_t> identity(matrix.n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});

  parallel_for(params.n_estimators, threads, [&](std::size_t t) {
    StreamRng rng = base.derive(t);
    std::vector<std::size_t> rows;
    if (params.bootstrap) {
      rows.resize(matrix.n);
      for (auto& r : rows) {
        r = static_cast<std::size_t>(rng.below(matrix.n));
      }
    } else {
      rows = identity;
    }
    model.trees[t] = fit_tree(matrix, rows, matrix.y, params.tree, rng);
  });
  return model;
}

double GbmModel::predict_row(const double* row, std::size_t p) const {
  if (p != feature_names.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "gbm expects " + std::to_string(feature_names.size()) +
                    " features, input has " + std::to_string(p));
  }
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict_row(row);
  return init + learning_rate * sum;
}

GbmModel fit_gbm(const DesignMatrix& matrix, const GbmParams& params,
                 std::uint64_t seed, std::vector<double>* train_rmse_trace) {
  matrix.validate();
  if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "learning_rate must lie in (0, 1]");
  }

  GbmModel model;
  model.params = params;
  model.seed = seed;
  model.learning_rate = params.learning_rate;
  model.feature_names = matrix.feature_names;

  double y_sum = 0.0;
  for (const double v : matrix.y) y_sum += v;
  model.init = y_sum / static_cast<double>(matrix.n);

  std::vector<double> residuals(matrix.n);
  for (std::size_t i = 0; i < matrix.n; ++i) {
    residuals[i] = matrix.y[i] - model.init;
  }
  auto record_rmse = [&] {
    if (!train_rmse_trace) return;
    double ss = 0.0;
    for (const double r : residuals) ss += r * r;
    train_rmse_trace->push_back(
        std::sqrt(ss / static_cast<double>(matrix.n)));
  };
  record_rmse();

  std::vector<std::size_t> rows(matrix.n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const StreamRng base = StreamRng::from_seed(seed).derive(kTreeStreamTag);

  model.trees.reserve(params.n_estimators);
  for (std::size_t stage = 0; stage < params.n_estimators; ++stage) {
    StreamRng rng = base.derive(stage);
    Tree tree = fit_tree(matrix, rows, residuals, params.tree, rng);
    for (std::size_t i = 0; i < matrix.n; ++i) {
      residuals[i] -= params.learning_rate * tree.predict_row(matrix.row(i));
    }
    model.trees.push_back(std::move(tree));
    record_rmse();
  }
  return model;
}

double predict_row(const Model& model, const double* row, std::size_t p) {
  return std::visit([&](const auto& m) { return m.predict_row(row, p); },
                    model);
}

std::vector<double> predict(const Model& model, const DesignMatrix& matrix) {
  std::vector<double> out(matrix.n);
  for (std::size_t i = 0; i < matrix.n; ++i) {
    out[i] = predict_row(model, matrix.row(i), matrix.p);
  }
  return out;
}

std::size_t model_feature_count(const Model& model) {
  return model_feature_names(model).size();
}

const std::vector<std::string>& model_feature_names(const Model& model) {
  return std::visit(
      [](const auto& m) -> const std::vector<std::string>& {
        return m.feature_names;
      },
      model);
}

const char* model_type_name(const Model& model) {
  struct Visitor {
    const char* operator()(const LinearModel&) const { return "linear"; }
    const char* operator()(const ForestModel&) const { return "forest"; }
    const char* operator()(const GbmModel&) const { return "gbm"; }
  };
  return std::visit(Visitor{}, model);
}

}  // namespace countyml
