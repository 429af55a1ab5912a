#ifndef COUNTYML_TEST_SUPPORT_HPP
#define COUNTYML_TEST_SUPPORT_HPP

// Shared generators and independent oracles for the unit and acceptance
// suites. Everything here is deliberately written as straight-line,
// formula-level code so it cannot share bugs with the library paths it
// checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "countyml/dataset.hpp"
#include "countyml/models.hpp"
#include "countyml/preprocess.hpp"
#include "countyml/rng.hpp"
#include "countyml/spatial.hpp"

namespace testsupport {

using countyml::CountyRecord;
using countyml::Dataset;
using countyml::DesignMatrix;
using countyml::StreamRng;
using countyml::VariableRole;
using countyml::VariableSpec;

// ---------------------------------------------------------------------------
// Dataset / matrix generators

inline std::string fips_of(std::size_t i) {
  std::string digits = std::to_string(i + 1);
  if (digits.size() < 5) digits.insert(digits.begin(), 5 - digits.size(), '0');
  return digits;
}

inline std::vector<VariableSpec> small_schema(std::size_t n_predictors) {
  std::vector<VariableSpec> schema;
  schema.push_back({"outcome", countyml::UnitClass::index, false,
                    VariableRole::outcome});
  for (std::size_t j = 0; j < n_predictors; ++j) {
    schema.push_back({"x" + std::to_string(j), countyml::UnitClass::index,
                      false, VariableRole::predictor});
  }
  return schema;
}

// Random dataset over a small lon/lat window, with optional missing cells.
inline Dataset random_dataset(std::size_t n, std::size_t n_predictors,
                              double missing_rate, StreamRng& rng) {
  auto schema = small_schema(n_predictors);
  std::vector<CountyRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    CountyRecord record;
    record.fips = fips_of(i);
    record.centroid_lon = rng.uniform(-110.0, -80.0);
    record.centroid_lat = rng.uniform(30.0, 45.0);
    record.values.resize(schema.size());
    for (std::size_t v = 0; v < schema.size(); ++v) {
      if (rng.next_unit() < missing_rate) continue;
      record.values[v] = rng.uniform(-10.0, 10.0);
    }
    records.push_back(std::move(record));
  }
  return Dataset(std::move(schema), std::move(records), "test");
}

inline DesignMatrix random_matrix(std::size_t n, std::size_t p,
                                  StreamRng& rng) {
  DesignMatrix m;
  m.n = n;
  m.p = p;
  for (std::size_t j = 0; j < p; ++j) {
    m.feature_names.push_back("x" + std::to_string(j));
  }
  m.x.resize(n * p);
  for (auto& v : m.x) v = rng.uniform(-3.0, 3.0);
  m.y.resize(n);
  for (auto& v : m.y) v = rng.uniform(-5.0, 5.0);
  for (std::size_t i = 0; i < n; ++i) m.row_fips.push_back(fips_of(i));
  return m;
}

// ---------------------------------------------------------------------------
// Independent oracles

// Plain haversine written from the definition.
inline double haversine_oracle_km(double lat1, double lon1, double lat2,
                                  double lon2) {
  const double rad = 3.14159265358979323846 / 180.0;
  const double p1 = lat1 * rad, p2 = lat2 * rad;
  const double dp = (lat2 - lat1) * rad, dl = (lon2 - lon1) * rad;
  const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                   std::cos(p1) * std::cos(p2) * std::sin(dl / 2) *
                       std::sin(dl / 2);
  return 2.0 * 6371.0 * std::asin(std::sqrt(std::min(1.0, a)));
}

// Brute-force KNN mean imputation: full pairwise distance table, donors
// sorted by (distance, fips), mean of the first k observed values.
inline std::optional<double> knn_impute_oracle(const Dataset& dataset,
                                               std::size_t row,
                                               std::size_t variable,
                                               std::size_t k) {
  const auto& records = dataset.records();
  struct Donor {
    double distance;
    std::string fips;
    double value;
  };
  std::vector<Donor> donors;
  for (std::size_t j = 0; j < records.size(); ++j) {
    if (!records[j].values[variable].has_value()) continue;
    donors.push_back({haversine_oracle_km(
                          records[row].centroid_lat, records[row].centroid_lon,
                          records[j].centroid_lat, records[j].centroid_lon),
                      records[j].fips, *records[j].values[variable]});
  }
  if (donors.size() < k) return std::nullopt;
  std::sort(donors.begin(), donors.end(), [](const Donor& a, const Donor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.fips < b.fips;
  });
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) sum += donors[j].value;
  return sum / static_cast<double>(k);
}

// Direct Gi* evaluation over a dense weight matrix, term by term.
inline std::vector<double> gi_star_oracle(
    const std::vector<double>& values,
    const countyml::SpatialWeights& weights) {
  const std::size_t n = values.size();
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [j, weight] : weights.neighbors[i]) w[i][j] = weight;
  }
  double mean = 0.0;
  for (const double x : values) mean += x;
  mean /= static_cast<double>(n);
  double sq = 0.0;
  for (const double x : values) sq += x * x;
  const double s = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));

  std::vector<double> z(n, 0.0);
  bool constant = true;
  for (const double x : values) {
    if (x != values.front()) constant = false;
  }
  if (constant || s == 0.0) return z;
  for (std::size_t i = 0; i < n; ++i) {
    double wi = 0.0, wi2 = 0.0, wx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      wi += w[i][j];
      wi2 += w[i][j] * w[i][j];
      wx += w[i][j] * values[j];
    }
    const double bracket = (static_cast<double>(n) * wi2 - wi * wi) /
                           static_cast<double>(n - 1);
    z[i] = bracket <= 0.0 ? 0.0 : (wx - mean * wi) / (s * std::sqrt(bracket));
  }
  return z;
}

// Ordinary least squares through the normal equations (X'X b = X'y with an
// explicit intercept column), solved by Gaussian elimination with partial
// pivoting.
struct NormalEquationsFit {
  std::vector<double> coefficients;
  double intercept = 0;
};

inline NormalEquationsFit normal_equations_oracle(const DesignMatrix& m) {
  const std::size_t q = m.p + 1;  // intercept first
  std::vector<std::vector<double>> a(q, std::vector<double>(q + 1, 0.0));
  auto x_at = [&](std::size_t i, std::size_t j) -> double {
    return j == 0 ? 1.0 : m.at(i, j - 1);
  };
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t c = 0; c < q; ++c) {
      double sum = 0.0;
      for (std::size_t i = 0; i < m.n; ++i) sum += x_at(i, r) * x_at(i, c);
      a[r][c] = sum;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) sum += x_at(i, r) * m.y[i];
    a[r][q] = sum;
  }
  for (std::size_t col = 0; col < q; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < q; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < q; ++r) {
      if (r == col || a[col][col] == 0.0) continue;
      const double factor = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= q; ++c) a[r][c] -= factor * a[col][c];
    }
  }
  NormalEquationsFit fit;
  fit.intercept = a[0][q] / a[0][0];
  for (std::size_t j = 1; j < q; ++j) {
    fit.coefficients.push_back(a[j][q] / a[j][j]);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Random fitted models (fitting real data keeps every structural invariant,
// coverage included, satisfied by construction)

inline countyml::ForestModel random_forest_model(std::size_t p,
                                                 std::size_t n_trees,
                                                 int max_depth,
                                                 StreamRng& rng) {
  const std::size_t n = 40 + static_cast<std::size_t>(rng.below(60));
  DesignMatrix m = random_matrix(n, p, rng);
  countyml::ForestParams params;
  params.n_estimators = n_trees;
  params.tree.max_depth = max_depth;
  params.tree.min_samples_leaf = 1 + static_cast<std::size_t>(rng.below(4));
  params.tree.max_features = countyml::MaxFeatures::all();
  params.bootstrap = true;
  return fit_forest(m, params, rng.next_u64());
}

inline countyml::GbmModel random_gbm_model(std::size_t p, std::size_t n_trees,
                                           int max_depth, StreamRng& rng) {
  const std::size_t n = 40 + static_cast<std::size_t>(rng.below(60));
  DesignMatrix m = random_matrix(n, p, rng);
  countyml::GbmParams params;
  params.n_estimators = n_trees;
  params.learning_rate = 0.2 + 0.6 * rng.next_unit();
  params.tree.max_depth = max_depth;
  params.tree.min_samples_leaf = 2 + static_cast<std::size_t>(rng.below(4));
  params.tree.max_features = countyml::MaxFeatures::all();
  return fit_gbm(m, params, rng.next_u64());
}

inline countyml::LinearModel random_linear_model(std::size_t p,
                                                 StreamRng& rng) {
  countyml::LinearModel model;
  for (std::size_t j = 0; j < p; ++j) {
    model.feature_names.push_back("x" + std::to_string(j));
    model.coefficients.push_back(rng.uniform(-4.0, 4.0));
    model.training_feature_means.push_back(rng.uniform(-2.0, 2.0));
  }
  model.intercept = rng.uniform(-5.0, 5.0);
  return model;
}

inline std::vector<double> random_point(std::size_t p, StreamRng& rng) {
  std::vector<double> x(p);
  for (auto& v : x) v = rng.uniform(-3.0, 3.0);
  return x;
}

}  // namespace testsupport

#endif  // COUNTYML_TEST_SUPPORT_HPP
