#ifndef COUNTYML_PREPROCESS_HPP
#define COUNTYML_PREPROCESS_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "countyml/dataset.hpp"
#include "json.hpp"

namespace countyml {

struct PreprocessConfig {
  std::size_t max_missing_per_county = 5;
  std::size_t knn_k = 20;
  double outlier_iqr_multiplier = 3.0;
  // nullopt = every variable with is_percentage == false.
  std::optional<std::set<std::string>> scale_targets;
  // Missing outcomes are left alone unless this is set.
  bool impute_outcome = false;

  void validate() const;
};

struct MinMax {
  double min = 0;
  double max = 0;
};

// Per-variable min/max learned on a designated fit subset. A constant
// variable (max == min) maps identically to 0 when applied.
struct ScalingParams {
  std::map<std::string, MinMax> by_variable;
};

struct PreprocessReport {
  std::vector<std::string> dropped_fips;
  std::map<std::string, std::size_t> imputed_cells;
  std::map<std::string, std::size_t> clamped_cells;
  ScalingParams scaling;

  nlohmann::json to_json() const;
};

// Great-circle distance between two points, Earth radius 6371 km.
double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg,
                    double lon2_deg);

// Quantile by linear interpolation between order statistics (the common
// "type 7" rule). `sorted` must be ascending and nonempty; p in [0, 1].
double quantile_linear(const std::vector<double>& sorted, double p);

// Variables the scaler operates on, in schema order.
std::vector<std::string> resolve_scale_targets(const Dataset& dataset,
                                               const PreprocessConfig& config);

// Keeps exactly the records with at most max_missing_per_county missing
// values over all schema variables; order preserved.
Dataset drop_sparse_counties(const Dataset& dataset,
                             const PreprocessConfig& config,
                             PreprocessReport* report = nullptr);

// Fills each missing cell with the mean of that variable over the knn_k
// nearest counties (haversine between centroids, ties by ascending fips)
// that observe it. Reads only pre-imputation values; no chaining. Outcome
// cells are imputed only when config.impute_outcome is set.
Dataset knn_impute(const Dataset& dataset, const PreprocessConfig& config,
                   PreprocessReport* report = nullptr, unsigned threads = 1);

// Winsorizes each scale-target variable at [Q1 - m*IQR, Q3 + m*IQR].
Dataset handle_outliers(const Dataset& dataset, const PreprocessConfig& config,
                        PreprocessReport* report = nullptr);

ScalingParams fit_scaler(const Dataset& dataset,
                         const std::vector<std::size_t>& fit_rows,
                         const PreprocessConfig& config);

// (x - min) / (max - min), deliberately not re-clamped: values outside the
// fit range land outside [0, 1]. Missing cells stay missing.
Dataset apply_scaler(const Dataset& dataset, const ScalingParams& params);

}  // namespace countyml

#endif  // COUNTYML_PREPROCESS_HPP
