#include "countyml/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "countyml/error.hpp"
#include "countyml/parallel.hpp"

namespace countyml {

namespace {
constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}  // namespace

void PreprocessConfig::validate() const {
  if (knn_k < 1) {
    throw Error(ErrorKind::ConfigError, "knn_k must be at least 1");
  }
  if (!(outlier_iqr_multiplier > 0)) {
    throw Error(ErrorKind::ConfigError,
                "outlier_iqr_multiplier must be positive");
  }
}

nlohmann::json PreprocessReport::to_json() const {
  nlohmann::json scaling_json = nlohmann::json::object();
  for (const auto& [name, mm] : scaling.by_variable) {
    scaling_json[name] = {{"min", mm.min}, {"max", mm.max}};
  }
  return {{"dropped_fips", dropped_fips},
          {"imputed_cells", imputed_cells},
          {"clamped_cells", clamped_cells},
          {"scaling", scaling_json}};
}

double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg,
                    double lon2_deg) {
  const double lat1 = lat1_deg * kDegToRad;
  const double lat2 = lat2_deg * kDegToRad;
  const double dlat = (lat2_deg - lat1_deg) * kDegToRad;
  const double dlon = (lon2_deg - lon1_deg) * kDegToRad;
  const double a =
      std::sin(dlat / 2) * std::sin(dlat / 2) +
      std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double quantile_linear(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<std::string> resolve_scale_targets(const Dataset& dataset,
                                               const PreprocessConfig& config) {
  std::vector<std::string> targets;
  for (const auto& spec : dataset.specs()) {
    if (config.scale_targets.has_value()) {
      if (config.scale_targets->count(spec.name)) targets.push_back(spec.name);
    } else if (!spec.is_percentage && spec.role != VariableRole::outcome) {
      // The outcome stays in its native units; metrics are reported there.
      targets.push_back(spec.name);
    }
  }
  if (config.scale_targets.has_value()) {
    for (const auto& name : *config.scale_targets) {
      dataset.variable_index(name);  // throws UnknownVariable
    }
  }
  return targets;
}

Dataset drop_sparse_counties(const Dataset& dataset,
                             const PreprocessConfig& config,
                             PreprocessReport* report) {
  config.validate();
  std::vector<CountyRecord> kept;
  kept.reserve(dataset.n_records());
  for (const auto& record : dataset.records()) {
    if (dataset.missing_count(record) <= config.max_missing_per_county) {
      kept.push_back(record);
    } else if (report) {
      report->dropped_fips.push_back(record.fips);
    }
  }
  // An empty result is legal; it is visible through the report.
  return dataset.with_records(std::move(kept));
}

Dataset knn_impute(const Dataset& dataset, const PreprocessConfig& config,
                   PreprocessReport* report, unsigned threads) {
  config.validate();
  const auto& records = dataset.records();
  const std::size_t n = records.size();
  const std::size_t k = config.knn_k;

  std::vector<CountyRecord> out(records.begin(), records.end());

  for (std::size_t v = 0; v < dataset.n_variables(); ++v) {
    const bool is_outcome = (v == dataset.outcome_index());
    if (is_outcome && !config.impute_outcome) continue;

    std::vector<std::size_t> missing_rows;
    std::vector<std::size_t> donor_rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (records[i].values[v].has_value()) {
        donor_rows.push_back(i);
      } else {
        missing_rows.push_back(i);
      }
    }
    if (missing_rows.empty()) continue;
    if (donor_rows.size() < k) {
      throw Error(ErrorKind::InsufficientDonors,
                  "variable '" + dataset.specs()[v].name + "' has only " +
                      std::to_string(donor_rows.size()) +
                      " observed counties, need " + std::to_string(k));
    }

    // Each missing cell gets its own slot; the donor search parallelizes,
    // the k-donor mean is always accumulated in (distance, fips) order.
    std::vector<double> imputed(missing_rows.size());
    parallel_for(missing_rows.size(), threads, [&](std::size_t m) {
      const std::size_t row = missing_rows[m];
      const auto& target = records[row];
      std::vector<std::pair<double, std::size_t>> by_distance;
      by_distance.reserve(donor_rows.size());
      for (const std::size_t d : donor_rows) {
        by_distance.emplace_back(
            haversine_km(target.centroid_lat, target.centroid_lon,
                         records[d].centroid_lat, records[d].centroid_lon),
            d);
      }
      std::sort(by_distance.begin(), by_distance.end(),
                [&records](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first < b.first;
                  return records[a.second].fips < records[b.second].fips;
                });
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        sum += *records[by_distance[j].second].values[v];
      }
      imputed[m] = sum / static_cast<double>(k);
    });

    for (std::size_t m = 0; m < missing_rows.size(); ++m) {
      out[missing_rows[m]].values[v] = imputed[m];
    }
    if (report) {
      report->imputed_cells[dataset.specs()[v].name] += missing_rows.size();
    }
  }
  return dataset.with_records(std::move(out));
}

Dataset handle_outliers(const Dataset& dataset, const PreprocessConfig& config,
                        PreprocessReport* report) {
  config.validate();
  const auto targets = resolve_scale_targets(dataset, config);
  std::vector<CountyRecord> out(dataset.records().begin(),
                                dataset.records().end());

  for (const auto& name : targets) {
    const std::size_t v = dataset.variable_index(name);
    std::vector<double> values;
    values.reserve(out.size());
    for (const auto& record : out) {
      if (!record.values[v].has_value()) {
        throw Error(ErrorKind::InvalidArgument,
                    "variable '" + name + "' still has missing cells (county " +
                        record.fips + "); run imputation first");
      }
      values.push_back(*record.values[v]);
    }
    if (values.empty()) {
      if (report) report->clamped_cells[name] = 0;
      continue;
    }
    std::sort(values.begin(), values.end());
    const double q1 = quantile_linear(values, 0.25);
    const double q3 = quantile_linear(values, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - config.outlier_iqr_multiplier * iqr;
    const double hi = q3 + config.outlier_iqr_multiplier * iqr;

    std::size_t clamped = 0;
    for (auto& record : out) {
      const double x = *record.values[v];
      if (x < lo) {
        record.values[v] = lo;
        ++clamped;
      } else if (x > hi) {
        record.values[v] = hi;
        ++clamped;
      }
    }
    if (report) report->clamped_cells[name] += clamped;
  }
  return dataset.with_records(std::move(out));
}

ScalingParams fit_scaler(const Dataset& dataset,
                         const std::vector<std::size_t>& fit_rows,
                         const PreprocessConfig& config) {
  config.validate();
  if (fit_rows.empty()) {
    throw Error(ErrorKind::EmptyFitSet, "scaler fit set is empty");
  }
  const auto targets = resolve_scale_targets(dataset, config);
  ScalingParams params;
  for (const auto& name : targets) {
    const std::size_t v = dataset.variable_index(name);
    MinMax mm;
    bool first = true;
    for (const std::size_t row : fit_rows) {
      if (row >= dataset.n_records()) {
        throw Error(ErrorKind::InvalidArgument,
                    "fit row " + std::to_string(row) + " out of range");
      }
      const auto& cell = dataset.records()[row].values[v];
      if (!cell.has_value()) {
        throw Error(ErrorKind::InvalidArgument,
                    "variable '" + name + "' is missing on fit row (county " +
                        dataset.records()[row].fips + ")");
      }
      if (first) {
        mm.min = mm.max = *cell;
        first = false;
      } else {
        mm.min = std::min(mm.min, *cell);
        mm.max = std::max(mm.max, *cell);
      }
    }
    params.by_variable[name] = mm;
  }
  return params;
}

Dataset apply_scaler(const Dataset& dataset, const ScalingParams& params) {
  std::vector<std::size_t> var_indices;
  std::vector<MinMax> ranges;
  for (const auto& [name, mm] : params.by_variable) {
    const auto idx = dataset.find_variable(name);
    if (!idx) {
      throw Error(ErrorKind::MissingParams,
                  "scaling params cover unknown variable '" + name + "'");
    }
    var_indices.push_back(*idx);
    ranges.push_back(mm);
  }
  std::vector<CountyRecord> out(dataset.records().begin(),
                                dataset.records().end());
  for (auto& record : out) {
    for (std::size_t t = 0; t < var_indices.size(); ++t) {
      auto& cell = record.values[var_indices[t]];
      if (!cell.has_value()) continue;
      const double span = ranges[t].max - ranges[t].min;
      cell = span == 0.0 ? 0.0 : (*cell - ranges[t].min) / span;
    }
  }
  return dataset.with_records(std::move(out));
}

}  // namespace countyml
