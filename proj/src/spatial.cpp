#include "countyml/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "countyml/csv.hpp"
#include "countyml/error.hpp"
#include "countyml/parallel.hpp"
#include "countyml/preprocess.hpp"
#include "json.hpp"

namespace countyml {

SpatialWeights build_weights(const Dataset& dataset,
                             const WeightsScheme& scheme) {
  const auto& records = dataset.records();
  const std::size_t n = records.size();

  if (scheme.kind == WeightsScheme::Kind::k_nearest) {
    if (scheme.k < 1 || scheme.k >= n) {
      throw Error(ErrorKind::InvalidArgument,
                  "k_nearest requires 1 <= k < n; got k = " +
                      std::to_string(scheme.k) + " with n = " +
                      std::to_string(n));
    }
  } else if (!(scheme.d_km > 0)) {
    throw Error(ErrorKind::InvalidArgument,
                "distance_band requires a positive distance");
  }

  SpatialWeights weights;
  weights.scheme = scheme;
  weights.include_self = true;
  weights.neighbors.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> chosen;
    if (scheme.kind == WeightsScheme::Kind::k_nearest) {
      std::vector<std::pair<double, std::uint32_t>> others;
      others.reserve(n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        others.emplace_back(
            haversine_km(records[i].centroid_lat, records[i].centroid_lon,
                         records[j].centroid_lat, records[j].centroid_lon),
            static_cast<std::uint32_t>(j));
      }
      std::sort(others.begin(), others.end(),
                [&records](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first < b.first;
                  return records[a.second].fips < records[b.second].fips;
                });
      for (std::size_t r = 0; r < scheme.k; ++r) {
        chosen.push_back(others[r].second);
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d =
            haversine_km(records[i].centroid_lat, records[i].centroid_lon,
                         records[j].centroid_lat, records[j].centroid_lon);
        if (d <= scheme.d_km) chosen.push_back(static_cast<std::uint32_t>(j));
      }
      if (chosen.empty()) weights.isolated_fips.push_back(records[i].fips);
    }

    chosen.push_back(static_cast<std::uint32_t>(i));  // Gi* self-inclusion
    std::sort(chosen.begin(), chosen.end());
    auto& list = weights.neighbors[i];
    list.reserve(chosen.size());
    for (const auto idx : chosen) list.emplace_back(idx, 1.0);
  }
  return weights;
}

std::vector<double> gi_star(const std::vector<double>& values,
                            const SpatialWeights& weights, unsigned threads) {
  const std::size_t n = values.size();
  if (weights.neighbors.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "weights cover " + std::to_string(weights.neighbors.size()) +
                    " counties, values " + std::to_string(n));
  }
  if (n < 2) {
    throw Error(ErrorKind::InvalidArgument, "gi_star needs at least 2 counties");
  }
  for (const double x : values) {
    if (!std::isfinite(x)) {
      throw Error(ErrorKind::InvalidArgument,
                  "gi_star requires fully observed finite values");
    }
  }

  std::vector<double> z(n, 0.0);
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  if (*min_it == *max_it) return z;  // constant field: S = 0, all z = 0

  double sum = 0.0;
  for (const double x : values) sum += x;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const double x : values) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd == 0.0) return z;

  parallel_for(n, threads, [&](std::size_t i) {
    double w_sum = 0.0;
    double w_sq_sum = 0.0;
    double wx = 0.0;
    for (const auto& [j, w] : weights.neighbors[i]) {
      w_sum += w;
      w_sq_sum += w * w;
      wx += w * values[j];
    }
    const double variance_term =
        (static_cast<double>(n) * w_sq_sum - w_sum * w_sum) /
        static_cast<double>(n - 1);
    if (variance_term <= 0.0) {
      z[i] = 0.0;
      return;
    }
    z[i] = (wx - mean * w_sum) / (sd * std::sqrt(variance_term));
  });
  return z;
}

const char* to_string(HotspotClass cls) {
  switch (cls) {
    case HotspotClass::coldspot_99: return "coldspot_99";
    case HotspotClass::coldspot_95: return "coldspot_95";
    case HotspotClass::coldspot_90: return "coldspot_90";
    case HotspotClass::not_significant: return "not_significant";
    case HotspotClass::hotspot_90: return "hotspot_90";
    case HotspotClass::hotspot_95: return "hotspot_95";
    case HotspotClass::hotspot_99: return "hotspot_99";
  }
  return "not_significant";
}

HotspotClass classify_z(double z) {
  if (z >= 2.576) return HotspotClass::hotspot_99;
  if (z >= 1.960) return HotspotClass::hotspot_95;
  if (z >= 1.645) return HotspotClass::hotspot_90;
  if (z <= -2.576) return HotspotClass::coldspot_99;
  if (z <= -1.960) return HotspotClass::coldspot_95;
  if (z <= -1.645) return HotspotClass::coldspot_90;
  return HotspotClass::not_significant;
}

HotspotResult classify_hotspots(const std::vector<double>& z) {
  HotspotResult result;
  result.gi_z = z;
  result.classes.reserve(z.size());
  for (const double value : z) result.classes.push_back(classify_z(value));
  return result;
}

namespace {

void check_export_sizes(const HotspotResult& result, const Dataset& dataset,
                        const std::vector<double>& values) {
  if (result.gi_z.size() != dataset.n_records() ||
      result.classes.size() != dataset.n_records() ||
      values.size() != dataset.n_records()) {
    throw Error(ErrorKind::DimensionMismatch,
                "hotspot export: result, dataset and values disagree on size");
  }
}

}  // namespace

void export_hotspots_geojson(const HotspotResult& result,
                             const Dataset& dataset,
                             const std::vector<double>& values,
                             const std::filesystem::path& path) {
  check_export_sizes(result, dataset, values);
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.n_records(); ++i) {
    const auto& record = dataset.records()[i];
    features.push_back(
        {{"type", "Feature"},
         {"geometry",
          {{"type", "Point"},
           {"coordinates", {record.centroid_lon, record.centroid_lat}}}},
         {"properties",
          {{"fips", record.fips},
           {"value", values[i]},
           {"gi_z", result.gi_z[i]},
           {"class", to_string(result.classes[i])}}}});
  }
  const nlohmann::json doc = {{"type", "FeatureCollection"},
                              {"features", features}};
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw Error(ErrorKind::IoError, "write failed for " + path.string());
  }
}

void export_hotspots_csv(const HotspotResult& result, const Dataset& dataset,
                         const std::vector<double>& values,
                         const std::filesystem::path& path) {
  check_export_sizes(result, dataset, values);
  csv::Table table;
  table.header = {"fips", "value", "gi_z", "class"};
  for (std::size_t i = 0; i < dataset.n_records(); ++i) {
    table.rows.push_back({dataset.records()[i].fips,
                          csv::format_double(values[i]),
                          csv::format_double(result.gi_z[i]),
                          to_string(result.classes[i])});
  }
  csv::write_file(path, table);
}

}  // namespace countyml
