#ifndef COUNTYML_SPATIAL_HPP
#define COUNTYML_SPATIAL_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "countyml/dataset.hpp"

namespace countyml {

struct WeightsScheme {
  enum class Kind { k_nearest, distance_band };
  Kind kind = Kind::k_nearest;
  std::size_t k = 8;
  double d_km = 0;

  static WeightsScheme k_nearest(std::size_t k) {
    return {Kind::k_nearest, k, 0};
  }
  static WeightsScheme distance_band(double d_km) {
    return {Kind::distance_band, 0, d_km};
  }
};

// Per-county neighbor lists with positive weights. include_self is forced
// true (each county appears in its own list with weight 1), which is what
// distinguishes Gi* from Gi.
struct SpatialWeights {
  WeightsScheme scheme;
  bool include_self = true;
  // (county index, weight), sorted by county index; no duplicates.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> neighbors;
  // Counties a distance band left with no neighbor but themselves
  // (warning-level; the county is retained).
  std::vector<std::string> isolated_fips;
};

SpatialWeights build_weights(const Dataset& dataset,
                             const WeightsScheme& scheme);

// Getis-Ord Gi* z-score per county:
//
//   z_i = [sum_j w_ij x_j - xbar * W_i]
//         / (S * sqrt[(n * sum_j w_ij^2 - W_i^2) / (n - 1)])
//
// with W_i = sum_j w_ij, xbar the global mean, S the population standard
// deviation, and every sum running over all j including i. A constant field
// (S = 0) or a degenerate variance term yields z_i = 0 rather than an error.
std::vector<double> gi_star(const std::vector<double>& values,
                            const SpatialWeights& weights,
                            unsigned threads = 1);

enum class HotspotClass {
  coldspot_99,
  coldspot_95,
  coldspot_90,
  not_significant,
  hotspot_90,
  hotspot_95,
  hotspot_99,
};

const char* to_string(HotspotClass cls);

// Two-tailed standard normal cutoffs: 1.645 / 1.960 / 2.576.
HotspotClass classify_z(double z);

struct HotspotResult {
  std::vector<double> gi_z;
  std::vector<HotspotClass> classes;
};

HotspotResult classify_hotspots(const std::vector<double>& z);

// GeoJSON FeatureCollection of county-centroid Points with properties
// {fips, value, gi_z, class}; coordinates in [lon, lat] order.
void export_hotspots_geojson(const HotspotResult& result,
                             const Dataset& dataset,
                             const std::vector<double>& values,
                             const std::filesystem::path& path);

// Flat companion table: fips,value,gi_z,class.
void export_hotspots_csv(const HotspotResult& result, const Dataset& dataset,
                         const std::vector<double>& values,
                         const std::filesystem::path& path);

}  // namespace countyml

#endif  // COUNTYML_SPATIAL_HPP
