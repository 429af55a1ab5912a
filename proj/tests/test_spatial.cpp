#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "countyml/error.hpp"
#include "countyml/spatial.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace countyml;
using testsupport::fips_of;

namespace {

// Counties on the equator at the requested eastward offsets.
Dataset collinear_counties(const std::vector<double>& km_offsets) {
  const double km_per_deg = 111.19492664455873;  // pi * 6371 / 180
  auto schema = testsupport::small_schema(0);
  std::vector<CountyRecord> records;
  for (std::size_t i = 0; i < km_offsets.size(); ++i) {
    CountyRecord r;
    r.fips = fips_of(i);
    r.centroid_lat = 0.0;
    r.centroid_lon = km_offsets[i] / km_per_deg;
    r.values = {1.0};
    records.push_back(r);
  }
  return Dataset(schema, records, "toy");
}

std::set<std::uint32_t> neighbor_set(const SpatialWeights& w, std::size_t i) {
  std::set<std::uint32_t> out;
  for (const auto& [j, weight] : w.neighbors[i]) out.insert(j);
  return out;
}

}  // namespace

TEST_CASE("build_weights k_nearest") {
  SUBCASE("collinear counties at 0, 100, 300 km") {
    const Dataset d = collinear_counties({0, 100, 300});
    const SpatialWeights w = build_weights(d, WeightsScheme::k_nearest(1));
    // Middle county: 100 km to the west one, 200 km to the east one.
    CHECK(neighbor_set(w, 1) == std::set<std::uint32_t>{0, 1});
    CHECK(neighbor_set(w, 0) == std::set<std::uint32_t>{0, 1});
    CHECK(neighbor_set(w, 2) == std::set<std::uint32_t>{1, 2});
    for (const auto& list : w.neighbors) {
      CHECK(list.size() == 2);  // k + self
      for (const auto& [j, weight] : list) CHECK(weight == 1.0);
    }
  }
  SUBCASE("k = n - 1 gives the complete graph plus self") {
    const Dataset d = collinear_counties({0, 50, 120, 400});
    const SpatialWeights w = build_weights(d, WeightsScheme::k_nearest(3));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(neighbor_set(w, i) == std::set<std::uint32_t>{0, 1, 2, 3});
    }
  }
  SUBCASE("k out of range") {
    const Dataset d = collinear_counties({0, 100});
    CHECK_THROWS_AS(build_weights(d, WeightsScheme::k_nearest(2)), Error);
    CHECK_THROWS_AS(build_weights(d, WeightsScheme::k_nearest(0)), Error);
  }
  SUBCASE("neighbor fips sets are invariant under record permutation") {
    StreamRng rng = StreamRng::from_seed(71);
    const Dataset d = testsupport::random_dataset(25, 1, 0.0, rng);
    auto shuffled_records = d.records();
    StreamRng shuffler = StreamRng::from_seed(72);
    shuffler.shuffle(shuffled_records);
    const Dataset shuffled = d.with_records(shuffled_records);

    auto fips_neighbors = [](const Dataset& ds, const SpatialWeights& w,
                             const std::string& fips) {
      std::set<std::string> out;
      for (std::size_t i = 0; i < ds.n_records(); ++i) {
        if (ds.records()[i].fips != fips) continue;
        for (const auto& [j, weight] : w.neighbors[i]) {
          out.insert(ds.records()[j].fips);
        }
      }
      return out;
    };
    const auto w1 = build_weights(d, WeightsScheme::k_nearest(4));
    const auto w2 = build_weights(shuffled, WeightsScheme::k_nearest(4));
    for (const auto& record : d.records()) {
      CHECK(fips_neighbors(d, w1, record.fips) ==
            fips_neighbors(shuffled, w2, record.fips));
    }
  }
}

TEST_CASE("build_weights distance_band") {
  const Dataset d = collinear_counties({0, 100, 300});
  SUBCASE("band below the smallest gap isolates everyone") {
    const SpatialWeights w = build_weights(d, WeightsScheme::distance_band(50));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(neighbor_set(w, i) == std::set<std::uint32_t>{static_cast<std::uint32_t>(i)});
    }
    CHECK(w.isolated_fips.size() == 3);
  }
  SUBCASE("band of 150 km connects the near pair only") {
    const SpatialWeights w =
        build_weights(d, WeightsScheme::distance_band(150));
    CHECK(neighbor_set(w, 0) == std::set<std::uint32_t>{0, 1});
    CHECK(neighbor_set(w, 1) == std::set<std::uint32_t>{0, 1});
    CHECK(neighbor_set(w, 2) == std::set<std::uint32_t>{2});
    CHECK(w.isolated_fips == std::vector<std::string>{fips_of(2)});
  }
}

TEST_CASE("gi_star") {
  SUBCASE("constant field yields all zeros") {
    const Dataset d = collinear_counties({0, 80, 160, 240});
    const auto w = build_weights(d, WeightsScheme::k_nearest(2));
    const auto z = gi_star({5.5, 5.5, 5.5, 5.5}, w);
    for (const double zi : z) CHECK(zi == 0.0);
  }
  SUBCASE("four-county instance matches a hand evaluation") {
    // Counties 0-1 adjacent, 2-3 adjacent, pairs far apart; k = 1.
    const Dataset d = collinear_counties({0, 10, 1000, 1010});
    const auto w = build_weights(d, WeightsScheme::k_nearest(1));
    const std::vector<double> x = {10.0, 12.0, 1.0, 3.0};
    // By hand: n = 4, mean = 6.5, S = sqrt((100+144+1+9)/4 - 42.25)
    //        = sqrt(21.25); every W_i = 2, S1_i = 2, bracket = (8-4)/3.
    const double s = std::sqrt(21.25);
    const double denom = s * std::sqrt(4.0 / 3.0);
    const std::vector<double> expected = {
        (22.0 - 13.0) / denom, (22.0 - 13.0) / denom,
        (4.0 - 13.0) / denom, (4.0 - 13.0) / denom};
    const auto z = gi_star(x, w);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(z[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
  }
  SUBCASE("matches the dense-matrix oracle on random configurations") {
    StreamRng rng = StreamRng::from_seed(81);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 5 + static_cast<std::size_t>(rng.below(30));
      const Dataset d = testsupport::random_dataset(n, 1, 0.0, rng);
      const bool knn = rng.next_unit() < 0.5;
      const WeightsScheme scheme =
          knn ? WeightsScheme::k_nearest(
                    1 + static_cast<std::size_t>(rng.below(n - 1)))
              : WeightsScheme::distance_band(rng.uniform(50.0, 2500.0));
      const auto w = build_weights(d, scheme);
      std::vector<double> x(n);
      for (auto& v : x) v = rng.uniform(-20.0, 20.0);

      const auto got = gi_star(x, w);
      const auto expected = testsupport::gi_star_oracle(x, w);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(got[i] ==
              doctest::Approx(expected[i]).epsilon(1e-12).scale(1.0));
      }
    }
  }
  SUBCASE("shift and scale leave z unchanged") {
    StreamRng rng = StreamRng::from_seed(91);
    const std::size_t n = 20;
    const Dataset d = testsupport::random_dataset(n, 1, 0.0, rng);
    const auto w = build_weights(d, WeightsScheme::k_nearest(5));
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(0.0, 50.0);
    const auto base = gi_star(x, w);
    std::vector<double> transformed = x;
    for (auto& v : transformed) v = 3.75 * v + 211.0;
    const auto shifted = gi_star(transformed, w);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(shifted[i] == doctest::Approx(base[i]).epsilon(1e-9));
    }
  }
  SUBCASE("size mismatch") {
    const Dataset d = collinear_counties({0, 100, 200});
    const auto w = build_weights(d, WeightsScheme::k_nearest(1));
    CHECK_THROWS_AS(gi_star({1.0, 2.0}, w), Error);
  }
}

TEST_CASE("classify_hotspots") {
  CHECK(classify_z(3.0) == HotspotClass::hotspot_99);
  CHECK(classify_z(0.0) == HotspotClass::not_significant);
  CHECK(classify_z(-2.0) == HotspotClass::coldspot_95);
  // Boundaries are inclusive.
  CHECK(classify_z(2.576) == HotspotClass::hotspot_99);
  CHECK(classify_z(1.960) == HotspotClass::hotspot_95);
  CHECK(classify_z(1.645) == HotspotClass::hotspot_90);
  CHECK(classify_z(-1.645) == HotspotClass::coldspot_90);
  CHECK(classify_z(-2.576) == HotspotClass::coldspot_99);

  SUBCASE("exhaustive and monotone over a fine grid") {
    HotspotClass last = HotspotClass::coldspot_99;
    for (int i = -4000; i <= 4000; ++i) {
      const double z = static_cast<double>(i) / 1000.0;
      const HotspotClass cls = classify_z(z);
      CHECK(static_cast<int>(cls) >= static_cast<int>(last));
      last = cls;
    }
    CHECK(last == HotspotClass::hotspot_99);
  }
}

TEST_CASE("hotspot exports") {
  const Dataset d = collinear_counties({0, 100});
  const std::vector<double> values = {4.0, 9.0};
  const HotspotResult result = classify_hotspots({2.7, -0.4});
  const auto dir = std::filesystem::temp_directory_path() / "countyml_spatial";
  std::filesystem::create_directories(dir);

  SUBCASE("geojson structure") {
    const auto path = dir / "hotspots.geojson";
    export_hotspots_geojson(result, d, values, path);
    std::ifstream in(path);
    nlohmann::json doc;
    in >> doc;
    CHECK(doc.at("type") == "FeatureCollection");
    REQUIRE(doc.at("features").size() == 2);
    const auto& feature = doc.at("features")[0];
    CHECK(feature.at("type") == "Feature");
    CHECK(feature.at("geometry").at("type") == "Point");
    // [lon, lat] ordering
    CHECK(feature.at("geometry").at("coordinates")[0].get<double>() ==
          doctest::Approx(d.records()[0].centroid_lon));
    CHECK(feature.at("geometry").at("coordinates")[1].get<double>() ==
          doctest::Approx(d.records()[0].centroid_lat));
    CHECK(feature.at("properties").at("fips") == "00001");
    CHECK(feature.at("properties").at("class") == "hotspot_99");
    CHECK(feature.at("properties").at("value").get<double>() == 4.0);
  }
  SUBCASE("csv companion") {
    const auto path = dir / "hotspots.csv";
    export_hotspots_csv(result, d, values, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "fips,value,gi_z,class");
    std::getline(in, line);
    CHECK(line == "00001,4,2.7,hotspot_99");
  }
  SUBCASE("size mismatch rejected") {
    CHECK_THROWS_AS(
        export_hotspots_csv(result, d, {1.0}, dir / "bad.csv"), Error);
  }
}
