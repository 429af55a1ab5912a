#include "countyml/synth.hpp"

#include <algorithm>
#include <cmath>

#include "countyml/error.hpp"
#include "countyml/rng.hpp"

namespace countyml {

namespace {

double clamp(double x, double lo, double hi) {
  return std::min(hi, std::max(lo, x));
}

std::string synth_fips(std::size_t index) {
  std::string digits = std::to_string(index + 1);
  if (digits.size() < 5) digits.insert(digits.begin(), 5 - digits.size(), '0');
  return digits;
}

}  // namespace

Dataset make_synthetic_dataset(const SynthConfig& config) {
  if (config.n < 2) {
    throw Error(ErrorKind::InvalidArgument,
                "synthetic dataset needs at least 2 counties");
  }
  if (config.n > 99999) {
    throw Error(ErrorKind::InvalidArgument,
                "synthetic fips codes support at most 99999 counties");
  }
  const auto schema = default_schema();
  const std::size_t n_vars = schema.size();

  const StreamRng base = StreamRng::from_seed(config.seed);
  const StreamRng feature_base = base.derive(0x53594e5448ULL);  // "SYNTH"
  const StreamRng missing_base = base.derive(0x4d495353ULL);    // "MISS"

  // Rows flagged sparse get more than five predictors knocked out.
  std::vector<bool> sparse(config.n, false);
  {
    StreamRng picker = base.derive(0x53504152ULL);  // "SPAR"
    std::size_t placed = 0;
    while (placed < std::min(config.sparse_counties, config.n / 4)) {
      const auto row = static_cast<std::size_t>(picker.below(config.n));
      if (!sparse[row]) {
        sparse[row] = true;
        ++placed;
      }
    }
  }

  std::vector<CountyRecord> records;
  records.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    StreamRng rng = feature_base.derive(i);
    CountyRecord record;
    record.fips = synth_fips(i);
    record.name = "County " + record.fips;
    record.state = "Z" + std::string(1, static_cast<char>('A' + i % 26));
    record.centroid_lon = rng.uniform(-124.0, -67.0);
    record.centroid_lat = rng.uniform(25.5, 49.0);

    const double lon = record.centroid_lon;
    const double lat = record.centroid_lat;
    // Smoking clusters in a mid-eastern bump, pollution drifts eastward.
    const double bump =
        std::exp(-((lon + 85.0) * (lon + 85.0) + (lat - 38.0) * (lat - 38.0)) /
                 (2.0 * 6.0 * 6.0));
    const double east = clamp((lon + 95.0) / 30.0, -1.0, 1.0);

    const double rural = clamp(55.0 + 25.0 * rng.normal(), 0.0, 100.0);
    const double age65 = clamp(18.0 + 4.5 * rng.normal(), 4.0, 40.0);
    const double black =
        clamp(35.0 * std::pow(rng.next_unit(), 2.5), 0.0, 90.0);
    const double hispanic =
        clamp(45.0 * std::pow(rng.next_unit(), 2.2), 0.0, 96.0);
    const double education = clamp(22.0 + 9.0 * rng.normal(), 5.0, 75.0);
    const double poverty = clamp(15.0 + 6.0 * rng.normal(), 2.5, 50.0);
    const double home_value =
        clamp(150000.0 * std::exp(0.45 * rng.normal()), 40000.0, 900000.0);
    const double pcp = clamp(0.55 + 0.35 * std::abs(rng.normal()), 0.05, 4.0);
    const double pm25 =
        clamp(7.5 + 1.8 * rng.normal() + 1.2 * east, 2.5, 16.0);
    const double ehi = clamp(50.0 + 18.0 * rng.normal(), 0.0, 100.0);
    const double density =
        clamp(90.0 * std::exp(1.3 * rng.normal()), 0.3, 40000.0);
    const double walkability = clamp(9.0 + 3.0 * rng.normal(), 1.0, 20.0);
    const double smokers =
        clamp(17.0 + 4.0 * rng.normal() + 7.0 * bump, 6.0, 42.0);

    // Standardized drivers (nominal centers, not sample moments, so the
    // generating function is identical for every n and seed).
    const double sn = (smokers - 19.0) / 5.0;
    const double hv = (std::log(home_value) - std::log(150000.0)) / 0.45;
    const double hi = (hispanic - 15.0) / 15.0;
    const double pm = (pm25 - 7.5) / 2.0;
    const double pv = (poverty - 15.0) / 6.0;
    const double ed = (education - 22.0) / 9.0;
    const double dn = (std::log(density) - std::log(90.0)) / 1.3;

    // The smokers-rate effect dominates through its linear, quadratic and
    // interaction parts. The products, the curvature and the density band
    // are invisible to a linear fit but easy for trees, which is what
    // separates the learners on this benchmark.
    double mu = 65.0;
    mu += 10.0 * sn;
    mu += 3.0 * (sn * sn - 0.7);
    mu += 8.0 * sn * pm;
    mu += 5.0 * hv * ed;
    mu += -5.0 * hv;
    mu += -4.0 * hi;
    mu += 4.0 * (std::abs(dn) < 0.6 ? 1.0 : 0.0);
    mu += -3.0 * ed;
    mu += 2.0 * pm;
    mu += 1.5 * pv;
    mu += 0.8 * (age65 - 18.0) / 4.5;
    mu += 0.5 * (rural - 55.0) / 25.0;
    const double mortality =
        std::max(3.0, mu + config.noise_sd * rng.normal());

    record.values.resize(n_vars);
    auto set = [&](const char* name, double value) {
      for (std::size_t v = 0; v < n_vars; ++v) {
        if (schema[v].name == name) {
          record.values[v] = value;
          return;
        }
      }
    };
    set("lung_cancer_mortality", mortality);
    set("rural_population", rural);
    set("age_65_and_older", age65);
    set("ethnicity_black", black);
    set("ethnicity_hispanic", hispanic);
    set("higher_education", education);
    set("poverty_rate", poverty);
    set("home_value", home_value);
    set("primary_care_physicians", pcp);
    set("pm25_air_pollution", pm25);
    set("environmental_health_index", ehi);
    set("population_density", density);
    set("walkability_index", walkability);
    set("smokers_rate", smokers);

    // Missingness: a light sprinkle everywhere, a heavy dose on sparse rows.
    StreamRng miss = missing_base.derive(i);
    for (std::size_t v = 0; v < n_vars; ++v) {
      const bool is_outcome = schema[v].role == VariableRole::outcome;
      const double rate = is_outcome ? config.outcome_missing_rate
                                     : config.predictor_missing_rate;
      if (miss.next_unit() < rate) record.values[v] = std::nullopt;
    }
    if (sparse[i]) {
      StreamRng knock = missing_base.derive(i).derive(1);
      std::vector<std::size_t> slots;
      for (std::size_t v = 0; v < n_vars; ++v) {
        if (schema[v].role != VariableRole::outcome) slots.push_back(v);
      }
      knock.shuffle(slots);
      for (std::size_t j = 0; j < 7; ++j) record.values[slots[j]] = std::nullopt;
    }
    records.push_back(std::move(record));
  }

  return Dataset(schema, std::move(records),
                 "synthetic benchmark, seed " + std::to_string(config.seed));
}

}  // namespace countyml
