#include "countyml/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "countyml/csv.hpp"
#include "countyml/error.hpp"
#include "json.hpp"

namespace countyml {

const char* to_string(UnitClass unit) {
  switch (unit) {
    case UnitClass::percent: return "percent";
    case UnitClass::dollars: return "dollars";
    case UnitClass::per_1000: return "per_1000";
    case UnitClass::micrograms_per_m3: return "micrograms_per_m3";
    case UnitClass::index: return "index";
    case UnitClass::per_sq_mile: return "per_sq_mile";
  }
  return "unknown";
}

const char* to_string(VariableRole role) {
  return role == VariableRole::outcome ? "outcome" : "predictor";
}

UnitClass unit_class_from_string(const std::string& text) {
  if (text == "percent") return UnitClass::percent;
  if (text == "dollars") return UnitClass::dollars;
  if (text == "per_1000") return UnitClass::per_1000;
  if (text == "micrograms_per_m3") return UnitClass::micrograms_per_m3;
  if (text == "index") return UnitClass::index;
  if (text == "per_sq_mile") return UnitClass::per_sq_mile;
  throw Error(ErrorKind::ConfigError, "unknown unit_class '" + text + "'");
}

VariableRole role_from_string(const std::string& text) {
  if (text == "predictor") return VariableRole::predictor;
  if (text == "outcome") return VariableRole::outcome;
  throw Error(ErrorKind::ConfigError, "unknown role '" + text + "'");
}

void validate_schema(const std::vector<VariableSpec>& schema) {
  if (schema.empty()) {
    throw Error(ErrorKind::ConfigError, "schema has no variables");
  }
  std::set<std::string> seen;
  std::size_t outcomes = 0;
  for (const auto& spec : schema) {
    if (spec.name.empty()) {
      throw Error(ErrorKind::ConfigError, "schema variable with empty name");
    }
    if (!seen.insert(spec.name).second) {
      throw Error(ErrorKind::ConfigError,
                  "duplicate schema variable '" + spec.name + "'");
    }
    if (spec.is_percentage != (spec.unit_class == UnitClass::percent)) {
      throw Error(ErrorKind::ConfigError,
                  "variable '" + spec.name +
                      "': is_percentage must hold exactly when unit_class is "
                      "percent");
    }
    if (spec.role == VariableRole::outcome) ++outcomes;
  }
  if (outcomes != 1) {
    throw Error(ErrorKind::ConfigError,
                "schema must declare exactly one outcome variable, found " +
                    std::to_string(outcomes));
  }
}

std::string canonical_fips(const std::string& raw) {
  std::string fips = csv::trim(raw);
  const bool all_digits =
      !fips.empty() && std::all_of(fips.begin(), fips.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      });
  if (all_digits && fips.size() < 5) {
    fips.insert(fips.begin(), 5 - fips.size(), '0');
  }
  if (fips.size() != 5) {
    throw Error(ErrorKind::ParseError,
                "fips '" + raw + "' is not a 5-character county code");
  }
  return fips;
}

Dataset::Dataset(std::vector<VariableSpec> specs,
                 std::vector<CountyRecord> records, std::string provenance)
    : specs_(std::move(specs)),
      records_(std::move(records)),
      provenance_(std::move(provenance)) {
  // An empty record list is representable (filters may drop everything);
  // ingestion rejects it separately.
  validate_schema(specs_);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    index_by_name_[specs_[i].name] = i;
    if (specs_[i].role == VariableRole::outcome) outcome_index_ = i;
  }
  std::set<std::string> fips_seen;
  for (const auto& record : records_) {
    if (record.fips.size() != 5) {
      throw Error(ErrorKind::ParseError,
                  "county '" + record.fips + "' has a malformed fips code");
    }
    if (!fips_seen.insert(record.fips).second) {
      throw Error(ErrorKind::DuplicateFips,
                  "fips " + record.fips + " appears more than once");
    }
    if (record.values.size() != specs_.size()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "county " + record.fips + " has " +
                      std::to_string(record.values.size()) +
                      " values, schema has " + std::to_string(specs_.size()));
    }
    if (!(record.centroid_lat >= -90.0 && record.centroid_lat <= 90.0) ||
        !(record.centroid_lon >= -180.0 && record.centroid_lon <= 180.0)) {
      throw Error(ErrorKind::ParseError,
                  "county " + record.fips + " centroid out of range");
    }
    for (std::size_t v = 0; v < specs_.size(); ++v) {
      const auto& cell = record.values[v];
      if (!cell.has_value()) continue;
      if (!std::isfinite(*cell)) {
        throw Error(ErrorKind::ParseError,
                    "county " + record.fips + " variable '" + specs_[v].name +
                        "' is not finite");
      }
      if (specs_[v].is_percentage && (*cell < 0.0 || *cell > 100.0)) {
        throw Error(ErrorKind::ParseError,
                    "county " + record.fips + " variable '" + specs_[v].name +
                        "' = " + csv::format_double(*cell) +
                        " outside [0, 100]");
      }
    }
  }
}

std::size_t Dataset::variable_index(const std::string& name) const {
  const auto it = index_by_name_.find(name);
  if (it == index_by_name_.end()) {
    throw Error(ErrorKind::UnknownVariable, "no variable named '" + name + "'");
  }
  return it->second;
}

std::optional<std::size_t> Dataset::find_variable(
    const std::string& name) const {
  const auto it = index_by_name_.find(name);
  if (it == index_by_name_.end()) return std::nullopt;
  return it->second;
}

std::size_t Dataset::missing_count(const CountyRecord& record) const {
  std::size_t count = 0;
  for (const auto& cell : record.values) {
    if (!cell.has_value()) ++count;
  }
  return count;
}

std::vector<std::size_t> Dataset::rows_with_observed_outcome() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].values[outcome_index_].has_value()) rows.push_back(i);
  }
  return rows;
}

Dataset Dataset::with_records(std::vector<CountyRecord> records) const {
  return Dataset(specs_, std::move(records), provenance_);
}

VariableSummary summarize(const Dataset& dataset, const std::string& variable) {
  const std::size_t v = dataset.variable_index(variable);
  VariableSummary summary;
  double sum = 0.0;
  for (const auto& record : dataset.records()) {
    const auto& cell = record.values[v];
    if (!cell.has_value()) continue;
    ++summary.n_nonmissing;
    sum += *cell;
    summary.min = summary.min ? std::min(*summary.min, *cell) : *cell;
    summary.max = summary.max ? std::max(*summary.max, *cell) : *cell;
  }
  if (summary.n_nonmissing == 0) return summary;
  const double mean = sum / static_cast<double>(summary.n_nonmissing);
  summary.mean = mean;
  if (summary.n_nonmissing >= 2) {
    double ss = 0.0;
    for (const auto& record : dataset.records()) {
      const auto& cell = record.values[v];
      if (!cell.has_value()) continue;
      ss += (*cell - mean) * (*cell - mean);
    }
    summary.sd = std::sqrt(ss / static_cast<double>(summary.n_nonmissing - 1));
  }
  return summary;
}

Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& centroids_path,
                     const std::vector<VariableSpec>& schema) {
  validate_schema(schema);
  const csv::Table features = csv::read_file(features_path);
  const csv::Table centroids = csv::read_file(centroids_path);

  const auto fips_col = features.column("fips");
  if (!fips_col) {
    throw Error(ErrorKind::MissingColumn,
                features_path.string() + ": no 'fips' column");
  }
  std::vector<std::size_t> var_cols(schema.size());
  for (std::size_t v = 0; v < schema.size(); ++v) {
    const auto col = features.column(schema[v].name);
    if (!col) {
      throw Error(ErrorKind::MissingColumn,
                  features_path.string() + ": no column for schema variable '" +
                      schema[v].name + "'");
    }
    var_cols[v] = *col;
  }
  const auto name_col = features.column("name");
  const auto state_col = features.column("state");

  for (const char* required : {"fips", "lat", "lon"}) {
    if (!centroids.column(required)) {
      throw Error(ErrorKind::MissingColumn, centroids_path.string() +
                                                ": no '" + required +
                                                "' column");
    }
  }
  const std::size_t c_fips = *centroids.column("fips");
  const std::size_t c_lat = *centroids.column("lat");
  const std::size_t c_lon = *centroids.column("lon");

  std::unordered_map<std::string, std::pair<double, double>> centroid_by_fips;
  for (std::size_t r = 0; r < centroids.rows.size(); ++r) {
    const auto& row = centroids.rows[r];
    const std::string fips = canonical_fips(row[c_fips]);
    const auto lat = csv::parse_double(row[c_lat]);
    const auto lon = csv::parse_double(row[c_lon]);
    if (!lat || !lon) {
      throw Error(ErrorKind::ParseError,
                  centroids_path.string() + " row " + std::to_string(r + 2) +
                      " (fips " + fips + "): unparseable lat/lon");
    }
    if (!centroid_by_fips.emplace(fips, std::make_pair(*lat, *lon)).second) {
      throw Error(ErrorKind::DuplicateFips, centroids_path.string() +
                                                ": fips " + fips +
                                                " appears more than once");
    }
  }

  std::vector<CountyRecord> records;
  records.reserve(features.rows.size());
  for (std::size_t r = 0; r < features.rows.size(); ++r) {
    const auto& row = features.rows[r];
    CountyRecord record;
    record.fips = canonical_fips(row[*fips_col]);
    if (name_col) record.name = row[*name_col];
    if (state_col) record.state = row[*state_col];

    const auto centroid = centroid_by_fips.find(record.fips);
    if (centroid == centroid_by_fips.end()) {
      throw Error(ErrorKind::UnjoinedCounty,
                  features_path.string() + " row " + std::to_string(r + 2) +
                      ": fips " + record.fips + " has no centroid");
    }
    record.centroid_lat = centroid->second.first;
    record.centroid_lon = centroid->second.second;

    record.values.resize(schema.size());
    for (std::size_t v = 0; v < schema.size(); ++v) {
      const std::string& cell = row[var_cols[v]];
      if (csv::is_missing_token(cell)) continue;
      const auto value = csv::parse_double(cell);
      if (!value) {
        throw Error(ErrorKind::ParseError,
                    features_path.string() + " row " + std::to_string(r + 2) +
                        " column '" + schema[v].name + "': cannot parse '" +
                        cell + "'");
      }
      record.values[v] = *value;
    }
    records.push_back(std::move(record));
  }
  if (records.empty()) {
    throw Error(ErrorKind::EmptyDataset,
                features_path.string() + " has no data rows");
  }

  return Dataset(schema, std::move(records),
                 "loaded from " + features_path.string() + " + " +
                     centroids_path.string());
}

void save_dataset(const Dataset& dataset,
                  const std::filesystem::path& features_path,
                  const std::filesystem::path& centroids_path) {
  csv::Table features;
  features.header = {"fips", "name", "state"};
  for (const auto& spec : dataset.specs()) features.header.push_back(spec.name);
  for (const auto& record : dataset.records()) {
    std::vector<std::string> row = {record.fips, record.name, record.state};
    for (const auto& cell : record.values) {
      row.push_back(cell ? csv::format_double(*cell) : std::string());
    }
    features.rows.push_back(std::move(row));
  }
  csv::write_file(features_path, features);

  csv::Table centroids;
  centroids.header = {"fips", "lat", "lon"};
  for (const auto& record : dataset.records()) {
    centroids.rows.push_back({record.fips,
                              csv::format_double(record.centroid_lat),
                              csv::format_double(record.centroid_lon)});
  }
  csv::write_file(centroids_path, centroids);
}

std::vector<VariableSpec> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorKind::ConfigError,
                path.string() + ": schema must be a JSON array");
  }
  std::vector<VariableSpec> schema;
  for (const auto& item : doc) {
    VariableSpec spec;
    spec.name = item.at("name").get<std::string>();
    spec.unit_class = unit_class_from_string(item.at("unit_class"));
    spec.is_percentage = item.at("is_percentage").get<bool>();
    spec.role = role_from_string(item.at("role"));
    schema.push_back(std::move(spec));
  }
  validate_schema(schema);
  return schema;
}

void save_schema(const std::vector<VariableSpec>& schema,
                 const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& spec : schema) {
    doc.push_back({{"name", spec.name},
                   {"unit_class", to_string(spec.unit_class)},
                   {"is_percentage", spec.is_percentage},
                   {"role", to_string(spec.role)}});
  }
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
}

std::vector<VariableSpec> default_schema() {
  auto percent = [](std::string name, VariableRole role) {
    return VariableSpec{std::move(name), UnitClass::percent, true, role};
  };
  return {
      // Deaths per 100,000 can exceed 100, so the outcome is not
      // percent-class even though it is a rate.
      VariableSpec{"lung_cancer_mortality", UnitClass::index, false,
                   VariableRole::outcome},
      percent("rural_population", VariableRole::predictor),
      percent("age_65_and_older", VariableRole::predictor),
      percent("ethnicity_black", VariableRole::predictor),
      percent("ethnicity_hispanic", VariableRole::predictor),
      percent("higher_education", VariableRole::predictor),
      percent("poverty_rate", VariableRole::predictor),
      VariableSpec{"home_value", UnitClass::dollars, false,
                   VariableRole::predictor},
      VariableSpec{"primary_care_physicians", UnitClass::per_1000, false,
                   VariableRole::predictor},
      VariableSpec{"pm25_air_pollution", UnitClass::micrograms_per_m3, false,
                   VariableRole::predictor},
      percent("environmental_health_index", VariableRole::predictor),
      VariableSpec{"population_density", UnitClass::per_sq_mile, false,
                   VariableRole::predictor},
      VariableSpec{"walkability_index", UnitClass::index, false,
                   VariableRole::predictor},
      percent("smokers_rate", VariableRole::predictor),
  };
}

}  // namespace countyml
