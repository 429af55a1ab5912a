#ifndef COUNTYML_DATASET_HPP
#define COUNTYML_DATASET_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace countyml {

enum class UnitClass {
  percent,
  dollars,
  per_1000,
  micrograms_per_m3,
  index,
  per_sq_mile,
};

enum class VariableRole { predictor, outcome };

const char* to_string(UnitClass unit);
const char* to_string(VariableRole role);
UnitClass unit_class_from_string(const std::string& text);
VariableRole role_from_string(const std::string& text);

struct VariableSpec {
  std::string name;
  UnitClass unit_class = UnitClass::index;
  bool is_percentage = false;
  VariableRole role = VariableRole::predictor;
};

struct CountyRecord {
  std::string fips;   // 5 characters, zero-padded; leading zeros significant
  std::string name;
  std::string state;  // 2-letter code, may be empty when the source omits it
  double centroid_lat = 0;
  double centroid_lon = 0;
  // One slot per Dataset variable, in schema order; nullopt = missing.
  std::vector<std::optional<double>> values;
};

// Immutable after construction; safe to share across concurrent readers.
class Dataset {
 public:
  Dataset(std::vector<VariableSpec> specs, std::vector<CountyRecord> records,
          std::string provenance);

  const std::vector<VariableSpec>& specs() const { return specs_; }
  const std::vector<CountyRecord>& records() const { return records_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t n_records() const { return records_.size(); }
  std::size_t n_variables() const { return specs_.size(); }

  std::size_t variable_index(const std::string& name) const;  // UnknownVariable
  std::optional<std::size_t> find_variable(const std::string& name) const;
  std::size_t outcome_index() const { return outcome_index_; }
  const VariableSpec& outcome_spec() const { return specs_[outcome_index_]; }

  std::size_t missing_count(const CountyRecord& record) const;

  // Record indices whose outcome value is observed.
  std::vector<std::size_t> rows_with_observed_outcome() const;

  Dataset with_records(std::vector<CountyRecord> records) const;

 private:
  std::vector<VariableSpec> specs_;
  std::vector<CountyRecord> records_;
  std::string provenance_;
  std::map<std::string, std::size_t> index_by_name_;
  std::size_t outcome_index_ = 0;
};

struct VariableSummary {
  std::size_t n_nonmissing = 0;
  std::optional<double> mean;
  std::optional<double> sd;  // sample standard deviation, n-1 denominator
  std::optional<double> min;
  std::optional<double> max;
};

VariableSummary summarize(const Dataset& dataset, const std::string& variable);

// Joins the features table to the centroids table on fips. Cells that are
// empty or NA/null become missing values. Optional `name`/`state` columns in
// the features file are carried through; unrecognized columns are ignored.
Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& centroids_path,
                     const std::vector<VariableSpec>& schema);

// Canonical two-file form; load_dataset(save_dataset(d)) == d field-for-field,
// including the missingness pattern.
void save_dataset(const Dataset& dataset,
                  const std::filesystem::path& features_path,
                  const std::filesystem::path& centroids_path);

std::vector<VariableSpec> load_schema(const std::filesystem::path& path);
void save_schema(const std::vector<VariableSpec>& schema,
                 const std::filesystem::path& path);

// The stock county schema: 13 predictors plus the lung-cancer mortality
// outcome (deaths per 100,000, stored percent-class).
std::vector<VariableSpec> default_schema();

// "1001" -> "01001". Digit strings shorter than 5 are zero-padded; anything
// that does not end up exactly 5 characters is rejected.
std::string canonical_fips(const std::string& raw);

void validate_schema(const std::vector<VariableSpec>& schema);

}  // namespace countyml

#endif  // COUNTYML_DATASET_HPP
