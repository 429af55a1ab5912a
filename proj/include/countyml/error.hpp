#ifndef COUNTYML_ERROR_HPP
#define COUNTYML_ERROR_HPP

#include <stdexcept>
#include <string>

namespace countyml {

enum class ErrorKind {
  // Input / validation problems (CLI exit code 1).
  IoError,
  MissingColumn,
  DuplicateFips,
  UnjoinedCounty,
  ParseError,
  UnknownVariable,
  EmptyDataset,
  ConfigError,
  InvalidArgument,
  // Runtime / model problems (CLI exit code 2).
  InsufficientDonors,
  EmptyFitSet,
  MissingParams,
  DimensionMismatch,
  DegenerateSplit,
  InvalidK,
  ZeroVariance,
  TooManyFeatures,
  MissingCoverage,
  EmptyInput,
};

const char* to_string(ErrorKind kind);

// 1 = input/validation error, 2 = runtime/model error.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace countyml

#endif  // COUNTYML_ERROR_HPP
