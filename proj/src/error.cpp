#include "countyml/error.hpp"

namespace countyml {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::DuplicateFips: return "DuplicateFips";
    case ErrorKind::UnjoinedCounty: return "UnjoinedCounty";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InsufficientDonors: return "InsufficientDonors";
    case ErrorKind::EmptyFitSet: return "EmptyFitSet";
    case ErrorKind::MissingParams: return "MissingParams";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::TooManyFeatures: return "TooManyFeatures";
    case ErrorKind::MissingCoverage: return "MissingCoverage";
    case ErrorKind::EmptyInput: return "EmptyInput";
  }
  return "Error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError:
    case ErrorKind::MissingColumn:
    case ErrorKind::DuplicateFips:
    case ErrorKind::UnjoinedCounty:
    case ErrorKind::ParseError:
    case ErrorKind::UnknownVariable:
    case ErrorKind::EmptyDataset:
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
      return 1;
    default:
      return 2;
  }
}

}  // namespace countyml
