#ifndef COUNTYML_SYNTH_HPP
#define COUNTYML_SYNTH_HPP

#include <cstdint>

#include "countyml/dataset.hpp"

namespace countyml {

// Bundled benchmark generator: county-like records over a continental-US
// bounding box, the stock 13-predictor schema, and a mortality-style outcome
// with a planted nonlinear structure (interactions, thresholds, a spatial
// smoking cluster). The smokers-rate effect dominates by construction, and
// the noise level leaves an ordinary linear fit around R^2 0.3.
struct SynthConfig {
  std::size_t n = 3000;
  std::uint64_t seed = 42;
  double noise_sd = 12.5;
  double predictor_missing_rate = 0.015;
  double outcome_missing_rate = 0.04;
  std::size_t sparse_counties = 25;  // rows given > 5 missing cells
};

Dataset make_synthetic_dataset(const SynthConfig& config);

}  // namespace countyml

#endif  // COUNTYML_SYNTH_HPP
