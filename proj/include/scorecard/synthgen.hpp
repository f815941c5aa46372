#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scorecard/calibration.hpp"
#include "scorecard/dataset.hpp"
#include "scorecard/models.hpp"

namespace scorecard::synthgen {

using dataset::YearMonth;

/// Generative description of an application population. Every random draw
/// comes from CounterRng keyed by (seed, record index), so output does not
/// depend on sharding.
struct PopulationSpec {
  std::size_t n_records = 30000;
  YearMonth start{2009, 1};
  std::size_t months = 36;
  double base_rate = 0.273;
  /// Multiplies every log-odds effect; 0 leaves only the intercept and seasonality.
  double effect_scale = 1.0;
  /// Additive monthly log-odds offsets, January first.
  std::array<double, 12> seasonal{};
  /// Nominal income grows by this rate per year after the start year.
  double income_inflation = 0.0;
  /// Share of records from `new_code_start` on whose occupation code is new.
  double new_code_rate = 0.0;
  YearMonth new_code_start{2011, 1};
  /// Share of records with an implausible age or due day.
  double outlier_rate = 0.01;

  void validate() const;
};

struct Population {
  dataset::Dataset data;
  /// True P(bad) per record.
  std::vector<double> probability;
  double intercept = 0.0;
};

/// Labeled applications in month order. `shards` splits the record range for
/// generation; the result is identical for any shard count.
Population generate_population(const PopulationSpec& spec, std::uint64_t seed, std::size_t shards = 1);

/// Yearly deflators that undo the spec's income inflation.
std::map<int, double> deflators(const PopulationSpec& spec);

/// Standard normal features with labels from sigmoid(intercept + coefs . x).
models::Design generate_linear_logistic(std::size_t n, const std::vector<double>& coefs, double intercept,
                                        std::uint64_t seed);

struct MacroSpec {
  std::string name = "macro";
  /// Scale and level of the affine map from the default series.
  double loading = 1.0;
  double offset = 0.0;
  /// Zero gives an exact affine copy; otherwise seeded noise is added and
  /// sized so the realized correlation equals `target_correlation`.
  double noise_scale = 1.0;
  double target_correlation = 0.8;

  void validate() const;
};

calibration::MacroSeries generate_macro(const MacroSpec& spec,
                                        const std::vector<std::pair<calibration::Quarter, double>>& defaults,
                                        std::uint64_t seed);

/// Monthly default rates drawn as binomial proportions around a flat rate,
/// with an optional multiplier on chosen months of every year.
struct DefaultSimSpec {
  YearMonth start{2009, 1};
  std::size_t months = 36;
  double rate = 0.273;
  std::size_t applications_per_month = 2000;
  double year_end_uplift = 1.0;
  std::vector<int> uplift_months{11, 12};

  void validate() const;
};

calibration::DefaultSeries simulate_default_series(const DefaultSimSpec& spec, std::uint64_t seed);

/// `key = value` lines under `[population]` and `[macro]` sections.
PopulationSpec read_population_spec(const std::string& text);
MacroSpec read_macro_spec(const std::string& text);

}  // namespace scorecard::synthgen
