#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scorecard/common.hpp"
#include "scorecard/dataset.hpp"

namespace scorecard::calibration {

using dataset::YearMonth;

struct Quarter {
  int year = 0;
  int q = 1;  // 1..4

  static Quarter of(const YearMonth& ym) { return {ym.year, (ym.month - 1) / 3 + 1}; }
  /// Parses `YYYY-Qn`.
  static Quarter parse(std::string_view text);
  std::string str() const;
  int ordinal() const { return year * 4 + (q - 1); }
  Quarter next() const { return q == 4 ? Quarter{year + 1, 1} : Quarter{year, q + 1}; }
  Quarter prev() const { return q == 1 ? Quarter{year - 1, 4} : Quarter{year, q - 1}; }
  YearMonth first_month() const { return {year, (q - 1) * 3 + 1}; }

  friend auto operator<=>(const Quarter&, const Quarter&) = default;
};

struct MacroSeries {
  std::string name;
  std::vector<std::pair<Quarter, double>> points;
  std::set<Quarter> abnormal;

  /// Quarters strictly increasing without gaps, values finite.
  void validate() const;
  std::optional<double> at(const Quarter& quarter) const;
};

struct DefaultSeries {
  std::vector<std::pair<YearMonth, double>> monthly;

  /// Months strictly increasing, rates in [0, 1].
  void validate() const;
  std::optional<double> at(const YearMonth& month) const;
  /// Unweighted mean of the three months, for every fully covered quarter.
  std::vector<std::pair<Quarter, double>> quarterly() const;
};

/// Monthly bad rate of the labeled records.
DefaultSeries default_series_from(const dataset::Dataset& data);

struct RegressionFit {
  std::string predictor;
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  double r_square = 0.0;
  std::size_t n_points = 0;

  double predict(double x) const { return intercept + slope * x; }
};

/// OLS of y on x with Pearson r. Throws when x or y is constant or n < 3.
RegressionFit fit_ols(const std::string& name, std::span<const double> x, std::span<const double> y);

/// Replaces each flagged quarter by the mean of its existing neighbours.
MacroSeries repair_abnormal(const MacroSeries& series, const std::set<Quarter>& flagged);
/// Repairs the series' own abnormal flags and clears them.
MacroSeries repair_abnormal(const MacroSeries& series);

struct QuarterWindow {
  Quarter from;
  Quarter to;
  bool contains(const Quarter& q) const { return from <= q && q <= to; }
};

struct Ranking {
  std::vector<RegressionFit> fits;
  /// Candidates left out, with the reason.
  std::vector<std::pair<std::string, std::string>> excluded;
};

/// Fits default on each candidate over their shared quarters, sorted by
/// descending |r| with ties broken by name.
Ranking rank_predictors(const DefaultSeries& defaults, const std::vector<MacroSeries>& candidates,
                        const std::optional<QuarterWindow>& window = std::nullopt);

struct Scenario {
  int variant = 2;
  double uplift_factor = 1.01;
  std::set<int> uplift_months{11, 12};

  void validate() const;
};

struct Forecast {
  int year = 0;
  std::vector<double> quarterly;  // 4 values (variant-1 estimates)
  std::vector<double> monthly;    // 12 values
};

/// Twelve monthly estimates for `year`. Quarter q uses the predictor at q - 1.
Forecast forecast_default(const Scenario& scenario, const RegressionFit& fit, const MacroSeries& predictor, int year);

struct ShiftResult {
  double delta = 0.0;
  double achieved_mean = 0.0;
  std::vector<double> adjusted;
};

inline constexpr double kShiftTolerance = 1e-9;

/// sigmoid(logit(s) + delta) with the delta that brings the mean to `target`.
ShiftResult shift_scores(std::span<const double> scores, double target, double tolerance = kShiftTolerance);

struct CalibrationShift {
  /// One offset per application month present, or a single entry keyed 0 in global mode.
  std::map<int, double> delta;
  std::map<int, double> target;
  std::map<int, double> achieved;
  double tolerance = kShiftTolerance;
  std::vector<double> adjusted;
};

/// Per-month offsets: records of month m are shifted toward targets[m - 1].
CalibrationShift shift_by_month(std::span<const double> scores, std::span<const int> months,
                                std::span<const double> targets, double tolerance = kShiftTolerance);
/// One offset for all records toward `target`.
CalibrationShift shift_global(std::span<const double> scores, double target, double tolerance = kShiftTolerance);

struct Distance {
  double d = 0.0;
  bool valid = true;
  double mean_estimate = 0.0;
  double mean_observed = 0.0;
};

/// Sum of (est - obs)^2 / obs over twelve months; valid when the mean
/// estimate lies within half and double of the mean observation.
Distance distance_d(std::span<const double> estimates, std::span<const double> observed);

struct CutoffResult {
  std::vector<std::size_t> approved;
  double expected_rate = 0.0;
};

/// Approves scores strictly below the cutoff.
CutoffResult apply_cutoff(std::span<const double> adjusted, double cutoff);

/// Two-column `period,value` text with a header; periods `YYYY-Qn` or `YYYY-MM`.
MacroSeries read_macro(const std::string& text, const std::string& name);
DefaultSeries read_defaults(const std::string& text);
std::string write_macro(const MacroSeries& series);
std::string write_defaults(const DefaultSeries& series);

/// Twelve `period,estimate[,observed]` rows and a trailing summary row.
std::string write_forecast(const Forecast& forecast, const std::optional<std::vector<double>>& observed);

}  // namespace scorecard::calibration
