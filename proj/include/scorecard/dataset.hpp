#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scorecard/common.hpp"

namespace scorecard::dataset {

using Date = std::chrono::year_month_day;

/// Parses `YYYY-MM-DD`; throws ParseError.
Date parse_date(std::string_view text);
std::string format_date(const Date& date);

/// Calendar month, the unit every temporal operation works in.
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  static YearMonth of(const Date& date);
  /// Parses `YYYY-MM`.
  static YearMonth parse(std::string_view text);
  std::string str() const;
  int ordinal() const { return year * 12 + (month - 1); }
  YearMonth next() const { return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1}; }

  friend auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

/// Attribute names by kind. Records store values positionally in this order.
struct Schema {
  std::vector<std::string> numeric;
  std::vector<std::string> nominal;
  std::vector<std::string> binary;

  /// The credit-application layout: six numeric, ten nominal, a handful of flags.
  static Schema credit();

  std::optional<std::size_t> numeric_index(std::string_view name) const;
  std::optional<std::size_t> nominal_index(std::string_view name) const;
  std::optional<std::size_t> binary_index(std::string_view name) const;
  bool has(std::string_view name) const;
  std::vector<std::string> all_names() const;

  friend bool operator==(const Schema&, const Schema&) = default;
};

inline constexpr int kMissingFlag = -1;

struct Application {
  std::string id;
  Date application_date{};
  std::vector<double> numeric;       // NaN marks missing
  std::vector<std::string> nominal;  // empty marks missing
  std::vector<int> binary;           // 0, 1 or kMissingFlag
  std::optional<int> label;          // 1 = bad, 0 = good

  YearMonth period() const { return YearMonth::of(application_date); }
  friend bool operator==(const Application&, const Application&) = default;
};

struct Dataset {
  Schema schema;
  std::vector<Application> records;

  std::size_t size() const { return records.size(); }
  /// Numeric value by attribute name, NaN when missing. Throws on an unknown name.
  double numeric(const Application& record, std::string_view name) const;
  const std::string& nominal(const Application& record, std::string_view name) const;
};

bool is_missing(double value);

/// Inclusive month range.
struct DateWindow {
  YearMonth from;
  YearMonth to;
  bool contains(const YearMonth& ym) const { return from <= ym && ym <= to; }
};

/// Selects the given months of every year.
struct MonthOfYearFilter {
  std::set<int> months;
};

using SplitWindow = std::variant<DateWindow, MonthOfYearFilter>;

/// `2010-10..2010-12` or `months=3,4`.
SplitWindow parse_window(std::string_view text);
std::string format_window(const SplitWindow& window);

struct ParseOptions {
  char delimiter = ',';
  std::optional<DateWindow> period;
};

struct Diagnostic {
  std::size_t line = 0;
  std::string column;
  std::string message;
};

struct ParseResult {
  Dataset data;
  std::vector<Diagnostic> diagnostics;
};

/// Reads delimited text with a header of `id`, `application_date`, `label` plus
/// every schema attribute (any order). Bad cells become missing with a
/// diagnostic; rows that cannot form an Application are reported and skipped.
ParseResult parse_dataset(std::istream& source, const Schema& schema, const ParseOptions& options = {});
std::string write_dataset(const Dataset& data, char delimiter = ',');

struct Range {
  double min = 0.0;
  double max = 0.0;
  bool contains(double value) const { return value >= min && value <= max; }
};

struct CleansingPolicy {
  Range age_valid_range{18.0, 99.0};
  Range due_day_valid_range{1.0, 31.0};
  Range income_valid_range{0.0, 1.0e6};
  std::size_t rare_class_threshold = 100;
  bool text_normalization = true;
  /// Concatenate state|city|neighborhood into `geography` when the schema has them.
  bool build_geography = true;

  void validate() const;
};

inline constexpr std::string_view kOtherClass = "Other";
inline constexpr std::string_view kGeography = "geography";

enum class Disposition { kMissing, kOutOfRange, kMergedToOther, kNormalized };
std::string_view disposition_name(Disposition disposition);

struct CleansingReport {
  std::map<std::string, std::map<Disposition, std::size_t>> counts;

  std::size_t count(std::string_view variable, Disposition disposition) const;
  void add(const std::string& variable, Disposition disposition, std::size_t n = 1);
  /// Order-independent merge of shard reports.
  void merge(const CleansingReport& other);
  /// `variable,disposition,count`, sorted.
  std::string to_text() const;
};

/// Vocabulary learned on the modeling partition. Tokens seen there with count
/// above the threshold survive; the rest map to "Other". Tokens never seen are
/// left untouched so encoding can treat them as unfamiliar.
struct CleansingModel {
  CleansingPolicy policy;
  std::map<std::string, std::set<std::string>> kept;
  std::map<std::string, std::set<std::string>> merged;
};

struct CleansingResult {
  Dataset data;
  CleansingReport report;
};

CleansingModel fit_cleansing(const Dataset& modeling, const CleansingPolicy& policy);
CleansingResult apply_cleansing(const Dataset& records, const CleansingModel& model);
/// fit_cleansing + apply_cleansing on the same records.
CleansingResult cleanse(const Dataset& records, const CleansingPolicy& policy);

/// Case-fold, trim, collapse whitespace, strip the reserved '|' separator.
std::string normalize_token(std::string_view token);

inline constexpr std::string_view kAdjustedIncome = "income_adjusted";

/// Appends `income_adjusted = monthly_income * factor[year]`. Throws listing
/// every year without a factor.
Dataset adjust_income(const Dataset& records, const std::map<int, double>& factor_by_year);

struct Partition {
  Dataset inside;
  Dataset outside;
  std::string warning;  // set when the selection is empty
};

Partition temporal_split(const Dataset& records, const SplitWindow& window);
bool window_contains(const SplitWindow& window, const YearMonth& ym);

}  // namespace scorecard::dataset
