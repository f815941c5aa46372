#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scorecard/calibration.hpp"
#include "scorecard/dataset.hpp"
#include "scorecard/scorecard.hpp"
#include "scorecard/synthgen.hpp"

namespace scorecard::pipeline {

enum class ShiftMode { kAuto, kGlobal, kMonthly };

/// Everything a run needs. Each field has a default; an INI file overrides
/// defaults and command-line flags override the file.
struct PipelineConfig {
  std::filesystem::path output_dir = "out";
  /// External inputs. Without `data` the synth stage produces all three.
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> defaults;
  std::vector<std::filesystem::path> macro;
  std::uint64_t seed = 42;

  synthgen::PopulationSpec population;
  synthgen::MacroSpec macro_spec;

  dataset::DateWindow modeling{{2009, 1}, {2010, 12}};
  dataset::DateWindow holdout{{2011, 1}, {2011, 12}};
  dataset::CleansingPolicy cleansing;
  bool adjust_income = true;
  /// Year -> multiplier for income_adjusted; empty means derive from the population spec.
  std::map<int, double> inflation_factors;

  ScorecardSpec spec;
  TrainerConfig trainer;
  Strategy strategy;
  bool select = false;
  double select_epsilon = 0.0;
  std::size_t cv_k = 10;
  std::uint64_t cv_seed = 7;

  calibration::Scenario scenario;
  int forecast_year = 2011;
  ShiftMode shift = ShiftMode::kAuto;
  std::optional<double> cutoff;
  bool report_json = false;

  PipelineConfig();
  void validate() const;
  /// Attribute list with income_adjusted swapped for monthly_income when adjustment is off.
  ScorecardSpec effective_spec() const;
  std::map<int, double> effective_factors() const;
};

PipelineConfig load_config(const std::string& ini_text);
/// INI rendering of the effective configuration.
std::string render_config(const PipelineConfig& config);

/// Ordered key/value pairs printed as one JSON line.
struct Summary {
  using Value = std::variant<std::string, double, long long>;
  std::string command;
  std::vector<std::pair<std::string, Value>> fields;

  void add(const std::string& key, const std::string& value) { fields.emplace_back(key, value); }
  void add(const std::string& key, const char* value) { fields.emplace_back(key, std::string(value)); }
  void add(const std::string& key, double value) { fields.emplace_back(key, value); }
  void add(const std::string& key, std::size_t value) { fields.emplace_back(key, static_cast<long long>(value)); }
  void add(const std::string& key, int value) { fields.emplace_back(key, static_cast<long long>(value)); }
  std::string json() const;
};

/// Output file names inside the output directory.
namespace files {
inline constexpr const char* kApplications = "applications.csv";
inline constexpr const char* kDefaults = "defaults.csv";
inline constexpr const char* kModeling = "modeling.csv";
inline constexpr const char* kHoldout = "holdout.csv";
inline constexpr const char* kCleansing = "cleansing_report.csv";
inline constexpr const char* kCharacteristics = "characteristics.txt";
inline constexpr const char* kInformationValue = "iv.csv";
inline constexpr const char* kScorecard = "scorecard.txt";
inline constexpr const char* kSelection = "selection.csv";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kRanking = "ranking.csv";
inline constexpr const char* kForecast = "forecast.csv";
inline constexpr const char* kScores = "calibrated_scores.csv";
inline constexpr const char* kCalibration = "calibration.csv";
inline constexpr const char* kReport = "report.txt";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kEffectiveConfig = "config.ini";
}  // namespace files

/// Reads a dataset file whose header may carry the derived geography and
/// income_adjusted columns in addition to the credit schema.
dataset::ParseResult read_dataset_file(const std::filesystem::path& path);

Summary run_synth(const PipelineConfig& config);
Summary run_ingest(const PipelineConfig& config);
Summary run_bin(const PipelineConfig& config);
Summary run_train(const PipelineConfig& config);
Summary run_evaluate(const PipelineConfig& config);
/// A fit supplied by hand replaces predictor ranking.
struct ManualFit {
  double intercept = 0.0;
  double slope = 0.0;
};
Summary run_forecast(const PipelineConfig& config, const std::optional<ManualFit>& manual = std::nullopt);
Summary run_calibrate(const PipelineConfig& config);
Summary run_report(const PipelineConfig& config);
std::vector<Summary> run_pipeline(const PipelineConfig& config);

/// Per-bin shares of one characteristic over a record set; the last entry
/// holds records that fall in no bin.
std::vector<double> bin_shares(const binning::Encoder& encoder, std::size_t c, const dataset::Dataset& data);

}  // namespace scorecard::pipeline
