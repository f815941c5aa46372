#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scorecard/evaluation.hpp"
#include "scorecard/pipeline.hpp"

namespace {

using namespace scorecard;
using pipeline::PipelineConfig;

struct Flags {
  std::string config;
  std::string output;
  std::string data;
  std::string defaults;
  std::vector<std::string> macro;
  std::uint64_t seed = 0;
  std::size_t records = 0;
  std::string trainer;
  std::size_t rounds = 0;
  std::string strategy;
  std::string window;
  double threshold = 0.0;
  std::string combine;
  std::string unfamiliar;
  bool adjust_income = true;
  bool select = false;
  std::size_t k = 0;
  std::uint64_t cv_seed = 0;
  int scenario = 2;
  double uplift = 1.01;
  int year = 0;
  std::string shift;
  double cutoff = 0.5;
  double auc_test = 0.0;
  double auc_holdout = 0.0;
  double intercept = 0.0;
  double slope = 0.0;
};

void error_line(const std::string& command, const std::string& message) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["status"] = "error";
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WoE credit scorecards with macro-calibrated default forecasts", "scorecard"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;

  auto* o_config = app.add_option("-c,--config", f.config, "INI config file")->check(CLI::ExistingFile);
  auto* o_output = app.add_option("-o,--output", f.output, "Output directory");
  auto* o_data = app.add_option("--data", f.data, "Application file (skips synthesis)");
  auto* o_defaults = app.add_option("--defaults", f.defaults, "Monthly default series file");
  auto* o_macro = app.add_option("--macro", f.macro, "Quarterly macro series file (repeatable)");
  auto* o_seed = app.add_option("--seed", f.seed, "Master seed");
  auto* o_records = app.add_option("--records", f.records, "Synthetic record count");
  auto* o_trainer = app.add_option("--trainer", f.trainer, "logistic | adaboost");
  auto* o_rounds = app.add_option("--rounds", f.rounds, "AdaBoost rounds");
  auto* o_strategy =
      app.add_option("--strategy", f.strategy, "full_window | through_the_door | monthly_ensemble | cleaning");
  auto* o_window = app.add_option("--window", f.window, "Training window, YYYY-MM..YYYY-MM or months=a,b");
  auto* o_threshold = app.add_option("--threshold", f.threshold, "Cleaning posterior threshold");
  auto* o_combine = app.add_option("--combine", f.combine, "Monthly ensemble rule: route | average");
  auto* o_unfamiliar = app.add_option("--unfamiliar", f.unfamiliar, "average_woe | other_bin");
  auto* o_adjust = app.add_option("--adjust-income", f.adjust_income, "Deflate monthly income (true|false)");
  auto* o_select = app.add_flag("--select", f.select, "Forward-select characteristics by CV AUC");
  auto* o_k = app.add_option("--k", f.k, "Cross-validation folds");
  auto* o_cv_seed = app.add_option("--cv-seed", f.cv_seed, "Fold seed");
  auto* o_scenario = app.add_option("--scenario", f.scenario, "Forecast scenario 1, 2 or 3")->check(CLI::Range(1, 3));
  auto* o_uplift = app.add_option("--uplift", f.uplift, "Scenario 3 uplift factor");
  auto* o_year = app.add_option("--year", f.year, "Forecast year");
  auto* o_shift = app.add_option("--shift", f.shift, "auto | global | monthly");
  auto* o_cutoff = app.add_option("--cutoff", f.cutoff, "Approval cutoff on adjusted scores");

  auto* synth = app.add_subcommand("synth", "Generate applications, default series and macro series");
  auto* ingest = app.add_subcommand("ingest", "Parse, split, cleanse and inflation-adjust applications");
  auto* bin = app.add_subcommand("bin", "Fit characteristics and rank them by information value");
  auto* train = app.add_subcommand("train", "Train the scorecard under the configured strategy");
  auto* evaluate = app.add_subcommand("evaluate", "AUC, cross-validation, PSI and degradation");
  auto* o_auc_test = evaluate->add_option("--auc-test", f.auc_test, "Test AUC for a direct degradation figure");
  auto* o_auc_holdout = evaluate->add_option("--auc-holdout", f.auc_holdout, "Holdout AUC");
  o_auc_test->needs(o_auc_holdout);
  o_auc_holdout->needs(o_auc_test);
  auto* calibrate = app.add_subcommand("calibrate", "Shift holdout scores to the forecast default");
  auto* forecast = app.add_subcommand("forecast", "Rank macro predictors and forecast monthly default");
  auto* o_intercept = forecast->add_option("--intercept", f.intercept, "Use this fit instead of ranking");
  auto* o_slope = forecast->add_option("--slope", f.slope, "Slope of the supplied fit");
  o_slope->needs(o_intercept);
  auto* report = app.add_subcommand("report", "Collect stage outputs into one report");
  auto* all = app.add_subcommand("pipeline", "Run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    error_line("usage", e.what());
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (sub == evaluate && o_auc_test->count()) {
      const double points = evaluation::degradation(f.auc_test, f.auc_holdout);
      std::cout << "degradation," << format_fixed(points, 2) << "\n";
      nlohmann::ordered_json j;
      j["command"] = command;
      j["status"] = "ok";
      j["degradation_points"] = points;
      std::cout << j.dump() << "\n";
      return 0;
    }

    PipelineConfig config = o_config->count() ? pipeline::load_config(read_file(f.config)) : PipelineConfig{};
    if (o_output->count()) config.output_dir = f.output;
    if (o_data->count()) config.data = f.data;
    if (o_defaults->count()) config.defaults = f.defaults;
    if (o_macro->count()) config.macro.assign(f.macro.begin(), f.macro.end());
    if (o_seed->count()) config.seed = f.seed;
    if (o_records->count()) config.population.n_records = f.records;
    if (o_trainer->count()) config.trainer.kind = parse_trainer(f.trainer);
    if (o_rounds->count()) config.trainer.rounds = f.rounds;
    if (o_strategy->count()) config.strategy.kind = parse_strategy(f.strategy);
    if (o_window->count()) config.strategy.window = dataset::parse_window(f.window);
    if (o_threshold->count()) config.strategy.threshold = f.threshold;
    if (o_combine->count()) {
      if (f.combine != "route" && f.combine != "average") throw ParseError("--combine must be route or average");
      config.strategy.rule = f.combine == "average" ? models::CombineRule::kAverage : models::CombineRule::kRouteByMonth;
    }
    if (o_unfamiliar->count()) {
      if (f.unfamiliar != "average_woe" && f.unfamiliar != "other_bin") {
        throw ParseError("--unfamiliar must be average_woe or other_bin");
      }
      config.spec.unfamiliar =
          f.unfamiliar == "other_bin" ? binning::UnfamiliarPolicy::kOtherBin : binning::UnfamiliarPolicy::kAverageWoe;
    }
    if (o_adjust->count()) config.adjust_income = f.adjust_income;
    if (o_select->count()) config.select = f.select;
    if (o_k->count()) config.cv_k = f.k;
    if (o_cv_seed->count()) config.cv_seed = f.cv_seed;
    if (o_scenario->count()) config.scenario.variant = f.scenario;
    if (o_uplift->count()) config.scenario.uplift_factor = f.uplift;
    if (o_year->count()) config.forecast_year = f.year;
    if (o_shift->count()) {
      if (f.shift == "auto") config.shift = pipeline::ShiftMode::kAuto;
      else if (f.shift == "global") config.shift = pipeline::ShiftMode::kGlobal;
      else if (f.shift == "monthly") config.shift = pipeline::ShiftMode::kMonthly;
      else throw ParseError("--shift must be auto, global or monthly");
    }
    if (o_cutoff->count()) config.cutoff = f.cutoff;
    config.validate();

    std::vector<pipeline::Summary> summaries;
    if (sub == synth) summaries.push_back(pipeline::run_synth(config));
    else if (sub == ingest) summaries.push_back(pipeline::run_ingest(config));
    else if (sub == bin) summaries.push_back(pipeline::run_bin(config));
    else if (sub == train) summaries.push_back(pipeline::run_train(config));
    else if (sub == evaluate) summaries.push_back(pipeline::run_evaluate(config));
    else if (sub == calibrate) summaries.push_back(pipeline::run_calibrate(config));
    else if (sub == report) summaries.push_back(pipeline::run_report(config));
    else if (sub == forecast) {
      std::optional<pipeline::ManualFit> manual;
      if (o_intercept->count()) manual = pipeline::ManualFit{f.intercept, f.slope};
      summaries.push_back(pipeline::run_forecast(config, manual));
    } else if (sub == all) {
      summaries = pipeline::run_pipeline(config);
    }
    for (const auto& s : summaries) std::cout << s.json() << "\n";
    return 0;
  } catch (const std::exception& e) {
    error_line(command, e.what());
    return 1;
  }
}
