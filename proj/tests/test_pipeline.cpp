#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <set>

#include "scorecard/pipeline.hpp"
#include "scorecard/scorecard.hpp"
#include "scorecard/synthgen.hpp"

using namespace scorecard;
namespace fs = std::filesystem;

namespace {

dataset::Dataset population(std::size_t n, std::uint64_t seed) {
  synthgen::PopulationSpec spec;
  spec.n_records = n;
  const auto pop = synthgen::generate_population(spec, seed);
  dataset::CleansingPolicy policy;
  policy.rare_class_threshold = 20;
  return dataset::cleanse(pop.data, policy).data;
}

ScorecardSpec small_spec() {
  ScorecardSpec spec;
  spec.attributes = {"age", "monthly_income", "occupation_code", "previous_credit", "home_type"};
  spec.interactions = {{"monthly_income", "occupation_code"}};
  return spec;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("scorecard_test_" + name);
  fs::remove_all(dir);
  return dir;
}

struct Run {
  int status = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string command = std::string(SCORECARD_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buffer{};
  while (std::fgets(buffer.data(), buffer.size(), pipe)) r.out += buffer.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

}  // namespace

TEST_SUITE("scorecard") {
  TEST_CASE("strategy and trainer names") {
    for (auto k : {StrategyKind::kFullWindow, StrategyKind::kThroughTheDoor, StrategyKind::kMonthlyEnsemble,
                   StrategyKind::kNoiseCleaning}) {
      CHECK(parse_strategy(strategy_name(k)) == k);
    }
    CHECK(parse_trainer("adaboost") == TrainerKind::kAdaBoost);
    CHECK_THROWS_AS(parse_strategy("sometimes"), ParseError);
    CHECK_THROWS_AS(parse_trainer("forest"), ParseError);
    Strategy s;
    s.kind = StrategyKind::kThroughTheDoor;
    CHECK_THROWS_AS(s.validate(), Error);
  }

  TEST_CASE("full-window scorecard scores every record and round-trips") {
    const auto data = population(4000, 1);
    const auto card = fit_scorecard(data, small_spec(), TrainerConfig{}, Strategy{});
    CHECK(card.characteristics.size() == 6);
    CHECK(card.characteristics.back().name == "monthly_income*occupation_code");
    const auto scores = card.score(data);
    REQUIRE(scores.size() == data.size());
    for (double p : scores) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
    const auto text = write_scorecard(card);
    const auto back = read_scorecard(text);
    CHECK(back == card);
    CHECK(write_scorecard(back) == text);
    CHECK(back.score(data) == scores);
    CHECK(fit_scorecard(data, small_spec(), TrainerConfig{}, Strategy{}) == card);
  }

  TEST_CASE("through-the-door trains on the window only") {
    const auto data = population(4000, 2);
    Strategy s;
    s.kind = StrategyKind::kThroughTheDoor;
    s.window = dataset::parse_window("2010-10..2010-12");
    const auto card = fit_scorecard(data, small_spec(), TrainerConfig{}, s);
    const auto& info = models::training_info(card.bundle.models[0]);
    CHECK(info.strategy == "through_the_door");
    CHECK(info.window == "2010-10..2010-12");
    const auto inside = dataset::temporal_split(data, *s.window).inside;
    std::size_t counted = 0;
    for (const auto& bin : card.characteristics[0].bins) counted += bin.count();
    CHECK(counted == inside.size());
  }

  TEST_CASE("monthly ensemble scores each record with its month's model") {
    const auto data = population(6000, 3);
    Strategy s;
    s.kind = StrategyKind::kMonthlyEnsemble;
    const auto card = fit_scorecard(data, small_spec(), TrainerConfig{}, s);
    REQUIRE(card.bundle.monthly());
    const binning::Encoder enc(data.schema, card.characteristics, card.unfamiliar);
    const auto scores = card.score(data);
    for (std::size_t i = 0; i < 50; ++i) {
      const auto& r = data.records[i];
      const auto x = enc.encode(r);
      CHECK(scores[i] == models::predict(card.bundle.models[r.period().month - 1], x));
    }
  }

  TEST_CASE("noise cleaning records the removed ids") {
    const auto data = population(4000, 4);
    Strategy s;
    s.kind = StrategyKind::kNoiseCleaning;
    s.threshold = 0.2;
    const auto card = fit_scorecard(data, small_spec(), TrainerConfig{}, s);
    CHECK(!card.removed_ids.empty());
    std::set<std::string> ids;
    for (const auto& r : data.records) ids.insert(r.id);
    for (const auto& id : card.removed_ids) CHECK(ids.count(id) == 1);
    CHECK(read_scorecard(write_scorecard(card)).removed_ids == card.removed_ids);
  }

  TEST_CASE("adaboost scorecard") {
    const auto data = population(3000, 5);
    TrainerConfig t;
    t.kind = TrainerKind::kAdaBoost;
    t.rounds = 25;
    const auto card = fit_scorecard(data, small_spec(), t, Strategy{});
    CHECK(std::holds_alternative<models::StumpEnsemble>(card.bundle.models[0]));
    CHECK(read_scorecard(write_scorecard(card)) == card);
  }

  TEST_CASE("cross-validation is deterministic and refits per fold") {
    const auto data = population(3000, 6);
    const auto a = cross_validate(data, small_spec(), TrainerConfig{}, Strategy{}, 5, 7);
    const auto b = cross_validate(data, small_spec(), TrainerConfig{}, Strategy{}, 5, 7);
    CHECK(a.fold_auc == b.fold_auc);
    CHECK(a.fold_auc.size() == 5);
    CHECK(a.mean > 0.55);
    CHECK(cross_validate(data, small_spec(), TrainerConfig{}, Strategy{}, 5, 8).fold_auc != a.fold_auc);
  }

  TEST_CASE("selection keeps a subset of the candidates") {
    const auto data = population(3000, 7);
    const auto out = select_characteristics(data, small_spec(), TrainerConfig{}, 3, 7);
    CHECK(!out.result.selected.empty());
    CHECK(out.spec.attributes.size() + out.spec.interactions.size() == out.result.selected.size());
    for (std::size_t i = 1; i < out.result.trace.size(); ++i) {
      CHECK(out.result.trace[i].mean_auc > out.result.trace[i - 1].mean_auc);
    }
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("config file, defaults and rendering") {
    const auto c = pipeline::load_config(read_file(fs::path(SCORECARD_SOURCE_DIR) / "configs/small.ini"));
    CHECK(c.population.n_records == 6000);
    CHECK(c.cleansing.rare_class_threshold == 20);
    CHECK(c.scenario.variant == 3);
    CHECK(c.cutoff.has_value());
    CHECK(c.report_json);
    const auto text = pipeline::render_config(c);
    CHECK(pipeline::render_config(pipeline::load_config(text)) == text);

    const pipeline::PipelineConfig d;
    CHECK(d.cv_k == 10);
    CHECK(d.seed == 42);
    CHECK(d.scenario.uplift_factor == 1.01);
    CHECK_NOTHROW(d.validate());
    CHECK_THROWS_AS(pipeline::load_config("[cv]\nk = ten\n"), ParseError);
    CHECK_THROWS_AS(pipeline::load_config("[model]\ncombine = vote\n"), ParseError);
  }

  TEST_CASE("effective spec follows the income switch") {
    pipeline::PipelineConfig c;
    auto has = [](const ScorecardSpec& s, const std::string& a) {
      return std::find(s.attributes.begin(), s.attributes.end(), a) != s.attributes.end();
    };
    CHECK(has(c.effective_spec(), "income_adjusted"));
    c.adjust_income = false;
    CHECK(has(c.effective_spec(), "monthly_income"));
    CHECK(!has(c.effective_spec(), "income_adjusted"));
  }

  TEST_CASE("full run writes every artifact") {
    pipeline::PipelineConfig c;
    c.output_dir = scratch("full");
    c.population.n_records = 3000;
    c.cv_k = 3;
    c.cutoff = 0.5;
    c.report_json = true;
    const auto summaries = pipeline::run_pipeline(c);
    CHECK(summaries.size() == 8);
    for (const char* f : {pipeline::files::kApplications, pipeline::files::kDefaults, pipeline::files::kModeling,
                          pipeline::files::kHoldout, pipeline::files::kCleansing, pipeline::files::kCharacteristics,
                          pipeline::files::kInformationValue, pipeline::files::kScorecard, pipeline::files::kMetrics,
                          pipeline::files::kRanking, pipeline::files::kForecast, pipeline::files::kScores,
                          pipeline::files::kCalibration, pipeline::files::kReport, pipeline::files::kReportJson,
                          pipeline::files::kEffectiveConfig}) {
      CHECK_MESSAGE(fs::exists(c.output_dir / f), f);
    }
    CHECK(summaries.back().json().find("\"command\":\"report\"") != std::string::npos);
    fs::remove_all(c.output_dir);
  }

  TEST_CASE("stages fail cleanly on missing inputs") {
    pipeline::PipelineConfig c;
    c.output_dir = scratch("empty");
    CHECK_THROWS_AS(pipeline::run_train(c), Error);
    CHECK_THROWS_AS(pipeline::run_report(c), Error);
    fs::remove_all(c.output_dir);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("degradation from AUC inputs") {
    const auto r = run_cli("evaluate --auc-test 0.7320 --auc-holdout 0.7227");
    CHECK(r.status == 0);
    CHECK(r.out.rfind("degradation,0.93\n", 0) == 0);
    CHECK(r.out.find("\"degradation_points\":0.93") != std::string::npos);
  }

  TEST_CASE("scenario 3 forecast with a constant fit") {
    const auto dir = scratch("cli_forecast");
    const auto r = run_cli("forecast --scenario 3 --intercept 0.293 --slope 0 -o " + dir.string());
    CHECK(r.status == 0);
    const auto text = read_file(dir / pipeline::files::kForecast);
    CHECK(text.find("2011-10,0.29300000000000004\n") != std::string::npos);
    CHECK(text.find("2011-11,0.29593") != std::string::npos);
    CHECK(text.find("2011-12,0.29593") != std::string::npos);
    CHECK(r.out.find("\"month_11\":0.29593") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("usage errors exit 2, stage errors exit 1") {
    CHECK(run_cli("frobnicate").status == 2);
    CHECK(run_cli("train --no-such-flag").status == 2);
    CHECK(run_cli("").status == 2);
    const auto dir = scratch("cli_missing");
    const auto r = run_cli("train -o " + dir.string());
    CHECK(r.status == 1);
    CHECK(r.out.find("\"status\":\"error\"") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("pipeline on the bundled small config") {
    const auto dir = scratch("cli_small");
    const auto r = run_cli("pipeline -c " + (fs::path(SCORECARD_SOURCE_DIR) / "configs/small.ini").string() + " -o " +
                           dir.string());
    CHECK(r.status == 0);
    CHECK(fs::exists(dir / pipeline::files::kScorecard));
    CHECK(fs::exists(dir / pipeline::files::kMetrics));
    CHECK(fs::exists(dir / pipeline::files::kForecast));
    CHECK(fs::exists(dir / pipeline::files::kScores));
    fs::remove_all(dir);
  }
}
