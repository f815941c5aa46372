#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scorecard/evaluation.hpp"
#include "scorecard/models.hpp"
#include "scorecard/random.hpp"
#include "scorecard/synthgen.hpp"

using namespace scorecard;
using namespace scorecard::models;

namespace {

Model logistic(const Design& d) { return train_logistic(d); }

std::vector<Fold> make_folds(const Design& d, std::size_t k, std::uint64_t seed) {
  std::vector<Fold> folds;
  const auto valid = evaluation::stratified_folds(d.y, k, seed);
  for (const auto& v : valid) {
    std::vector<char> in(d.rows(), 0);
    for (auto i : v) in[i] = 1;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      if (!in[i]) train.push_back(i);
    }
    folds.push_back({d.select_rows(train), d.select_rows(v)});
  }
  return folds;
}

Design binary_feature(std::size_t n0, std::size_t bad0, std::size_t n1, std::size_t bad1) {
  Design d;
  d.names = {"flag"};
  for (std::size_t i = 0; i < n0; ++i) {
    d.x.push_back(0.0);
    d.y.push_back(i < bad0);
  }
  for (std::size_t i = 0; i < n1; ++i) {
    d.x.push_back(1.0);
    d.y.push_back(i < bad1);
  }
  return d;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("prediction examples") {
    LogisticModel m;
    m.names = {"a", "b"};
    m.weights = {0.0, 0.0};
    std::vector<double> zero{0.0, 0.0};
    CHECK(predict(m, zero) == 0.5);
    m.intercept = -0.9794546823485595;  // logit(0.273)
    CHECK(predict(m, zero) == doctest::Approx(0.273).epsilon(1e-15));
    std::vector<double> wrong{0.0};
    CHECK_THROWS_AS(predict(m, wrong), Error);
  }

  TEST_CASE("saturated binary model recovers the log-odds ratio") {
    const auto d = binary_feature(400, 80, 600, 270);
    LogisticConfig c;
    c.ridge = 0.0;
    c.tolerance = 1e-12;
    const auto m = train_logistic(d, c);
    const double expected = logit(270.0 / 600.0) - logit(80.0 / 400.0);
    CHECK(m.weights[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(m.intercept == doctest::Approx(logit(0.2)).epsilon(1e-9));
  }

  TEST_CASE("independent feature gets a weight near zero") {
    const auto d = synthgen::generate_linear_logistic(50000, {0.7, 0.0}, -1.0, 31);
    const auto m = train_logistic(d);
    // Standard error from the diagonal of the Fisher information.
    double info = 0.0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      const double p = predict(m, d.row(i));
      info += p * (1.0 - p) * d.at(i, 1) * d.at(i, 1);
    }
    const double se = 1.0 / std::sqrt(info);
    CHECK(std::fabs(m.weights[1]) < 3.0 * se);
    CHECK(m.weights[0] == doctest::Approx(0.7).epsilon(0.1));
  }

  TEST_CASE("convergence, score equation and monotone objective") {
    const auto d = synthgen::generate_linear_logistic(5000, {1.2, -0.5, 0.3}, -0.8, 4);
    LogisticConfig c;
    c.ridge = 0.0;
    std::vector<double> trace;
    const auto m = train_logistic(d, c, &trace);
    const auto g = logistic_gradient(m, d, 0.0);
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::fabs(v));
    CHECK(gmax <= c.tolerance);
    CHECK(m.info.gradient_norm <= c.tolerance);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1]);
    CHECK(trace.back() == doctest::Approx(penalized_log_likelihood(m, d, 0.0)).epsilon(1e-12));

    double mean = 0.0;
    for (std::size_t i = 0; i < d.rows(); ++i) mean += predict(m, d.row(i));
    mean /= static_cast<double>(d.rows());
    const double rate = std::accumulate(d.y.begin(), d.y.end(), 0.0) / static_cast<double>(d.rows());
    CHECK(std::fabs(mean - rate) < 1e-6);
  }

  TEST_CASE("perfect separation is handled by the minimum ridge") {
    Design d;
    d.names = {"x"};
    for (int i = 0; i < 100; ++i) {
      d.x.push_back(i);
      d.y.push_back(i >= 50);
    }
    LogisticConfig c;
    c.ridge = 0.0;
    c.max_iterations = 500;
    const auto m = train_logistic(d, c);
    CHECK(m.info.ridge == kMinimumRidge);
    CHECK(std::isfinite(m.weights[0]));
    CHECK(m.weights[0] > 0.0);
  }

  TEST_CASE("non-convergence reports the gradient norm") {
    const auto d = synthgen::generate_linear_logistic(2000, {2.0, 1.0}, 0.5, 9);
    LogisticConfig c;
    c.max_iterations = 1;
    try {
      (void)train_logistic(d, c);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.gradient_norm() > c.tolerance);
    }
  }

  TEST_CASE("retraining is bit-identical") {
    const auto d = synthgen::generate_linear_logistic(3000, {0.4, 0.9}, -1.0, 12);
    CHECK(train_logistic(d) == train_logistic(d));
    CHECK(train_adaboost(d, 20) == train_adaboost(d, 20));
  }

  TEST_CASE("adaboost: one perfect stump gives zero training error") {
    Design d;
    d.names = {"noise", "x"};
    CounterRng rng(5, 0);
    for (int i = 0; i < 60; ++i) {
      d.x.push_back(rng.uniform());
      d.x.push_back(i);
      d.y.push_back(i >= 20);
    }
    const auto e = train_adaboost(d, 1);
    REQUIRE(e.rounds.size() == 1);
    CHECK(e.rounds[0].name == "x");
    CHECK(e.training_error[0] == 0.0);
    CHECK(std::isfinite(e.rounds[0].alpha));
    for (std::size_t i = 0; i < d.rows(); ++i) CHECK((predict(e, d.row(i)) > 0.5) == (d.y[i] == 1));
  }

  TEST_CASE("adaboost rounds: weights sum to one, errors below one half") {
    const auto d = synthgen::generate_linear_logistic(4000, {0.8, -0.6, 0.2}, -0.9, 17);
    const auto e = train_adaboost(d, 40);
    REQUIRE(!e.rounds.empty());
    for (std::size_t t = 0; t < e.rounds.size(); ++t) {
      CHECK(std::isfinite(e.rounds[t].alpha));
      CHECK(e.rounds[t].weighted_error < 0.5);
      CHECK(std::fabs(e.weight_sums[t] - 1.0) <= 1e-12);
      // alpha = 1/2 ln((1 - err) / err)
      const double err = e.rounds[t].weighted_error;
      CHECK(e.rounds[t].alpha == doctest::Approx(0.5 * std::log((1.0 - err) / err)).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < 50; ++i) {
      const double p = predict(e, d.row(i));
      CHECK(p > 0.0);
      CHECK(p < 1.0);
      CHECK(p == doctest::Approx(sigmoid(2.0 * e.margin(d.row(i)))).epsilon(1e-15));
    }
  }

  TEST_CASE("adaboost fails when no stump beats one half") {
    Design d;
    d.names = {"constant"};
    for (int i = 0; i < 20; ++i) {
      d.x.push_back(1.0);
      d.y.push_back(i % 2);
    }
    CHECK_THROWS_AS(train_adaboost(d, 5), Error);
  }

  TEST_CASE("forward selection keeps the informative feature only") {
    const auto base = synthgen::generate_linear_logistic(3000, {1.0, 0.0}, -1.0, 23);
    const auto folds = make_folds(base, 5, 7);
    const auto r = forward_select({{"x1", 0.3}, {"x2", 0.001}}, folds, logistic, 1e-3);
    CHECK(r.selected == std::vector<std::string>{"x1"});
    CHECK(r.baseline_auc == 0.5);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].added == "x1");
    CHECK(r.trace[0].mean_auc > 0.6);
  }

  TEST_CASE("forward selection never adds a duplicate") {
    auto d = synthgen::generate_linear_logistic(2000, {0.9}, -1.0, 3);
    Design dup;
    dup.names = {"x1", "x1_copy"};
    dup.y = d.y;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      dup.x.push_back(d.at(i, 0));
      dup.x.push_back(d.at(i, 0));
    }
    const auto r = forward_select({{"x1", 0.2}, {"x1_copy", 0.2}}, make_folds(dup, 4, 1), logistic);
    CHECK(r.selected == std::vector<std::string>{"x1"});
  }

  TEST_CASE("forward selection with no candidates is empty") {
    const auto r = forward_select({}, {}, logistic);
    CHECK(r.selected.empty());
    CHECK(r.trace.empty());
  }

  TEST_CASE("cleaning removes a confidently wrong bad record") {
    auto d = synthgen::generate_linear_logistic(2000, {3.0}, -1.0, 8);
    // A bad record far in the good tail.
    d.x.push_back(-2.0);
    d.y.push_back(1);
    const auto first = train_logistic(d);
    const std::vector<double> probe{-2.0};
    REQUIRE(predict(first, probe) < 0.05);
    const auto r = clean_and_retrain(logistic, d, 0.05);
    CHECK(std::find(r.removed.begin(), r.removed.end(), d.rows() - 1) != r.removed.end());
    CHECK(r.warning.empty());
    CHECK(std::is_sorted(r.removed.begin(), r.removed.end()));
  }

  TEST_CASE("cleaning with nothing below threshold keeps the plain model") {
    const auto d = binary_feature(100, 40, 100, 60);
    const auto r = clean_and_retrain(logistic, d, 0.05);
    CHECK(r.removed.empty());
    CHECK(std::get<LogisticModel>(r.model) == train_logistic(d));
    const auto zero = clean_and_retrain(logistic, synthgen::generate_linear_logistic(1000, {2.0}, 0.0, 2), 0.0);
    CHECK(zero.removed.empty());
    CHECK(zero.model == zero.first_pass);
  }

  TEST_CASE("cleaning that would empty a class falls back with a warning") {
    // Every bad record sits where the model predicts mostly good.
    const auto d = binary_feature(1000, 30, 1000, 40);
    const auto r = clean_and_retrain(logistic, d, 0.45);
    CHECK(!r.warning.empty());
    CHECK(r.removed.empty());
    CHECK(r.model == r.first_pass);
    CHECK_THROWS_AS(clean_and_retrain(logistic, d, 0.5), Error);
    CHECK_THROWS_AS(clean_and_retrain(logistic, d, -0.1), Error);
  }

  TEST_CASE("monthly ensemble routes by month") {
    const auto d = synthgen::generate_linear_logistic(2400, {0.8}, -1.0, 14);
    std::vector<int> months(d.rows());
    for (std::size_t i = 0; i < months.size(); ++i) months[i] = static_cast<int>(i % 12) + 1;
    const auto b = monthly_ensemble(d, months, logistic);
    REQUIRE(b.monthly());
    const std::vector<double> x{0.3};
    CHECK(b.predict(x, 3) == predict(b.models[2], x));
    CHECK(training_info(b.models[2]).window == "months=3");
    CHECK(b.models[0] != b.models[2]);

    ModelBundle avg = b;
    avg.rule = CombineRule::kAverage;
    double mean = 0.0;
    for (const auto& m : b.models) mean += predict(m, x);
    CHECK(avg.predict(x, 3) == doctest::Approx(mean / 12.0).epsilon(1e-15));
  }

  TEST_CASE("identical data in every month gives twelve identical models") {
    const auto one = synthgen::generate_linear_logistic(200, {0.8}, -1.0, 15);
    Design d;
    d.names = one.names;
    std::vector<int> months;
    for (int m = 1; m <= 12; ++m) {
      d.x.insert(d.x.end(), one.x.begin(), one.x.end());
      d.y.insert(d.y.end(), one.y.begin(), one.y.end());
      months.insert(months.end(), one.rows(), m);
    }
    const auto b = monthly_ensemble(d, months, logistic);
    for (std::size_t m = 1; m < 12; ++m) {
      CHECK(std::get<LogisticModel>(b.models[m]).weights == std::get<LogisticModel>(b.models[0]).weights);
      CHECK(std::get<LogisticModel>(b.models[m]).intercept == std::get<LogisticModel>(b.models[0]).intercept);
    }
  }

  TEST_CASE("monthly ensemble names the month missing a class") {
    auto d = synthgen::generate_linear_logistic(1200, {0.8}, -1.0, 16);
    std::vector<int> months(d.rows());
    for (std::size_t i = 0; i < months.size(); ++i) {
      months[i] = static_cast<int>(i % 12) + 1;
      if (months[i] == 7) d.y[i] = 0;
    }
    try {
      (void)monthly_ensemble(d, months, logistic);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("July") != std::string::npos);
    }
  }

  TEST_CASE("bundles round-trip through text exactly") {
    const auto d = synthgen::generate_linear_logistic(2400, {0.8, -0.3}, -1.0, 18);
    auto single = single_model(train_logistic(d));
    training_info(single.models[0]).strategy = "through_the_door";
    training_info(single.models[0]).window = "2010-10..2010-12";
    CHECK(read_bundle(write_bundle(single)) == single);

    const auto boosted = single_model(train_adaboost(d, 15));
    CHECK(read_bundle(write_bundle(boosted)) == boosted);

    std::vector<int> months(d.rows());
    for (std::size_t i = 0; i < months.size(); ++i) months[i] = static_cast<int>(i % 12) + 1;
    const auto monthly = monthly_ensemble(d, months, logistic, CombineRule::kAverage);
    const auto back = read_bundle(write_bundle(monthly));
    CHECK(back == monthly);
    CHECK(write_bundle(back) == write_bundle(monthly));
    CHECK_THROWS_AS(read_bundle("bundle\tsingle\troute\t2\n"), ParseError);
  }
}
