#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "scorecard/binning.hpp"
#include "scorecard/random.hpp"
#include "scorecard/synthgen.hpp"
#include "support.hpp"

using namespace scorecard;
using namespace scorecard::binning;
using testing::make_record;

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kIvExample = 0.7167037876912221;

Characteristic from_counts(const std::vector<std::pair<std::size_t, std::size_t>>& gb) {
  Characteristic c;
  c.name = "x";
  c.type = CharacteristicType::kNominal;
  c.attribute = "x";
  for (std::size_t i = 0; i < gb.size(); ++i) {
    Bin b;
    b.kind = BinKind::kClassSet;
    b.classes = {"c" + std::to_string(i)};
    b.good = gb[i].first;
    b.bad = gb[i].second;
    c.bins.push_back(b);
  }
  finalize(c);
  return c;
}

dataset::Dataset two_column(const std::vector<double>& x, const std::vector<std::string>& tok,
                            const std::vector<int>& y) {
  dataset::Dataset d;
  d.schema.numeric = {"x"};
  d.schema.nominal = {"t"};
  for (std::size_t i = 0; i < y.size(); ++i) {
    d.records.push_back(make_record("r" + std::to_string(i), "2009-01-01", y[i], {x[i]}, {tok[i]}));
  }
  return d;
}

}  // namespace

TEST_SUITE("binning") {
  TEST_CASE("woe examples") {
    CHECK(compute_woe(10, 10, 100, 100, 9.0) == 0.0);
    CHECK(compute_woe(20, 10, 100, 100, 9.0) == doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(compute_woe(0, 5, 100, 100, 0.12) == 0.12);
    CHECK(compute_woe(5, 0, 100, 100, -0.3) == -0.3);
    CHECK_THROWS_AS(compute_woe(1, 1, 0, 10, 0.0), Error);
    CHECK_THROWS_AS(compute_woe(1, 1, 10, 0, 0.0), Error);
  }

  TEST_CASE("iv examples") {
    CHECK(from_counts({{40, 25}}).iv == 0.0);
    const auto c = from_counts({{30, 10}, {20, 40}});
    CHECK(std::fabs(c.iv - kIvExample) < 1e-12);
  }

  TEST_CASE("pure bins take the weighted average woe and add nothing to iv") {
    const auto c = from_counts({{30, 10}, {20, 40}, {0, 7}});
    CHECK(!c.bins[2].woe_defined);
    const double avg = (40.0 * std::log(0.6 / (10.0 / 57.0)) + 60.0 * std::log(0.4 / (40.0 / 57.0))) / 100.0;
    CHECK(c.average_woe == doctest::Approx(avg).epsilon(1e-14));
    CHECK(c.bins[2].woe == c.average_woe);
    const double iv = (0.6 - 10.0 / 57.0) * std::log(0.6 / (10.0 / 57.0)) +
                      (0.4 - 40.0 / 57.0) * std::log(0.4 / (40.0 / 57.0));
    CHECK(c.iv == doctest::Approx(iv).epsilon(1e-14));
  }

  TEST_CASE("adjacent chi-square of a 2x2 table") {
    // 2x2 Pearson: n (ad - bc)^2 / (row and column totals).
    const double expected = 100.0 * std::pow(30.0 * 30.0 - 20.0 * 20.0, 2) / (50.0 * 50.0 * 50.0 * 50.0);
    CHECK(adjacent_chi_square(30, 20, 20, 30) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(adjacent_chi_square(10, 10, 20, 20) == 0.0);
  }

  TEST_CASE("perfect separation gives two bins at the separating cut") {
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 100; ++i) {
      x.push_back(i);
      y.push_back(i >= 50 ? 1 : 0);
    }
    // Oracle: the single cut with the largest smoothed IV.
    double best_cut = 0.0;
    double best_iv = -1.0;
    for (int cut = 1; cut < 100; ++cut) {
      const double g1 = std::min(cut, 50) + 0.5, b1 = std::max(cut - 50, 0) + 0.5;
      const double g2 = 50.0 - std::min(cut, 50) + 0.5, b2 = 50.0 - std::max(cut - 50, 0) + 0.5;
      const double G = g1 + g2, B = b1 + b2;
      const double iv = (g1 / G - b1 / B) * std::log((g1 / G) / (b1 / B)) +
                        (g2 / G - b2 / B) * std::log((g2 / G) / (b2 / B));
      if (iv > best_iv) {
        best_iv = iv;
        best_cut = cut;
      }
    }
    CHECK(best_cut == 50.0);
    const auto bins = supervised_bin(x, y, BinningConfig{});
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].hi == best_cut);
    CHECK(bins[1].lo == best_cut);
    CHECK(bins[0].bad == 0);
    CHECK(bins[1].good == 0);
  }

  TEST_CASE("identical values give one bin") {
    std::vector<double> x(200, 7.0);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3 == 0;
    const auto bins = supervised_bin(x, y, BinningConfig{});
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].kind == BinKind::kInterval);
    CHECK(bins[0].count() == 200);
  }

  TEST_CASE("missing values go to a trailing bucket") {
    CounterRng rng(3, 0);
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 1000; ++i) {
      x.push_back(i % 5 == 0 ? std::numeric_limits<double>::quiet_NaN() : rng.normal());
      y.push_back(rng.bernoulli(0.3));
    }
    const auto bins = supervised_bin(x, y, BinningConfig{});
    REQUIRE(bins.back().kind == BinKind::kMissing);
    CHECK(bins.back().count() == 200);
  }

  TEST_CASE("one class absent is an error") {
    std::vector<double> x{1, 2, 3};
    std::vector<int> y{0, 0, 0};
    CHECK_THROWS_AS(supervised_bin(x, y, BinningConfig{}), Error);
    std::vector<std::string> t{"a", "b", "c"};
    CHECK_THROWS_AS(class_bins(t, y), Error);
  }

  TEST_CASE("class bins: one per token plus missing") {
    std::vector<std::string> t{"b", "a", "", "b", "a", "c"};
    std::vector<int> y{1, 0, 1, 0, 0, 1};
    const auto bins = class_bins(t, y);
    REQUIRE(bins.size() == 4);
    CHECK(bins[0].classes == std::vector<std::string>{"a"});
    CHECK(bins[0].good == 2);
    CHECK(bins[3].kind == BinKind::kMissing);
    CHECK(bins[3].bad == 1);
  }

  TEST_CASE("config validation") {
    BinningConfig c;
    c.max_pre_bins = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.min_bin_fraction = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.min_bin_fraction = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("encoder: seen token, unfamiliar token, boundary, missing") {
    std::vector<double> x;
    std::vector<std::string> t;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
      x.push_back(i < 200 ? 1.0 : 2.0);
      t.push_back(i % 2 ? "odd" : "even");
      y.push_back(i < 200 ? (i % 10 == 0) : (i % 2 == 0 || i % 3 == 0));
    }
    const auto d = two_column(x, t, y);
    const auto cx = fit_characteristic(d, "x", BinningConfig{});
    const auto ct = fit_characteristic(d, "t", BinningConfig{});
    REQUIRE(cx.bins.size() == 2);
    const double boundary = cx.bins[1].lo;
    Encoder enc(d.schema, {cx, ct});

    auto probe = make_record("p", "2009-01-01", 0, {boundary}, {"odd"});
    auto v = enc.encode(probe);
    CHECK(v[0] == cx.bins[1].woe);
    CHECK(v[1] == ct.bins[1].woe);

    probe.nominal[0] = "branch-never-seen";
    probe.numeric[0] = std::numeric_limits<double>::quiet_NaN();
    v = enc.encode(probe);
    CHECK(v[1] == ct.average_woe);
    CHECK(v[0] == cx.average_woe);
    CHECK(!enc.bin_index(1, probe).has_value());
  }

  TEST_CASE("other-bin policy routes unfamiliar tokens to Other") {
    std::vector<double> x(300, 1.0);
    std::vector<std::string> t;
    std::vector<int> y;
    for (int i = 0; i < 300; ++i) {
      t.push_back(i % 3 == 0 ? "Other" : (i % 3 == 1 ? "a" : "b"));
      y.push_back(i % 3 == 0 ? (i % 2 == 0) : (i % 5 == 0));
    }
    const auto d = two_column(x, t, y);
    const auto ct = fit_characteristic(d, "t", BinningConfig{});
    Encoder other(d.schema, {ct}, UnfamiliarPolicy::kOtherBin);
    Encoder average(d.schema, {ct}, UnfamiliarPolicy::kAverageWoe);
    const auto probe = make_record("p", "2009-01-01", 0, {1.0}, {"zzz"});
    CHECK(other.encode(probe)[0] == ct.bins[0].woe);
    CHECK(ct.bins[0].classes[0] == "Other");
    CHECK(average.encode(probe)[0] == ct.average_woe);
  }

  TEST_CASE("self-interaction does not lose information") {
    synthgen::PopulationSpec spec;
    spec.n_records = 5000;
    const auto pop = synthgen::generate_population(spec, 21);
    const auto c = fit_characteristic(pop.data, "time_at_employer", BinningConfig{});
    const auto x = build_interaction({c, c}, pop.data, BinningConfig{});
    CHECK(x.name == "time_at_employer*time_at_employer");
    CHECK(x.type == CharacteristicType::kInteraction);
    CHECK(x.iv >= c.iv - 1e-12);
  }

  TEST_CASE("independent interaction has iv near zero") {
    CounterRng rng(77, 1);
    const std::size_t n = 100000;
    std::vector<double> x(n, 0.0);
    std::vector<std::string> a, b;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back("a" + std::to_string(rng.below(4)));
      y.push_back(rng.bernoulli(0.273));
    }
    dataset::Dataset d;
    d.schema.nominal = {"u", "v"};
    for (std::size_t i = 0; i < n; ++i) {
      d.records.push_back(
          make_record(std::to_string(i), "2009-01-01", y[i], {}, {a[i], "b" + std::to_string(rng.below(3))}));
    }
    const auto cu = fit_characteristic(d, "u", BinningConfig{});
    const auto cv = fit_characteristic(d, "v", BinningConfig{});
    const auto x2 = build_interaction({cu, cv}, d, BinningConfig{});
    CHECK(x2.bins.size() == 12);
    CHECK(x2.iv < 0.01);
  }

  TEST_CASE("interaction needs two surviving cells") {
    dataset::Dataset d;
    d.schema.nominal = {"u", "v"};
    for (int i = 0; i < 50; ++i) d.records.push_back(make_record(std::to_string(i), "2009-01-01", i % 2, {}, {"a", "b"}));
    const auto cu = fit_characteristic(d, "u", BinningConfig{});
    const auto cv = fit_characteristic(d, "v", BinningConfig{});
    CHECK_THROWS_AS(build_interaction({cu, cv}, d, BinningConfig{}), Error);
    CHECK_THROWS_AS(build_interaction({cu}, d, BinningConfig{}), Error);
  }

  TEST_CASE("characteristics round-trip through text exactly") {
    synthgen::PopulationSpec spec;
    spec.n_records = 3000;
    const auto pop = synthgen::generate_population(spec, 2);
    std::vector<Characteristic> chars;
    for (const char* a : {"age", "monthly_income", "occupation_code", "gender"}) {
      chars.push_back(fit_characteristic(pop.data, a, BinningConfig{}));
    }
    chars.push_back(build_interaction({chars[1], chars[2]}, pop.data, BinningConfig{}));
    const std::string text = write_characteristics(chars);
    const auto back = read_characteristics(text);
    CHECK(back == chars);
    CHECK(write_characteristics(back) == text);
    CHECK_THROWS_AS(read_characteristics("garbage\n"), ParseError);
  }
}

TEST_SUITE("binning properties") {
  TEST_CASE("fitted characteristics on synthetic data") {
    synthgen::PopulationSpec spec;
    spec.n_records = 6000;
    spec.outlier_rate = 0.05;
    for (std::uint64_t seed : {1u, 2u}) {
      const auto pop = synthgen::generate_population(spec, seed);
      const auto labels = labels_of(pop.data);
      const std::size_t bads = std::accumulate(labels.begin(), labels.end(), std::size_t{0});
      for (const auto& attr : pop.data.schema.all_names()) {
        const auto c = fit_characteristic(pop.data, attr, BinningConfig{});
        CAPTURE(attr);
        std::size_t g = 0, b = 0;
        double gs = 0.0, bs = 0.0, weighted = 0.0;
        std::size_t weight = 0;
        for (const auto& bin : c.bins) {
          g += bin.good;
          b += bin.bad;
          gs += static_cast<double>(bin.good) / static_cast<double>(c.total_good);
          bs += static_cast<double>(bin.bad) / static_cast<double>(c.total_bad);
          if (bin.woe_defined) {
            weighted += static_cast<double>(bin.count()) * bin.woe;
            weight += bin.count();
          }
        }
        CHECK(b == bads);
        CHECK(g == labels.size() - bads);
        CHECK(gs == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(bs == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c.iv >= 0.0);
        if (weight > 0) CHECK(c.average_woe == doctest::Approx(weighted / weight).epsilon(1e-12));

        // Intervals ordered and disjoint.
        for (std::size_t i = 1; i < c.bins.size(); ++i) {
          if (c.bins[i].kind == BinKind::kInterval) CHECK(c.bins[i].lo == c.bins[i - 1].hi);
        }
        // Higher good/bad ratio means higher WoE.
        for (const auto& p : c.bins) {
          for (const auto& q : c.bins) {
            if (!p.woe_defined || !q.woe_defined) continue;
            if (p.good * q.bad > q.good * p.bad) CHECK(p.woe > q.woe);
          }
        }
        // Refit is bit-identical.
        CHECK(fit_characteristic(pop.data, attr, BinningConfig{}) == c);
      }
    }
  }

  TEST_CASE("encode is total and finite") {
    synthgen::PopulationSpec spec;
    spec.n_records = 3000;
    spec.new_code_rate = 0.3;
    const auto pop = synthgen::generate_population(spec, 6);
    const auto fit = dataset::temporal_split(pop.data, dataset::DateWindow{{2009, 1}, {2009, 12}}).inside;
    std::vector<Characteristic> chars;
    for (const auto& attr : pop.data.schema.all_names()) {
      chars.push_back(fit_characteristic(fit, attr, BinningConfig{}));
    }
    Encoder enc(pop.data.schema, chars);
    const auto all = enc.encode_all(pop.data);
    CHECK(all.size() == pop.data.size() * chars.size());
    bool finite = true;
    for (double v : all) finite = finite && std::isfinite(v);
    CHECK(finite);
    CHECK(encode(pop.data.records[0], pop.data.schema, chars) == enc.encode(pop.data.records[0]));
  }
}
