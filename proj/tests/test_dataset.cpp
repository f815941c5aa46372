#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "scorecard/dataset.hpp"
#include "scorecard/synthgen.hpp"
#include "support.hpp"

using namespace scorecard;
using namespace scorecard::dataset;
using testing::make_record;

namespace {

Schema small_schema() {
  Schema s;
  s.numeric = {"age", "monthly_income"};
  s.nominal = {"state", "city", "neighborhood", "due_day"};
  s.binary = {"gender"};
  return s;
}

const char* kHeader = "id,application_date,label,age,monthly_income,state,city,neighborhood,due_day,gender\n";

ParseResult parse_text(const std::string& text, const Schema& schema = small_schema()) {
  std::istringstream in(text);
  return parse_dataset(in, schema);
}

Dataset neighborhood_sample(std::size_t n_a, std::size_t n_b) {
  Dataset d;
  d.schema = small_schema();
  std::size_t id = 0;
  auto add = [&](const std::string& hood, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i, ++id) {
      d.records.push_back(make_record("r" + std::to_string(id), "2009-03-01", static_cast<int>(i % 2),
                                      {30.0, 1000.0}, {"sp", "campinas", hood, "10"}, {1}));
    }
  };
  add("centro", n_a);
  add("jardim", n_b);
  return d;
}

CleansingPolicy plain_policy() {
  CleansingPolicy p;
  p.build_geography = false;
  return p;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("well-formed rows parse without diagnostics") {
    const std::string text = std::string(kHeader) +
                             "a,2009-01-05,0,31,1200,sp,campinas,centro,10,1\n"
                             "b,2009-02-05,1,45,900,rj,niteroi,icarai,5,0\n"
                             "c,2010-03-05,,27,,mg,bh,savassi,,\n";
    const auto r = parse_text(text);
    CHECK(r.data.size() == 3);
    CHECK(r.diagnostics.empty());
    CHECK(r.data.records[0].numeric[0] == 31.0);
    CHECK(!r.data.records[2].label.has_value());
    CHECK(is_missing(r.data.records[2].numeric[1]));
    CHECK(r.data.records[2].binary[0] == kMissingFlag);
    CHECK(r.data.records[2].nominal[3].empty());
  }

  TEST_CASE("unparseable number becomes missing with one diagnostic") {
    const auto r = parse_text(std::string(kHeader) + "a,2009-01-05,0,abc,1200,sp,campinas,centro,10,1\n");
    REQUIRE(r.data.size() == 1);
    CHECK(is_missing(r.data.records[0].numeric[0]));
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].column == "age");
    CHECK(r.diagnostics[0].line == 2);
  }

  TEST_CASE("header only gives an empty dataset") {
    const auto r = parse_text(kHeader);
    CHECK(r.data.size() == 0);
    CHECK(r.diagnostics.empty());
  }

  TEST_CASE("malformed header is fatal") {
    CHECK_THROWS_AS(parse_text("id,application_date,label,age\n"), ParseError);
    CHECK_THROWS_AS(parse_text(std::string("bogus,") + kHeader), ParseError);
    CHECK_THROWS_AS(parse_text(""), ParseError);
  }

  TEST_CASE("rows that cannot form a record are skipped") {
    const std::string text = std::string(kHeader) +
                             "a,2009-01-05,0,31,1200,sp,campinas,centro,10,1\n"
                             "a,2009-01-06,0,31,1200,sp,campinas,centro,10,1\n"
                             "b,not-a-date,0,31,1200,sp,campinas,centro,10,1\n"
                             "c,2009-01-05,0,31\n";
    const auto r = parse_text(text);
    CHECK(r.data.size() == 1);
    CHECK(r.diagnostics.size() == 3);
  }

  TEST_CASE("tab delimiter and column order") {
    std::istringstream in(
        "label\tid\tgender\tapplication_date\tage\tmonthly_income\tstate\tcity\tneighborhood\tdue_day\n"
        "1\tx\t0\t2011-07-01\t50\t2000\tsp\tsantos\tgonzaga\t3\n");
    ParseOptions options;
    options.delimiter = '\t';
    const auto r = parse_dataset(in, small_schema(), options);
    REQUIRE(r.data.size() == 1);
    CHECK(r.data.records[0].id == "x");
    CHECK(*r.data.records[0].label == 1);
    CHECK(r.data.records[0].numeric[1] == 2000.0);
  }

  TEST_CASE("write then parse round-trips exactly") {
    synthgen::PopulationSpec spec;
    spec.n_records = 300;
    const auto pop = synthgen::generate_population(spec, 11);
    std::istringstream in(write_dataset(pop.data));
    const auto back = parse_dataset(in, pop.data.schema);
    CHECK(back.diagnostics.empty());
    REQUIRE(back.data.size() == pop.data.size());
    for (std::size_t i = 0; i < back.data.size(); ++i) {
      const auto& a = back.data.records[i];
      const auto& b = pop.data.records[i];
      CHECK(a.id == b.id);
      CHECK(a.nominal == b.nominal);
      CHECK(a.binary == b.binary);
      CHECK(a.label == b.label);
      for (std::size_t v = 0; v < a.numeric.size(); ++v) {
        CHECK((a.numeric[v] == b.numeric[v] || (is_missing(a.numeric[v]) && is_missing(b.numeric[v]))));
      }
    }
  }

  TEST_CASE("age 988 is out of range and becomes missing") {
    Dataset d = neighborhood_sample(3, 0);
    d.records[1].numeric[0] = 988.0;
    const auto r = cleanse(d, plain_policy());
    CHECK(is_missing(r.data.records[1].numeric[0]));
    CHECK(r.data.records[0].numeric[0] == 30.0);
    CHECK(r.report.count("age", Disposition::kOutOfRange) == 1);
  }

  TEST_CASE("due day 35 is out of range and becomes missing") {
    Dataset d = neighborhood_sample(3, 0);
    d.records[2].nominal[3] = "35";
    CleansingPolicy p = plain_policy();
    p.rare_class_threshold = 0;
    const auto r = cleanse(d, p);
    CHECK(r.data.records[2].nominal[3].empty());
    CHECK(r.report.count("due_day", Disposition::kOutOfRange) == 1);
    CHECK(r.data.records[0].nominal[3] == "10");
  }

  TEST_CASE("class with 100 records merges to Other, 101 survives") {
    const auto r = cleanse(neighborhood_sample(100, 101), plain_policy());
    std::set<std::string> tokens;
    for (const auto& rec : r.data.records) tokens.insert(rec.nominal[2]);
    CHECK(tokens == std::set<std::string>{"Other", "jardim"});
    CHECK(r.report.count("neighborhood", Disposition::kMergedToOther) == 100);
  }

  TEST_CASE("normalization folds case and whitespace and strips the separator") {
    CHECK(normalize_token("  Sao   PAULO ") == "sao paulo");
    CHECK(normalize_token("a|b") == "ab");
    CHECK(normalize_token("   ").empty());
  }

  TEST_CASE("geography concatenates the three location tokens") {
    Dataset d = neighborhood_sample(2, 0);
    d.records[1].nominal[1] = " CAMPINAS";
    CleansingPolicy p;
    p.rare_class_threshold = 0;
    const auto r = cleanse(d, p);
    const auto g = r.data.schema.nominal_index("geography");
    REQUIRE(g.has_value());
    CHECK(r.data.records[0].nominal[*g] == "sp|campinas|centro");
    CHECK(r.data.records[1].nominal[*g] == "sp|campinas|centro");
    CHECK(r.report.count("city", Disposition::kNormalized) == 1);
  }

  TEST_CASE("vocabulary comes from the modeling sample only") {
    const Dataset modeling = neighborhood_sample(150, 20);
    Dataset holdout = neighborhood_sample(0, 300);
    holdout.records[0].nominal[2] = "novo";
    const auto model = fit_cleansing(modeling, plain_policy());
    const auto r = apply_cleansing(holdout, model);
    CHECK(r.data.records[0].nominal[2] == "novo");
    CHECK(r.data.records[1].nominal[2] == "Other");
  }

  TEST_CASE("invalid policy is rejected") {
    CleansingPolicy p;
    p.age_valid_range = {50.0, 10.0};
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK_THROWS_AS(cleanse(neighborhood_sample(1, 1), p), Error);
  }

  TEST_CASE("adjust_income multiplies by the year factor") {
    Dataset d = neighborhood_sample(3, 0);
    d.records[2].numeric[1] = std::numeric_limits<double>::quiet_NaN();
    const auto same = adjust_income(d, {{2009, 1.00}});
    const auto up = adjust_income(d, {{2009, 1.06}});
    const auto idx = *up.schema.numeric_index("income_adjusted");
    CHECK(same.records[0].numeric[idx] == 1000.0);
    CHECK(up.records[0].numeric[idx] == 1060.0);
    CHECK(is_missing(up.records[2].numeric[idx]));
    CHECK(up.size() == d.size());
    CHECK(up.records[0].numeric[1] == 1000.0);
  }

  TEST_CASE("adjust_income names every year without a factor") {
    Dataset d = neighborhood_sample(1, 0);
    d.records.push_back(make_record("z", "2011-05-01", 0, {30.0, 1.0}, {"a", "b", "c", "1"}, {0}));
    try {
      (void)adjust_income(d, {{2010, 1.0}});
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string what = e.what();
      CHECK(what.find("2009") != std::string::npos);
      CHECK(what.find("2011") != std::string::npos);
    }
  }

  TEST_CASE("temporal windows") {
    Dataset d;
    d.schema = small_schema();
    for (int y = 2009; y <= 2010; ++y) {
      for (int m = 1; m <= 12; ++m) {
        d.records.push_back(make_record(std::to_string(y * 100 + m), testing::month_date(y, m), 0, {30.0, 1.0},
                                        {"a", "b", "c", "1"}, {0}));
      }
    }
    CHECK(temporal_split(d, DateWindow{{2009, 1}, {2010, 12}}).inside.size() == 24);

    const auto q4 = temporal_split(d, parse_window("2010-10..2010-12"));
    REQUIRE(q4.inside.size() == 3);
    for (const auto& r : q4.inside.records) {
      CHECK(r.period().year == 2010);
      CHECK(r.period().month >= 10);
    }

    const auto march = temporal_split(d, parse_window("months=3"));
    REQUIRE(march.inside.size() == 2);
    for (const auto& r : march.inside.records) CHECK(r.period().month == 3);

    const auto none = temporal_split(d, parse_window("2015-01..2015-02"));
    CHECK(none.inside.size() == 0);
    CHECK(!none.warning.empty());
  }

  TEST_CASE("window text round-trips and rejects nonsense") {
    CHECK(format_window(parse_window("2010-10..2010-12")) == "2010-10..2010-12");
    CHECK(format_window(parse_window("months=4,3")) == "months=3,4");
    CHECK_THROWS_AS(parse_window("2010-12..2010-01"), ParseError);
    CHECK_THROWS_AS(parse_window("months=13"), ParseError);
    CHECK_THROWS_AS(parse_window("yesterday"), ParseError);
  }
}

TEST_SUITE("dataset properties") {
  TEST_CASE("cleanse is idempotent and preserves record count") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      synthgen::PopulationSpec spec;
      spec.n_records = 3000;
      spec.outlier_rate = 0.05;
      const auto pop = synthgen::generate_population(spec, seed);
      CleansingPolicy p;
      p.rare_class_threshold = 15;
      const auto once = cleanse(pop.data, p);
      const auto twice = cleanse(once.data, p);
      CHECK(once.data.size() == pop.data.size());
      CHECK(twice.data.schema == once.data.schema);
      REQUIRE(twice.data.size() == once.data.size());
      bool same = true;
      for (std::size_t i = 0; i < once.data.size(); ++i) {
        const auto& a = once.data.records[i];
        const auto& b = twice.data.records[i];
        same = same && a.nominal == b.nominal && a.binary == b.binary;
        for (std::size_t v = 0; v < a.numeric.size(); ++v) {
          same = same && (a.numeric[v] == b.numeric[v] || (is_missing(a.numeric[v]) && is_missing(b.numeric[v])));
        }
      }
      CHECK(same);
    }
  }

  TEST_CASE("surviving classes exceed the threshold in the fitting sample") {
    synthgen::PopulationSpec spec;
    spec.n_records = 4000;
    const auto pop = synthgen::generate_population(spec, 5);
    CleansingPolicy p;
    p.rare_class_threshold = 25;
    const auto r = cleanse(pop.data, p);
    for (std::size_t v = 0; v < r.data.schema.nominal.size(); ++v) {
      std::map<std::string, std::size_t> counts;
      for (const auto& rec : r.data.records) {
        if (!rec.nominal[v].empty()) ++counts[rec.nominal[v]];
      }
      for (const auto& [token, n] : counts) {
        if (token != "Other") CHECK_MESSAGE(n > 25, r.data.schema.nominal[v] << " " << token);
      }
    }
  }

  TEST_CASE("report counts never exceed the record count") {
    synthgen::PopulationSpec spec;
    spec.n_records = 2000;
    spec.outlier_rate = 0.2;
    const auto pop = synthgen::generate_population(spec, 9);
    const auto r = cleanse(pop.data, CleansingPolicy{});
    for (const auto& [variable, by] : r.report.counts) {
      std::size_t total = 0;
      for (const auto& [d, n] : by) total += n;
      CHECK(total <= pop.data.size());
    }
  }

  TEST_CASE("shard reports merge to the whole report in any order") {
    synthgen::PopulationSpec spec;
    spec.n_records = 1500;
    const auto pop = synthgen::generate_population(spec, 4);
    const auto model = fit_cleansing(pop.data, CleansingPolicy{});
    const auto whole = apply_cleansing(pop.data, model).report;
    std::vector<CleansingReport> parts;
    for (std::size_t s = 0; s < 3; ++s) {
      Dataset shard;
      shard.schema = pop.data.schema;
      for (std::size_t i = s * 500; i < (s + 1) * 500; ++i) shard.records.push_back(pop.data.records[i]);
      parts.push_back(apply_cleansing(shard, model).report);
    }
    CleansingReport forward, backward;
    for (const auto& p : parts) forward.merge(p);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) backward.merge(*it);
    CHECK(forward.to_text() == whole.to_text());
    CHECK(backward.to_text() == whole.to_text());
  }

  TEST_CASE("temporal split is a disjoint cover") {
    synthgen::PopulationSpec spec;
    spec.n_records = 1000;
    const auto pop = synthgen::generate_population(spec, 8);
    for (const char* w : {"2009-06..2010-02", "months=1,7,12", "2011-01..2011-12"}) {
      const auto p = temporal_split(pop.data, parse_window(w));
      CHECK(p.inside.size() + p.outside.size() == pop.data.size());
      std::set<std::string> ids;
      for (const auto& r : p.inside.records) ids.insert(r.id);
      for (const auto& r : p.outside.records) CHECK(ids.insert(r.id).second);
      CHECK(ids.size() == pop.data.size());
    }
  }
}
