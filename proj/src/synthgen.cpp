#include "scorecard/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "scorecard/random.hpp"

namespace scorecard::synthgen {

namespace {

using dataset::Application;
using dataset::Schema;

constexpr std::uint64_t kLabelSalt = 0x4C4142454C53ULL;
constexpr double kReferenceIncome = 1800.0;
constexpr int kCommonCodes = 40;
constexpr int kNewCodes = 10;
// Codes past this rank are rare enough to fall under the usual merge threshold.
constexpr int kRareRank = 20;

struct State {
  const char* name;
  const char* dialing;
  double effect;
  double share;
};

constexpr State kStates[] = {
    {"SP", "11", 0.0, 0.35}, {"RJ", "21", 0.25, 0.2}, {"MG", "31", -0.1, 0.2}, {"BA", "71", 0.3, 0.15}, {"RS", "51", -0.2, 0.1},
};
constexpr const char* kCities[] = {"Capital", "North Town", "South Town"};
constexpr const char* kNeighborhoods[] = {"Centro", "Jardim", "Vila Nova", "Alto", "Porto", "Lagoa"};

struct Level {
  const char* token;
  double share;
  double effect;
};

constexpr Level kMarital[] = {{"S", 0.4, 0.15}, {"M", 0.45, -0.15}, {"D", 0.1, 0.1}, {"W", 0.05, 0.0}};
constexpr Level kProof[] = {{"payslip", 0.45, -0.2}, {"tax_return", 0.2, -0.1}, {"bank_statement", 0.2, 0.0}, {"none", 0.15, 0.4}};
constexpr Level kHome[] = {{"own", 0.45, -0.2}, {"rent", 0.35, 0.15}, {"family", 0.15, 0.05}, {"other", 0.05, 0.1}};
constexpr Level kDueDay[] = {{"1", 0.15, 0.0}, {"5", 0.2, 0.05}, {"10", 0.25, 0.1}, {"15", 0.2, 0.15}, {"20", 0.1, 0.05}, {"25", 0.1, 0.0}};

template <std::size_t N>
const Level& pick(const Level (&levels)[N], double u) {
  double acc = 0.0;
  for (const auto& l : levels) {
    acc += l.share;
    if (u < acc) return l;
  }
  return levels[N - 1];
}

std::string code(const char* prefix, int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%02d", prefix, k);
  return buf;
}

// Deterministic per-code effect centred on zero.
double code_effect(int k) {
  const double u = static_cast<double>(mix64(static_cast<std::uint64_t>(k) * 0x9E3779B97F4A7C15ULL) >> 11) * 0x1.0p-53;
  return 0.8 * (u - 0.5) + (k > kRareRank ? 0.8 : 0.0);
}

std::vector<double> code_weights() {
  std::vector<double> w(kCommonCodes);
  for (int k = 1; k <= kCommonCodes; ++k) w[static_cast<std::size_t>(k - 1)] = std::pow(k, -1.5);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return w;
}

YearMonth advance(YearMonth ym, std::size_t months) {
  for (std::size_t i = 0; i < months; ++i) ym = ym.next();
  return ym;
}

struct Draw {
  Application record;
  double effect = 0.0;
};

Draw draw_record(const PopulationSpec& spec, const Schema& schema, std::uint64_t seed, std::size_t i,
                 const std::vector<double>& weights) {
  CounterRng rng(seed, i);
  Draw out;
  auto& r = out.record;
  char id[16];
  std::snprintf(id, sizeof id, "A%07zu", i + 1);
  r.id = id;
  const YearMonth ym = advance(spec.start, i * spec.months / spec.n_records);
  const int day = 1 + static_cast<int>(rng.below(28));
  r.application_date = std::chrono::year{ym.year} / std::chrono::month{static_cast<unsigned>(ym.month)} /
                       std::chrono::day{static_cast<unsigned>(day)};
  r.numeric.assign(schema.numeric.size(), std::nan(""));
  r.nominal.assign(schema.nominal.size(), std::string());
  r.binary.assign(schema.binary.size(), dataset::kMissingFlag);
  auto num = [&](std::string_view name) -> double& { return r.numeric[*schema.numeric_index(name)]; };
  auto nom = [&](std::string_view name) -> std::string& { return r.nominal[*schema.nominal_index(name)]; };
  auto bin = [&](std::string_view name) -> int& { return r.binary[*schema.binary_index(name)]; };

  double effect = 0.0;
  const double age = std::clamp(std::round(40.0 + 12.0 * rng.normal()), 18.0, 85.0);
  effect += -0.025 * (age - 40.0);
  num("age") = rng.bernoulli(spec.outlier_rate) ? 988.0 : age;

  const double real_income = std::exp(std::log(kReferenceIncome) + 0.6 * rng.normal());
  effect += -0.6 * std::log(real_income / kReferenceIncome);
  const double inflation = std::pow(1.0 + spec.income_inflation, ym.year - spec.start.year);
  num("monthly_income") = std::round(real_income * inflation * 100.0) / 100.0;

  const double address = std::floor(-60.0 * std::log(rng.uniform_open()));
  effect += -0.004 * std::min(address, 240.0);
  num("time_at_address") = address;
  const double employer = std::floor(-48.0 * std::log(rng.uniform_open()));
  effect += -0.006 * std::min(employer, 200.0);
  num("time_at_employer") = rng.bernoulli(0.01) ? std::nan("") : employer;
  const double dependents = static_cast<double>(rng.below(5));
  effect += 0.08 * dependents;
  num("n_dependents") = dependents;
  const double accounts = static_cast<double>(rng.below(4));
  effect += -0.1 * accounts;
  num("n_accounts") = accounts;

  double u = rng.uniform();
  std::size_t s = 0;
  for (double acc = kStates[0].share; s + 1 < std::size(kStates) && u >= acc; acc += kStates[++s].share) {
  }
  const auto c = rng.below(std::size(kCities));
  const auto n = rng.below(std::size(kNeighborhoods));
  effect += kStates[s].effect + 0.1 * (static_cast<double>(n) - 2.5) / 2.5;
  nom("state") = kStates[s].name;
  std::string city = kCities[c];
  // Occasional formatting noise for the normalizer.
  if (rng.bernoulli(0.03)) {
    std::transform(city.begin(), city.end(), city.begin(), [](unsigned char ch) { return std::toupper(ch); });
    city = "  " + city + " ";
  }
  nom("city") = city;
  nom("neighborhood") = kNeighborhoods[n];
  char zip[16];
  std::snprintf(zip, sizeof zip, "%zu%zu%02zu0", s + 1, c + 1, n + 1);
  nom("zip") = zip;
  nom("dialing_code") = kStates[s].dialing;

  const auto& marital = pick(kMarital, rng.uniform());
  effect += marital.effect;
  nom("marital_status") = marital.token;

  const bool fresh_code = ym >= spec.new_code_start && rng.bernoulli(spec.new_code_rate);
  u = rng.uniform();
  if (fresh_code) {
    nom("occupation_code") = code("new", 1 + static_cast<int>(rng.below(kNewCodes)));
  } else {
    int k = 1;
    double acc = weights[0];
    while (k < kCommonCodes && u >= acc) acc += weights[static_cast<std::size_t>(k++)];
    effect += code_effect(k);
    nom("occupation_code") = code("occ", k);
  }

  const auto& proof = pick(kProof, rng.uniform());
  effect += proof.effect;
  nom("income_proof_type") = proof.token;
  const auto& home = pick(kHome, rng.uniform());
  effect += home.effect;
  nom("home_type") = home.token;
  const auto& due = pick(kDueDay, rng.uniform());
  effect += due.effect;
  nom("due_day") = rng.bernoulli(spec.outlier_rate) ? "35" : due.token;

  const int same_state = rng.bernoulli(0.85);
  const int previous = rng.bernoulli(0.3);
  const int cards = rng.bernoulli(0.4);
  const int gender = rng.bernoulli(0.5);
  effect += -0.2 * same_state - 0.3 * previous - 0.2 * cards + 0.1 * gender;
  bin("lives_works_same_state") = same_state;
  bin("previous_credit") = previous;
  bin("other_cards") = cards;
  bin("gender") = gender;

  out.effect = spec.effect_scale * effect + spec.seasonal[static_cast<std::size_t>(ym.month - 1)];
  return out;
}

double solve_intercept(const std::vector<double>& effects, double base_rate) {
  auto mean_at = [&](double a) {
    double sum = 0.0;
    for (double e : effects) sum += sigmoid(a + e);
    return sum / static_cast<double>(effects.size());
  };
  double lo = -40.0;
  double hi = 40.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (mean_at(mid) < base_rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void PopulationSpec::validate() const {
  if (n_records == 0) throw Error("population: n_records must be positive");
  if (months == 0) throw Error("population: months must be positive");
  if (!(base_rate > 0.0 && base_rate < 1.0)) throw Error("population: base_rate must lie in (0, 1)");
  if (!(new_code_rate >= 0.0 && new_code_rate < 1.0)) throw Error("population: new_code_rate must lie in [0, 1)");
  if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) throw Error("population: outlier_rate must lie in [0, 1)");
  if (!(income_inflation > -1.0)) throw Error("population: income_inflation must exceed -1");
  if (start.month < 1 || start.month > 12) throw Error("population: bad start month");
}

Population generate_population(const PopulationSpec& spec, std::uint64_t seed, std::size_t shards) {
  spec.validate();
  if (shards == 0) throw Error("generate_population: shards must be positive");
  const Schema schema = Schema::credit();
  const auto weights = code_weights();
  Population out;
  out.data.schema = schema;
  out.data.records.resize(spec.n_records);
  std::vector<double> effects(spec.n_records);
  const std::size_t per_shard = (spec.n_records + shards - 1) / shards;
  for (std::size_t shard = 0; shard < shards; ++shard) {
    const std::size_t begin = std::min(spec.n_records, shard * per_shard);
    const std::size_t end = std::min(spec.n_records, begin + per_shard);
    for (std::size_t i = begin; i < end; ++i) {
      auto draw = draw_record(spec, schema, seed, i, weights);
      out.data.records[i] = std::move(draw.record);
      effects[i] = draw.effect;
    }
  }
  out.intercept = solve_intercept(effects, spec.base_rate);
  out.probability.resize(spec.n_records);
  for (std::size_t i = 0; i < spec.n_records; ++i) {
    out.probability[i] = sigmoid(out.intercept + effects[i]);
    CounterRng label_rng(seed ^ kLabelSalt, i);
    out.data.records[i].label = label_rng.bernoulli(out.probability[i]) ? 1 : 0;
  }
  return out;
}

std::map<int, double> deflators(const PopulationSpec& spec) {
  std::map<int, double> out;
  const YearMonth last = advance(spec.start, spec.months - 1);
  for (int y = spec.start.year; y <= last.year; ++y) out[y] = std::pow(1.0 + spec.income_inflation, -(y - spec.start.year));
  return out;
}

models::Design generate_linear_logistic(std::size_t n, const std::vector<double>& coefs, double intercept,
                                        std::uint64_t seed) {
  models::Design d;
  for (std::size_t j = 0; j < coefs.size(); ++j) d.names.push_back("x" + std::to_string(j + 1));
  d.x.reserve(n * coefs.size());
  d.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    double eta = intercept;
    for (double b : coefs) {
      const double x = rng.normal();
      d.x.push_back(x);
      eta += b * x;
    }
    d.y.push_back(rng.bernoulli(sigmoid(eta)) ? 1 : 0);
  }
  return d;
}

void MacroSpec::validate() const {
  if (!(std::abs(target_correlation) <= 1.0)) throw Error("macro: target correlation must lie in [-1, 1]");
  if (!(loading > 0.0)) throw Error("macro: loading must be positive");
  if (!(noise_scale >= 0.0)) throw Error("macro: noise_scale must be non-negative");
  if (!std::isfinite(offset)) throw Error("macro: offset must be finite");
}

calibration::MacroSeries generate_macro(const MacroSpec& spec,
                                        const std::vector<std::pair<calibration::Quarter, double>>& defaults,
                                        std::uint64_t seed) {
  spec.validate();
  const std::size_t n = defaults.size();
  if (n < 3) throw Error("generate_macro: needs at least 3 quarters of default");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = defaults[i].second;
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centred(n);
  double dd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centred[i] = d[i] - mean;
    dd += centred[i] * centred[i];
  }
  if (std::all_of(d.begin(), d.end(), [&](double v) { return v == d.front(); })) {
    throw Error("generate_macro: default series is constant, no correlation can be targeted");
  }

  std::vector<double> shape(n);
  if (spec.noise_scale == 0.0) {
    shape = d;
  } else {
    // Noise orthogonal to the centred default, rescaled to the same norm.
    CounterRng rng(seed, 0);
    std::vector<double> e(n);
    for (auto& v : e) v = rng.normal();
    const double e_mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(n);
    double ed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      e[i] -= e_mean;
      ed += e[i] * centred[i];
    }
    double ee = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      e[i] -= ed / dd * centred[i];
      ee += e[i] * e[i];
    }
    if (!(ee > 1e-300)) throw Error("generate_macro: noise is degenerate for this series");
    const double scale = std::sqrt(dd / ee);
    const double rho = spec.target_correlation;
    const double rest = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t i = 0; i < n; ++i) shape[i] = mean + rho * centred[i] + rest * scale * e[i];
  }
  calibration::MacroSeries out;
  out.name = spec.name;
  for (std::size_t i = 0; i < n; ++i) out.points.emplace_back(defaults[i].first, spec.offset + spec.loading * shape[i]);
  out.validate();
  return out;
}

void DefaultSimSpec::validate() const {
  if (months == 0) throw Error("default simulation: months must be positive");
  if (!(rate > 0.0 && rate < 1.0)) throw Error("default simulation: rate must lie in (0, 1)");
  if (applications_per_month == 0) throw Error("default simulation: applications_per_month must be positive");
  if (!(year_end_uplift > 0.0 && rate * year_end_uplift < 1.0)) throw Error("default simulation: bad uplift");
}

calibration::DefaultSeries simulate_default_series(const DefaultSimSpec& spec, std::uint64_t seed) {
  spec.validate();
  calibration::DefaultSeries out;
  YearMonth ym = spec.start;
  for (std::size_t t = 0; t < spec.months; ++t, ym = ym.next()) {
    const bool uplift = std::find(spec.uplift_months.begin(), spec.uplift_months.end(), ym.month) != spec.uplift_months.end();
    const double p = uplift ? spec.rate * spec.year_end_uplift : spec.rate;
    CounterRng rng(seed, t);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < spec.applications_per_month; ++i) bad += rng.bernoulli(p);
    out.monthly.emplace_back(ym, static_cast<double>(bad) / static_cast<double>(spec.applications_per_month));
  }
  return out;
}

namespace {

boost::property_tree::ptree parse_ini(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return tree;
}

template <typename T>
void read_number(const boost::property_tree::ptree& section, const char* key, T& out) {
  const auto value = section.get_optional<std::string>(key);
  if (!value) return;
  double v = 0.0;
  if (!parse_double(trim(*value), v)) throw ParseError(std::string("config: bad number for ") + key);
  if constexpr (std::is_integral_v<T>) {
    if (v < 0 || v != std::floor(v)) throw ParseError(std::string("config: ") + key + " must be a non-negative integer");
  }
  out = static_cast<T>(v);
}

}  // namespace

PopulationSpec read_population_spec(const std::string& text) {
  const auto tree = parse_ini(text);
  PopulationSpec spec;
  const auto section = tree.get_child_optional("population");
  if (!section) return spec;
  read_number(*section, "n_records", spec.n_records);
  read_number(*section, "months", spec.months);
  read_number(*section, "base_rate", spec.base_rate);
  read_number(*section, "effect_scale", spec.effect_scale);
  read_number(*section, "income_inflation", spec.income_inflation);
  read_number(*section, "new_code_rate", spec.new_code_rate);
  read_number(*section, "outlier_rate", spec.outlier_rate);
  if (const auto v = section->get_optional<std::string>("start")) spec.start = YearMonth::parse(trim(*v));
  if (const auto v = section->get_optional<std::string>("new_code_start")) spec.new_code_start = YearMonth::parse(trim(*v));
  if (const auto v = section->get_optional<std::string>("seasonal")) {
    const auto parts = split(*v, ',');
    if (parts.size() != 12) throw ParseError("config: seasonal needs twelve comma-separated offsets");
    for (std::size_t m = 0; m < 12; ++m) {
      if (!parse_double(trim(parts[m]), spec.seasonal[m])) throw ParseError("config: bad seasonal offset");
    }
  }
  spec.validate();
  return spec;
}

MacroSpec read_macro_spec(const std::string& text) {
  const auto tree = parse_ini(text);
  MacroSpec spec;
  const auto section = tree.get_child_optional("macro");
  if (!section) return spec;
  if (const auto v = section->get_optional<std::string>("name")) spec.name = std::string(trim(*v));
  read_number(*section, "loading", spec.loading);
  read_number(*section, "offset", spec.offset);
  read_number(*section, "noise_scale", spec.noise_scale);
  read_number(*section, "target_correlation", spec.target_correlation);
  spec.validate();
  return spec;
}

}  // namespace scorecard::synthgen
