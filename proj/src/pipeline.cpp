#include "scorecard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "scorecard/evaluation.hpp"

namespace scorecard::pipeline {

namespace fs = std::filesystem;
using boost::property_tree::ptree;
using dataset::Dataset;

namespace {

const std::vector<std::string> kDefaultAttributes = {
    "age",          "income_adjusted",   "time_at_address", "time_at_employer",       "n_dependents",
    "n_accounts",   "geography",         "marital_status",  "occupation_code",        "income_proof_type",
    "home_type",    "due_day",           "previous_credit", "lives_works_same_state", "other_cards",
};

std::optional<std::string> get(const ptree& tree, const std::string& path) {
  const auto v = tree.get_optional<std::string>(ptree::path_type(path, '.'));
  if (!v) return std::nullopt;
  return std::string(trim(*v));
}

double get_number(const ptree& tree, const std::string& path, double fallback) {
  const auto v = get(tree, path);
  if (!v) return fallback;
  double out = 0.0;
  if (!parse_double(*v, out)) throw ParseError("config: " + path + " is not a number ('" + *v + "')");
  return out;
}

std::uint64_t get_count(const ptree& tree, const std::string& path, std::uint64_t fallback) {
  const auto v = get(tree, path);
  if (!v) return fallback;
  long long out = 0;
  if (!parse_int(*v, out) || out < 0) throw ParseError("config: " + path + " must be a non-negative integer");
  return static_cast<std::uint64_t>(out);
}

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  throw ParseError("config: " + what + " must be true or false");
}

bool get_bool(const ptree& tree, const std::string& path, bool fallback) {
  const auto v = get(tree, path);
  return v ? parse_bool(*v, path) : fallback;
}

std::vector<std::string> list_of(const std::string& text, char delimiter = ',') {
  std::vector<std::string> out;
  for (const auto& part : split(text, delimiter)) {
    const auto t = std::string(trim(part));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

dataset::DateWindow date_window(const std::string& text) {
  const auto w = dataset::parse_window(text);
  if (!std::holds_alternative<dataset::DateWindow>(w)) throw ParseError("config: expected a YYYY-MM..YYYY-MM window");
  return std::get<dataset::DateWindow>(w);
}

std::map<int, double> parse_factors(const std::string& text) {
  std::map<int, double> out;
  for (const auto& item : list_of(text)) {
    const auto kv = split(item, '=');
    long long year = 0;
    double factor = 0.0;
    if (kv.size() != 2 || !parse_int(trim(kv[0]), year) || !parse_double(trim(kv[1]), factor)) {
      throw ParseError("config: inflation factor '" + item + "' is not YEAR=FACTOR");
    }
    out[static_cast<int>(year)] = factor;
  }
  return out;
}

std::string window_text(const dataset::DateWindow& w) { return w.from.str() + ".." + w.to.str(); }

fs::path out_path(const PipelineConfig& config, const char* name) { return config.output_dir / name; }

void ensure_output(const PipelineConfig& config) { fs::create_directories(config.output_dir); }

void require(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) throw Error(stage + ": input " + path.string() + " does not exist");
}

Dataset read_stage_dataset(const fs::path& path, const std::string& stage) {
  require(path, stage);
  return read_dataset_file(path).data;
}

Scorecard read_card(const PipelineConfig& config, const std::string& stage) {
  const auto path = out_path(config, files::kScorecard);
  require(path, stage);
  return read_scorecard(read_file(path));
}

/// The spec a saved scorecard was built from.
ScorecardSpec spec_of(const Scorecard& card, const PipelineConfig& config) {
  ScorecardSpec spec;
  spec.binning = config.spec.binning;
  spec.unfamiliar = card.unfamiliar;
  for (const auto& c : card.characteristics) {
    if (c.type == binning::CharacteristicType::kInteraction) {
      std::vector<std::string> group;
      for (const auto& component : c.components) group.push_back(component.attribute);
      spec.interactions.push_back(group);
    } else {
      spec.attributes.push_back(c.attribute);
    }
  }
  return spec;
}

bool fully_labeled(const Dataset& data) {
  bool good = false;
  bool bad = false;
  for (const auto& r : data.records) {
    if (!r.label) return false;
    (*r.label ? bad : good) = true;
  }
  return good && bad;
}

std::vector<fs::path> macro_paths(const PipelineConfig& config) {
  if (!config.macro.empty()) return config.macro;
  return {config.output_dir / ("macro_" + config.macro_spec.name + ".csv"), config.output_dir / "macro_noise_index.csv"};
}

std::string series_name(const fs::path& path) {
  auto stem = path.stem().string();
  if (stem.rfind("macro_", 0) == 0) stem = stem.substr(6);
  return stem;
}

fs::path defaults_path(const PipelineConfig& config) {
  return config.defaults ? *config.defaults : out_path(config, files::kDefaults);
}

struct ForecastFile {
  std::vector<std::pair<dataset::YearMonth, double>> estimates;
};

ForecastFile read_forecast_file(const fs::path& path) {
  ForecastFile out;
  bool header = true;
  for (const auto& line : split(read_file(path), '\n')) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f[0] == "summary") break;
    double v = 0.0;
    if (f.size() < 2 || !parse_double(f[1], v)) throw ParseError("forecast file: bad row '" + line + "'");
    out.estimates.emplace_back(dataset::YearMonth::parse(f[0]), v);
  }
  if (out.estimates.size() != 12) throw ParseError("forecast file: expected twelve monthly rows");
  return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  if (!fs::exists(path)) return rows;
  for (const auto& line : split(read_file(path), '\n')) {
    if (!line.empty()) rows.push_back(split(line, ','));
  }
  return rows;
}

}  // namespace

PipelineConfig::PipelineConfig() { spec.attributes = kDefaultAttributes; }

void PipelineConfig::validate() const {
  population.validate();
  macro_spec.validate();
  cleansing.validate();
  spec.binning.validate();
  strategy.validate();
  scenario.validate();
  trainer.logistic.validate();
  if (trainer.rounds < 1) throw Error("config: model.rounds must be at least 1");
  if (cv_k < 2) throw Error("config: cv.k must be at least 2");
  if (modeling.to < modeling.from || holdout.to < holdout.from) throw Error("config: empty split window");
  if (cutoff && !(*cutoff > 0.0 && *cutoff < 1.0)) throw Error("config: calibration.cutoff must lie in (0, 1)");
  if (spec.attributes.empty() && spec.interactions.empty()) throw Error("config: model.attributes is empty");
}

ScorecardSpec PipelineConfig::effective_spec() const {
  ScorecardSpec out = spec;
  if (adjust_income) return out;
  const std::string adjusted(dataset::kAdjustedIncome);
  for (auto& a : out.attributes) {
    if (a == adjusted) a = "monthly_income";
  }
  for (auto& group : out.interactions) {
    for (auto& a : group) {
      if (a == adjusted) a = "monthly_income";
    }
  }
  return out;
}

std::map<int, double> PipelineConfig::effective_factors() const {
  return inflation_factors.empty() ? synthgen::deflators(population) : inflation_factors;
}

PipelineConfig load_config(const std::string& ini_text) {
  ptree tree;
  {
    std::istringstream in(ini_text);
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
  }
  PipelineConfig c;
  if (const auto v = get(tree, "paths.output")) c.output_dir = *v;
  if (const auto v = get(tree, "paths.data")) c.data = fs::path(*v);
  if (const auto v = get(tree, "paths.defaults")) c.defaults = fs::path(*v);
  if (const auto v = get(tree, "paths.macro")) {
    for (const auto& p : list_of(*v)) c.macro.emplace_back(p);
  }
  c.seed = get_count(tree, "run.seed", c.seed);

  c.population = synthgen::read_population_spec(ini_text);
  c.macro_spec = synthgen::read_macro_spec(ini_text);

  if (const auto v = get(tree, "split.modeling")) c.modeling = date_window(*v);
  if (const auto v = get(tree, "split.holdout")) c.holdout = date_window(*v);

  auto& p = c.cleansing;
  p.age_valid_range = {get_number(tree, "cleansing.age_min", p.age_valid_range.min),
                       get_number(tree, "cleansing.age_max", p.age_valid_range.max)};
  p.due_day_valid_range = {get_number(tree, "cleansing.due_day_min", p.due_day_valid_range.min),
                           get_number(tree, "cleansing.due_day_max", p.due_day_valid_range.max)};
  p.income_valid_range = {get_number(tree, "cleansing.income_min", p.income_valid_range.min),
                          get_number(tree, "cleansing.income_max", p.income_valid_range.max)};
  p.rare_class_threshold = get_count(tree, "cleansing.rare_class_threshold", p.rare_class_threshold);
  p.text_normalization = get_bool(tree, "cleansing.text_normalization", p.text_normalization);
  p.build_geography = get_bool(tree, "cleansing.geography", p.build_geography);

  c.adjust_income = get_bool(tree, "inflation.adjust", c.adjust_income);
  if (const auto v = get(tree, "inflation.factors")) c.inflation_factors = parse_factors(*v);

  auto& b = c.spec.binning;
  b.max_pre_bins = get_count(tree, "binning.max_pre_bins", b.max_pre_bins);
  b.min_bin_fraction = get_number(tree, "binning.min_bin_fraction", b.min_bin_fraction);
  b.chi_square_threshold = get_number(tree, "binning.chi_square_threshold", b.chi_square_threshold);
  b.monotonic_woe = get_bool(tree, "binning.monotonic_woe", b.monotonic_woe);

  if (const auto v = get(tree, "model.attributes")) c.spec.attributes = list_of(*v);
  if (const auto v = get(tree, "model.interactions")) {
    for (const auto& group : list_of(*v, ';')) c.spec.interactions.push_back(list_of(group, '*'));
  }
  if (const auto v = get(tree, "model.unfamiliar")) {
    if (*v == "average_woe") c.spec.unfamiliar = binning::UnfamiliarPolicy::kAverageWoe;
    else if (*v == "other_bin") c.spec.unfamiliar = binning::UnfamiliarPolicy::kOtherBin;
    else throw ParseError("config: model.unfamiliar must be average_woe or other_bin");
  }
  if (const auto v = get(tree, "model.trainer")) c.trainer.kind = parse_trainer(*v);
  c.trainer.rounds = get_count(tree, "model.rounds", c.trainer.rounds);
  c.trainer.logistic.ridge = get_number(tree, "model.ridge", c.trainer.logistic.ridge);
  c.trainer.logistic.tolerance = get_number(tree, "model.tolerance", c.trainer.logistic.tolerance);
  c.trainer.logistic.max_iterations = get_count(tree, "model.max_iterations", c.trainer.logistic.max_iterations);
  if (const auto v = get(tree, "model.strategy")) c.strategy.kind = parse_strategy(*v);
  if (const auto v = get(tree, "model.window")) c.strategy.window = dataset::parse_window(*v);
  c.strategy.threshold = get_number(tree, "model.threshold", c.strategy.threshold);
  if (const auto v = get(tree, "model.combine")) {
    if (*v == "route") c.strategy.rule = models::CombineRule::kRouteByMonth;
    else if (*v == "average") c.strategy.rule = models::CombineRule::kAverage;
    else throw ParseError("config: model.combine must be route or average");
  }
  c.select = get_bool(tree, "model.select", c.select);
  c.select_epsilon = get_number(tree, "model.select_epsilon", c.select_epsilon);

  c.cv_k = get_count(tree, "cv.k", c.cv_k);
  c.cv_seed = get_count(tree, "cv.seed", c.cv_seed);

  c.scenario.variant = static_cast<int>(get_count(tree, "calibration.scenario", 2));
  c.scenario.uplift_factor = get_number(tree, "calibration.uplift_factor", c.scenario.uplift_factor);
  if (const auto v = get(tree, "calibration.uplift_months")) {
    c.scenario.uplift_months.clear();
    for (const auto& m : list_of(*v)) {
      long long month = 0;
      if (!parse_int(m, month)) throw ParseError("config: bad uplift month '" + m + "'");
      c.scenario.uplift_months.insert(static_cast<int>(month));
    }
  }
  c.forecast_year = static_cast<int>(get_count(tree, "calibration.forecast_year", static_cast<std::uint64_t>(c.forecast_year)));
  if (const auto v = get(tree, "calibration.shift")) {
    if (*v == "auto") c.shift = ShiftMode::kAuto;
    else if (*v == "global") c.shift = ShiftMode::kGlobal;
    else if (*v == "monthly") c.shift = ShiftMode::kMonthly;
    else throw ParseError("config: calibration.shift must be auto, global or monthly");
  }
  if (const auto v = get(tree, "calibration.cutoff")) {
    double cutoff = 0.0;
    if (!parse_double(*v, cutoff)) throw ParseError("config: calibration.cutoff is not a number");
    c.cutoff = cutoff;
  }
  if (const auto v = get(tree, "report.formats")) {
    for (const auto& f : list_of(*v)) {
      if (f == "json") c.report_json = true;
      else if (f != "text") throw ParseError("config: unknown report format '" + f + "'");
    }
  }
  return c;
}

std::string render_config(const PipelineConfig& c) {
  std::ostringstream out;
  auto num = [](double v) { return format_double(v); };
  auto flag = [](bool v) { return v ? "true" : "false"; };
  out << "[paths]\noutput = " << c.output_dir.string() << "\n";
  if (c.data) out << "data = " << c.data->string() << "\n";
  if (c.defaults) out << "defaults = " << c.defaults->string() << "\n";
  if (!c.macro.empty()) {
    std::vector<std::string> m;
    for (const auto& p : c.macro) m.push_back(p.string());
    out << "macro = " << join(m, ",") << "\n";
  }
  out << "\n[run]\nseed = " << c.seed << "\n";
  const auto& pop = c.population;
  std::vector<std::string> seasonal;
  for (double s : pop.seasonal) seasonal.push_back(num(s));
  out << "\n[population]\nn_records = " << pop.n_records << "\nstart = " << pop.start.str() << "\nmonths = " << pop.months
      << "\nbase_rate = " << num(pop.base_rate) << "\neffect_scale = " << num(pop.effect_scale)
      << "\nseasonal = " << join(seasonal, ",") << "\nincome_inflation = " << num(pop.income_inflation)
      << "\nnew_code_rate = " << num(pop.new_code_rate) << "\nnew_code_start = " << pop.new_code_start.str()
      << "\noutlier_rate = " << num(pop.outlier_rate) << "\n";
  out << "\n[macro]\nname = " << c.macro_spec.name << "\nloading = " << num(c.macro_spec.loading)
      << "\noffset = " << num(c.macro_spec.offset) << "\nnoise_scale = " << num(c.macro_spec.noise_scale)
      << "\ntarget_correlation = " << num(c.macro_spec.target_correlation) << "\n";
  out << "\n[split]\nmodeling = " << window_text(c.modeling) << "\nholdout = " << window_text(c.holdout) << "\n";
  const auto& p = c.cleansing;
  out << "\n[cleansing]\nage_min = " << num(p.age_valid_range.min) << "\nage_max = " << num(p.age_valid_range.max)
      << "\ndue_day_min = " << num(p.due_day_valid_range.min) << "\ndue_day_max = " << num(p.due_day_valid_range.max)
      << "\nincome_min = " << num(p.income_valid_range.min) << "\nincome_max = " << num(p.income_valid_range.max)
      << "\nrare_class_threshold = " << p.rare_class_threshold << "\ntext_normalization = " << flag(p.text_normalization)
      << "\ngeography = " << flag(p.build_geography) << "\n";
  std::vector<std::string> factors;
  for (const auto& [y, f] : c.effective_factors()) factors.push_back(std::to_string(y) + "=" + num(f));
  out << "\n[inflation]\nadjust = " << flag(c.adjust_income) << "\nfactors = " << join(factors, ",") << "\n";
  const auto& b = c.spec.binning;
  out << "\n[binning]\nmax_pre_bins = " << b.max_pre_bins << "\nmin_bin_fraction = " << num(b.min_bin_fraction)
      << "\nchi_square_threshold = " << num(b.chi_square_threshold) << "\nmonotonic_woe = " << flag(b.monotonic_woe) << "\n";
  std::vector<std::string> groups;
  for (const auto& g : c.spec.interactions) groups.push_back(join(g, "*"));
  out << "\n[model]\nattributes = " << join(c.spec.attributes, ",") << "\ninteractions = " << join(groups, ";")
      << "\nunfamiliar = " << (c.spec.unfamiliar == binning::UnfamiliarPolicy::kOtherBin ? "other_bin" : "average_woe")
      << "\ntrainer = " << trainer_name(c.trainer.kind) << "\nrounds = " << c.trainer.rounds
      << "\nridge = " << num(c.trainer.logistic.ridge) << "\ntolerance = " << num(c.trainer.logistic.tolerance)
      << "\nmax_iterations = " << c.trainer.logistic.max_iterations << "\nstrategy = " << strategy_name(c.strategy.kind)
      << "\n";
  if (c.strategy.window) out << "window = " << dataset::format_window(*c.strategy.window) << "\n";
  out << "threshold = " << num(c.strategy.threshold)
      << "\ncombine = " << (c.strategy.rule == models::CombineRule::kAverage ? "average" : "route")
      << "\nselect = " << flag(c.select) << "\nselect_epsilon = " << num(c.select_epsilon) << "\n";
  out << "\n[cv]\nk = " << c.cv_k << "\nseed = " << c.cv_seed << "\n";
  std::vector<std::string> months;
  for (int m : c.scenario.uplift_months) months.push_back(std::to_string(m));
  out << "\n[calibration]\nscenario = " << c.scenario.variant << "\nuplift_factor = " << num(c.scenario.uplift_factor)
      << "\nuplift_months = " << join(months, ",") << "\nforecast_year = " << c.forecast_year << "\nshift = "
      << (c.shift == ShiftMode::kGlobal ? "global" : c.shift == ShiftMode::kMonthly ? "monthly" : "auto") << "\n";
  if (c.cutoff) out << "cutoff = " << num(*c.cutoff) << "\n";
  out << "\n[report]\nformats = " << (c.report_json ? "text,json" : "text") << "\n";
  return out.str();
}

std::string Summary::json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["status"] = "ok";
  for (const auto& [k, v] : fields) std::visit([&, &key = k](const auto& x) { j[key] = x; }, v);
  return j.dump();
}

dataset::ParseResult read_dataset_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  dataset::Schema schema = dataset::Schema::credit();
  for (const auto& raw : split(header, ',')) {
    const auto name = std::string(trim(raw));
    if (name == dataset::kGeography && !schema.has(name)) schema.nominal.emplace_back(name);
    if (name == dataset::kAdjustedIncome && !schema.has(name)) schema.numeric.emplace_back(name);
  }
  in.clear();
  in.seekg(0);
  return dataset::parse_dataset(in, schema);
}

std::vector<double> bin_shares(const binning::Encoder& encoder, std::size_t c, const Dataset& data) {
  const auto& ch = encoder.characteristics().at(c);
  std::vector<double> shares(ch.bins.size() + 1, 0.0);
  if (data.size() == 0) return shares;
  for (const auto& r : data.records) {
    const auto bin = encoder.bin_index(c, r);
    shares[bin ? *bin : ch.bins.size()] += 1.0;
  }
  for (auto& s : shares) s /= static_cast<double>(data.size());
  return shares;
}

Summary run_synth(const PipelineConfig& config) {
  ensure_output(config);
  const auto population = synthgen::generate_population(config.population, config.seed);
  write_file_atomic(out_path(config, files::kApplications), dataset::write_dataset(population.data));
  const auto defaults = calibration::default_series_from(population.data);
  write_file_atomic(out_path(config, files::kDefaults), calibration::write_defaults(defaults));

  const auto quarterly = defaults.quarterly();
  const auto primary = synthgen::generate_macro(config.macro_spec, quarterly, config.seed);
  synthgen::MacroSpec weak = config.macro_spec;
  weak.name = "noise_index";
  weak.noise_scale = 1.0;
  weak.target_correlation = 0.1;
  const auto secondary = synthgen::generate_macro(weak, quarterly, config.seed + 1);
  write_file_atomic(config.output_dir / ("macro_" + primary.name + ".csv"), calibration::write_macro(primary));
  write_file_atomic(config.output_dir / "macro_noise_index.csv", calibration::write_macro(secondary));

  std::size_t bad = 0;
  for (const auto& r : population.data.records) bad += *r.label;
  Summary s{"synth", {}};
  s.add("output", config.output_dir.string());
  s.add("records", population.data.size());
  s.add("bad_rate", static_cast<double>(bad) / population.data.size());
  s.add("macro_series", 2);
  return s;
}

Summary run_ingest(const PipelineConfig& config) {
  ensure_output(config);
  const fs::path source = config.data ? *config.data : out_path(config, files::kApplications);
  require(source, "ingest");
  std::ifstream in(source);
  auto parsed = dataset::parse_dataset(in, dataset::Schema::credit());

  std::string diagnostics = "line,column,message\n";
  for (const auto& d : parsed.diagnostics) diagnostics += std::to_string(d.line) + "," + d.column + "," + d.message + "\n";
  write_file_atomic(config.output_dir / "diagnostics.csv", diagnostics);

  if (config.data && !config.defaults) {
    write_file_atomic(out_path(config, files::kDefaults),
                      calibration::write_defaults(calibration::default_series_from(parsed.data)));
  }

  auto modeling = dataset::temporal_split(parsed.data, config.modeling).inside;
  auto holdout = dataset::temporal_split(parsed.data, config.holdout).inside;
  if (modeling.size() == 0) throw Error("ingest: modeling window " + window_text(config.modeling) + " selects no records");

  const auto model = dataset::fit_cleansing(modeling, config.cleansing);
  auto cleaned_modeling = dataset::apply_cleansing(modeling, model);
  auto cleaned_holdout = dataset::apply_cleansing(holdout, model);
  if (config.adjust_income) {
    const auto factors = config.effective_factors();
    cleaned_modeling.data = dataset::adjust_income(cleaned_modeling.data, factors);
    cleaned_holdout.data = dataset::adjust_income(cleaned_holdout.data, factors);
  }
  auto report = cleaned_modeling.report;
  report.merge(cleaned_holdout.report);
  write_file_atomic(out_path(config, files::kModeling), dataset::write_dataset(cleaned_modeling.data));
  write_file_atomic(out_path(config, files::kHoldout), dataset::write_dataset(cleaned_holdout.data));
  write_file_atomic(out_path(config, files::kCleansing), report.to_text());

  Summary s{"ingest", {}};
  s.add("records", parsed.data.size());
  s.add("diagnostics", parsed.diagnostics.size());
  s.add("modeling", modeling.size());
  s.add("holdout", holdout.size());
  return s;
}

Summary run_bin(const PipelineConfig& config) {
  const auto modeling = read_stage_dataset(out_path(config, files::kModeling), "bin");
  const auto chars = fit_characteristics(modeling, config.effective_spec());
  write_file_atomic(out_path(config, files::kCharacteristics), binning::write_characteristics(chars));

  std::vector<const binning::Characteristic*> order;
  for (const auto& c : chars) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->iv != b->iv) return a->iv > b->iv;
    return a->name < b->name;
  });
  std::string iv = "characteristic,type,bins,iv\n";
  for (const auto* c : order) {
    iv += c->name + "," + std::string(binning::type_name(c->type)) + "," + std::to_string(c->bins.size()) + "," +
          format_fixed(c->iv, 6) + "\n";
  }
  write_file_atomic(out_path(config, files::kInformationValue), iv);

  Summary s{"bin", {}};
  s.add("characteristics", chars.size());
  if (!order.empty()) {
    s.add("top", order.front()->name);
    s.add("top_iv", order.front()->iv);
  }
  return s;
}

Summary run_train(const PipelineConfig& config) {
  const auto modeling = read_stage_dataset(out_path(config, files::kModeling), "train");
  ScorecardSpec spec = config.effective_spec();
  Summary s{"train", {}};
  if (config.select) {
    const auto outcome = select_characteristics(modeling, spec, config.trainer, config.cv_k, config.cv_seed,
                                                config.select_epsilon);
    std::string trace = "step,candidate,mean_auc,added\n";
    for (std::size_t i = 0; i < outcome.result.trace.size(); ++i) {
      const auto& step = outcome.result.trace[i];
      for (const auto& [name, auc] : step.evaluated) {
        trace += std::to_string(i + 1) + "," + name + "," + format_fixed(auc, 6) + "," + (name == step.added ? "1" : "0") + "\n";
      }
    }
    write_file_atomic(out_path(config, files::kSelection), trace);
    if (outcome.result.selected.empty()) throw Error("train: forward selection kept no characteristic");
    spec = outcome.spec;
    s.add("selected", join(outcome.result.selected, ";"));
  }
  const auto card = fit_scorecard(modeling, spec, config.trainer, config.strategy);
  write_file_atomic(out_path(config, files::kScorecard), write_scorecard(card));
  s.add("trainer", std::string(trainer_name(config.trainer.kind)));
  s.add("strategy", std::string(strategy_name(config.strategy.kind)));
  s.add("characteristics", card.characteristics.size());
  s.add("models", card.bundle.models.size());
  s.add("removed", card.removed_ids.size());
  return s;
}

Summary run_evaluate(const PipelineConfig& config) {
  const auto card = read_card(config, "evaluate");
  const auto modeling = read_stage_dataset(out_path(config, files::kModeling), "evaluate");
  const auto holdout = read_stage_dataset(out_path(config, files::kHoldout), "evaluate");

  evaluation::MetricsReport report;
  const auto labels = binning::labels_of(modeling);
  const auto fitted = evaluation::auc(card.score(modeling), labels);
  report.auc = fitted.auc;
  report.n_pos = fitted.n_pos;
  report.n_neg = fitted.n_neg;
  report.cv = cross_validate(modeling, spec_of(card, config), config.trainer, config.strategy, config.cv_k, config.cv_seed);
  report.has_cv = true;
  if (fully_labeled(holdout)) {
    report.holdout_auc = evaluation::auc(card.score(holdout), binning::labels_of(holdout)).auc;
    report.has_holdout = true;
  }
  if (holdout.size() > 0) {
    const binning::Encoder base(modeling.schema, card.characteristics, card.unfamiliar);
    const binning::Encoder later(holdout.schema, card.characteristics, card.unfamiliar);
    for (std::size_t c = 0; c < card.characteristics.size(); ++c) {
      report.psi.emplace_back(card.characteristics[c].name,
                              evaluation::psi(bin_shares(base, c, modeling), bin_shares(later, c, holdout)));
    }
  }
  write_file_atomic(out_path(config, files::kMetrics), evaluation::write_metrics(report));

  Summary s{"evaluate", {}};
  s.add("auc", report.auc);
  s.add("cv_mean_auc", report.cv.mean);
  if (report.has_holdout) {
    s.add("holdout_auc", report.holdout_auc);
    s.add("degradation_points", evaluation::degradation(report.cv.mean, report.holdout_auc));
  }
  return s;
}

Summary run_forecast(const PipelineConfig& config, const std::optional<ManualFit>& manual) {
  ensure_output(config);
  const int year = config.forecast_year;
  std::optional<calibration::DefaultSeries> defaults;
  if (fs::exists(defaults_path(config))) defaults = calibration::read_defaults(read_file(defaults_path(config)));

  calibration::RegressionFit fit;
  calibration::MacroSeries predictor;
  Summary s{"forecast", {}};
  if (manual) {
    fit.predictor = "manual";
    fit.intercept = manual->intercept;
    fit.slope = manual->slope;
    if (!config.macro.empty()) {
      const auto& path = config.macro.front();
      require(path, "forecast");
      predictor = calibration::read_macro(read_file(path), series_name(path));
    } else if (manual->slope == 0.0) {
      predictor.name = "constant";
      for (calibration::Quarter q{year - 1, 4}; q.year <= year; q = q.next()) predictor.points.emplace_back(q, 0.0);
    } else {
      throw Error("forecast: a non-zero slope needs a predictor series (--macro)");
    }
  } else {
    if (!defaults) throw Error("forecast: default series " + defaults_path(config).string() + " does not exist");
    std::vector<calibration::MacroSeries> candidates;
    for (const auto& path : macro_paths(config)) {
      require(path, "forecast");
      candidates.push_back(calibration::repair_abnormal(calibration::read_macro(read_file(path), series_name(path))));
    }
    const calibration::QuarterWindow window{{0, 1}, {year - 1, 4}};
    const auto ranking = calibration::rank_predictors(*defaults, candidates, window);
    std::string table = "rank,predictor,r,r_square,slope,intercept,n_points\n";
    for (std::size_t i = 0; i < ranking.fits.size(); ++i) {
      const auto& f = ranking.fits[i];
      table += std::to_string(i + 1) + "," + f.predictor + "," + format_double(f.r) + "," + format_double(f.r_square) +
               "," + format_double(f.slope) + "," + format_double(f.intercept) + "," + std::to_string(f.n_points) + "\n";
    }
    for (const auto& [name, reason] : ranking.excluded) table += "excluded," + name + ",,,,," + reason + "\n";
    write_file_atomic(out_path(config, files::kRanking), table);
    if (ranking.fits.empty()) throw Error("forecast: no usable predictor series");
    fit = ranking.fits.front();
    predictor = *std::find_if(candidates.begin(), candidates.end(), [&](const auto& m) { return m.name == fit.predictor; });
    s.add("r", fit.r);
  }
  const auto forecast = calibration::forecast_default(config.scenario, fit, predictor, year);

  std::optional<std::vector<double>> observed;
  if (defaults) {
    std::vector<double> obs;
    for (int m = 1; m <= 12; ++m) {
      const auto v = defaults->at({year, m});
      if (!v || *v <= 0.0) break;
      obs.push_back(*v);
    }
    if (obs.size() == 12) observed = obs;
  }
  write_file_atomic(out_path(config, files::kForecast), calibration::write_forecast(forecast, observed));

  s.add("predictor", fit.predictor);
  s.add("scenario", config.scenario.variant);
  s.add("mean", std::accumulate(forecast.monthly.begin(), forecast.monthly.end(), 0.0) / 12.0);
  s.add("month_11", forecast.monthly[10]);
  s.add("month_12", forecast.monthly[11]);
  if (observed) {
    const auto d = calibration::distance_d(forecast.monthly, *observed);
    s.add("distance_d", d.d);
    s.add("valid", d.valid ? "true" : "false");
  }
  return s;
}

Summary run_calibrate(const PipelineConfig& config) {
  const auto card = read_card(config, "calibrate");
  const auto holdout = read_stage_dataset(out_path(config, files::kHoldout), "calibrate");
  require(out_path(config, files::kForecast), "calibrate");
  const auto forecast = read_forecast_file(out_path(config, files::kForecast));
  if (holdout.size() == 0) throw Error("calibrate: holdout window holds no records to calibrate");

  const auto raw = card.score(holdout);
  std::vector<int> months;
  for (const auto& r : holdout.records) months.push_back(r.period().month);
  std::vector<double> targets;
  for (const auto& [m, v] : forecast.estimates) targets.push_back(v);

  const bool global = config.shift == ShiftMode::kGlobal || (config.shift == ShiftMode::kAuto && config.scenario.variant == 2);
  const auto shift = global
                         ? calibration::shift_global(raw, std::accumulate(targets.begin(), targets.end(), 0.0) / 12.0)
                         : calibration::shift_by_month(raw, months, targets);

  std::string scores = "id,month,raw,adjusted\n";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    scores += holdout.records[i].id + "," + holdout.records[i].period().str() + "," + format_double(raw[i]) + "," +
              format_double(shift.adjusted[i]) + "\n";
  }
  write_file_atomic(out_path(config, files::kScores), scores);

  std::string table = "section,key,value\nshift,mode," + std::string(global ? "global" : "monthly") + "\n";
  for (const auto& [m, delta] : shift.delta) {
    const std::string key = m == 0 ? "all" : dataset::YearMonth{config.forecast_year, m}.str();
    table += "delta," + key + "," + format_double(delta) + "\n";
    table += "target," + key + "," + format_double(shift.target.at(m)) + "\n";
    table += "achieved," + key + "," + format_double(shift.achieved.at(m)) + "\n";
  }
  Summary s{"calibrate", {}};
  s.add("mode", global ? "global" : "monthly");
  s.add("records", raw.size());
  s.add("mean_adjusted", std::accumulate(shift.adjusted.begin(), shift.adjusted.end(), 0.0) / raw.size());
  if (config.cutoff) {
    const auto approved = calibration::apply_cutoff(shift.adjusted, *config.cutoff);
    table += "cutoff,value," + format_double(*config.cutoff) + "\n";
    table += "cutoff,approved," + std::to_string(approved.approved.size()) + "\n";
    table += "cutoff,expected_rate," + format_double(approved.expected_rate) + "\n";
    s.add("approved", approved.approved.size());
    s.add("approved_rate", approved.expected_rate);
  }
  write_file_atomic(out_path(config, files::kCalibration), table);
  return s;
}

Summary run_report(const PipelineConfig& config) {
  struct Part {
    const char* title;
    const char* file;
  };
  const Part parts[] = {
      {"cleansing", files::kCleansing}, {"information value", files::kInformationValue},
      {"metrics", files::kMetrics},     {"predictor ranking", files::kRanking},
      {"forecast", files::kForecast},   {"calibration", files::kCalibration},
  };
  std::string text = "scorecard run report\n";
  nlohmann::ordered_json json;
  std::size_t sections = 0;
  for (const auto& part : parts) {
    const auto path = out_path(config, part.file);
    if (!fs::exists(path)) continue;
    ++sections;
    text += "\n== " + std::string(part.title) + " (" + part.file + ") ==\n" + read_file(path);
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : read_csv_rows(path)) rows.push_back(row);
    json[part.title] = rows;
  }
  if (sections == 0) throw Error("report: no stage outputs found in " + config.output_dir.string());
  write_file_atomic(out_path(config, files::kReport), text);
  if (config.report_json) write_file_atomic(out_path(config, files::kReportJson), json.dump(2) + "\n");
  Summary s{"report", {}};
  s.add("sections", sections);
  return s;
}

std::vector<Summary> run_pipeline(const PipelineConfig& config) {
  config.validate();
  ensure_output(config);
  write_file_atomic(out_path(config, files::kEffectiveConfig), render_config(config));
  std::vector<Summary> out;
  if (!config.data) out.push_back(run_synth(config));
  out.push_back(run_ingest(config));
  out.push_back(run_bin(config));
  out.push_back(run_train(config));
  out.push_back(run_evaluate(config));
  out.push_back(run_forecast(config));
  out.push_back(run_calibrate(config));
  out.push_back(run_report(config));
  return out;
}

}  // namespace scorecard::pipeline
