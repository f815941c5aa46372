#include "scorecard/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace scorecard::dataset {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::string_view kIdColumn = "id";
constexpr std::string_view kDateColumn = "application_date";
constexpr std::string_view kLabelColumn = "label";

std::optional<std::size_t> index_of(const std::vector<std::string>& names, std::string_view name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  const auto parts = split(text, '-');
  long long y = 0, m = 0, d = 0;
  if (parts.size() != 3 || parts[0].size() != 4 || !parse_int(parts[0], y) || !parse_int(parts[1], m) ||
      !parse_int(parts[2], d)) {
    throw ParseError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  const Date date{std::chrono::year{static_cast<int>(y)}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw ParseError("invalid calendar date '" + std::string(text) + "'");
  return date;
}

std::string format_date(const Date& date) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buffer;
}

YearMonth YearMonth::of(const Date& date) {
  return {static_cast<int>(date.year()), static_cast<int>(static_cast<unsigned>(date.month()))};
}

YearMonth YearMonth::parse(std::string_view text) {
  text = trim(text);
  const auto parts = split(text, '-');
  long long y = 0, m = 0;
  if (parts.size() != 2 || parts[0].size() != 4 || !parse_int(parts[0], y) || !parse_int(parts[1], m) || m < 1 ||
      m > 12) {
    throw ParseError("bad month '" + std::string(text) + "', expected YYYY-MM");
  }
  return {static_cast<int>(y), static_cast<int>(m)};
}

std::string YearMonth::str() const {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d", year, month);
  return buffer;
}

Schema Schema::credit() {
  Schema schema;
  schema.numeric = {"age", "monthly_income", "time_at_address", "time_at_employer", "n_dependents", "n_accounts"};
  schema.nominal = {"zip",        "state",         "city",      "neighborhood", "marital_status", "occupation_code",
                    "income_proof_type", "due_day", "home_type", "dialing_code"};
  schema.binary = {"lives_works_same_state", "previous_credit", "other_cards", "gender"};
  return schema;
}

std::optional<std::size_t> Schema::numeric_index(std::string_view name) const { return index_of(numeric, name); }
std::optional<std::size_t> Schema::nominal_index(std::string_view name) const { return index_of(nominal, name); }
std::optional<std::size_t> Schema::binary_index(std::string_view name) const { return index_of(binary, name); }

bool Schema::has(std::string_view name) const {
  return numeric_index(name) || nominal_index(name) || binary_index(name);
}

std::vector<std::string> Schema::all_names() const {
  std::vector<std::string> names = numeric;
  names.insert(names.end(), nominal.begin(), nominal.end());
  names.insert(names.end(), binary.begin(), binary.end());
  return names;
}

bool is_missing(double value) { return std::isnan(value); }

double Dataset::numeric(const Application& record, std::string_view name) const {
  const auto idx = schema.numeric_index(name);
  if (!idx) throw Error("unknown numeric attribute '" + std::string(name) + "'");
  return record.numeric[*idx];
}

const std::string& Dataset::nominal(const Application& record, std::string_view name) const {
  const auto idx = schema.nominal_index(name);
  if (!idx) throw Error("unknown nominal attribute '" + std::string(name) + "'");
  return record.nominal[*idx];
}

SplitWindow parse_window(std::string_view text) {
  text = trim(text);
  if (text.rfind("months=", 0) == 0) {
    MonthOfYearFilter filter;
    for (const auto& part : split(text.substr(7), ',')) {
      long long m = 0;
      if (!parse_int(part, m) || m < 1 || m > 12) throw ParseError("bad month-of-year '" + part + "'");
      filter.months.insert(static_cast<int>(m));
    }
    return filter;
  }
  const auto sep = text.find("..");
  if (sep == std::string_view::npos) throw ParseError("bad window '" + std::string(text) + "'");
  DateWindow window{YearMonth::parse(text.substr(0, sep)), YearMonth::parse(text.substr(sep + 2))};
  if (window.to < window.from) throw ParseError("window ends before it starts: '" + std::string(text) + "'");
  return window;
}

std::string format_window(const SplitWindow& window) {
  if (const auto* range = std::get_if<DateWindow>(&window)) return range->from.str() + ".." + range->to.str();
  std::vector<std::string> months;
  for (int m : std::get<MonthOfYearFilter>(window).months) months.push_back(std::to_string(m));
  return "months=" + join(months, ",");
}

bool window_contains(const SplitWindow& window, const YearMonth& ym) {
  if (const auto* range = std::get_if<DateWindow>(&window)) return range->contains(ym);
  return std::get<MonthOfYearFilter>(window).months.count(ym.month) > 0;
}

ParseResult parse_dataset(std::istream& source, const Schema& schema, const ParseOptions& options) {
  ParseResult result;
  result.data.schema = schema;

  std::string line;
  if (!std::getline(source, line)) throw ParseError("missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, options.delimiter);

  // Column position -> (kind, slot). kind: 0 id, 1 date, 2 label, 3 numeric, 4 nominal, 5 binary.
  std::vector<std::pair<int, std::size_t>> layout;
  std::unordered_set<std::string> seen;
  for (const auto& raw : header) {
    const std::string name(trim(raw));
    if (!seen.insert(name).second) throw ParseError("duplicate header column '" + name + "'");
    if (name == kIdColumn) {
      layout.emplace_back(0, 0);
    } else if (name == kDateColumn) {
      layout.emplace_back(1, 0);
    } else if (name == kLabelColumn) {
      layout.emplace_back(2, 0);
    } else if (auto i = schema.numeric_index(name)) {
      layout.emplace_back(3, *i);
    } else if (auto j = schema.nominal_index(name)) {
      layout.emplace_back(4, *j);
    } else if (auto k = schema.binary_index(name)) {
      layout.emplace_back(5, *k);
    } else {
      throw ParseError("header column '" + name + "' is not in the schema");
    }
  }
  std::vector<std::string> absent;
  for (const auto& name : std::vector<std::string>{std::string(kIdColumn), std::string(kDateColumn),
                                                   std::string(kLabelColumn)}) {
    if (!seen.count(name)) absent.push_back(name);
  }
  for (const auto& name : schema.all_names()) {
    if (!seen.count(name)) absent.push_back(name);
  }
  if (!absent.empty()) throw ParseError("header is missing columns: " + join(absent, ", "));

  std::unordered_set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, options.delimiter);
    auto diag = [&](const std::string& column, const std::string& message) {
      result.diagnostics.push_back({line_no, column, message});
    };
    if (cells.size() != header.size()) {
      diag("", "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()) +
                   "; row skipped");
      continue;
    }
    Application app;
    app.numeric.assign(schema.numeric.size(), kNaN);
    app.nominal.assign(schema.nominal.size(), std::string());
    app.binary.assign(schema.binary.size(), kMissingFlag);
    bool have_date = false;
    bool skip = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string_view cell = trim(cells[c]);
      const auto [kind, slot] = layout[c];
      const std::string& column = header[c];
      switch (kind) {
        case 0:
          app.id = std::string(cell);
          break;
        case 1:
          try {
            app.application_date = parse_date(cell);
            have_date = true;
          } catch (const ParseError& e) {
            diag(column, std::string(e.what()) + "; row skipped");
            skip = true;
          }
          break;
        case 2: {
          if (cell.empty()) break;
          long long v = 0;
          if (parse_int(cell, v) && (v == 0 || v == 1)) {
            app.label = static_cast<int>(v);
          } else {
            diag(column, "label '" + std::string(cell) + "' is not 0/1; treated as missing");
          }
          break;
        }
        case 3: {
          if (cell.empty()) break;
          double v = 0.0;
          if (parse_double(cell, v)) {
            app.numeric[slot] = v;
          } else {
            diag(column, "unparseable number '" + std::string(cell) + "'; treated as missing");
          }
          break;
        }
        case 4:
          // Kept raw; cleansing decides what padding and case mean.
          app.nominal[slot] = cells[c];
          break;
        case 5: {
          if (cell.empty()) break;
          long long v = 0;
          if (parse_int(cell, v) && (v == 0 || v == 1)) {
            app.binary[slot] = static_cast<int>(v);
          } else {
            diag(column, "flag '" + std::string(cell) + "' is not 0/1; treated as missing");
          }
          break;
        }
      }
    }
    if (skip) continue;
    if (!have_date) {
      diag(std::string(kDateColumn), "missing application date; row skipped");
      continue;
    }
    if (app.id.empty()) {
      diag(std::string(kIdColumn), "empty id; row skipped");
      continue;
    }
    if (!ids.insert(app.id).second) {
      diag(std::string(kIdColumn), "duplicate id '" + app.id + "'; row skipped");
      continue;
    }
    if (options.period && !options.period->contains(app.period())) {
      diag(std::string(kDateColumn), "date " + format_date(app.application_date) + " outside dataset period; row skipped");
      continue;
    }
    result.data.records.push_back(std::move(app));
  }
  return result;
}

std::string write_dataset(const Dataset& data, char delimiter) {
  std::string out;
  const std::string d(1, delimiter);
  std::vector<std::string> header{std::string(kIdColumn), std::string(kDateColumn), std::string(kLabelColumn)};
  for (const auto& name : data.schema.all_names()) header.push_back(name);
  out += join(header, d);
  out += '\n';
  for (const auto& r : data.records) {
    out += r.id;
    out += d;
    out += format_date(r.application_date);
    out += d;
    if (r.label) out += std::to_string(*r.label);
    for (double v : r.numeric) {
      out += d;
      if (!is_missing(v)) out += format_double(v);
    }
    for (const auto& s : r.nominal) {
      out += d;
      out += s;
    }
    for (int b : r.binary) {
      out += d;
      if (b != kMissingFlag) out += std::to_string(b);
    }
    out += '\n';
  }
  return out;
}

void CleansingPolicy::validate() const {
  for (const Range* r : {&age_valid_range, &due_day_valid_range, &income_valid_range}) {
    if (!(r->min <= r->max)) throw Error("cleansing policy: empty valid range");
  }
}

std::string_view disposition_name(Disposition disposition) {
  switch (disposition) {
    case Disposition::kMissing:
      return "missing";
    case Disposition::kOutOfRange:
      return "out_of_range";
    case Disposition::kMergedToOther:
      return "merged_to_other";
    case Disposition::kNormalized:
      return "normalized";
  }
  return "?";
}

std::size_t CleansingReport::count(std::string_view variable, Disposition disposition) const {
  const auto it = counts.find(std::string(variable));
  if (it == counts.end()) return 0;
  const auto jt = it->second.find(disposition);
  return jt == it->second.end() ? 0 : jt->second;
}

void CleansingReport::add(const std::string& variable, Disposition disposition, std::size_t n) {
  counts[variable][disposition] += n;
}

void CleansingReport::merge(const CleansingReport& other) {
  for (const auto& [variable, by_disposition] : other.counts) {
    for (const auto& [disposition, n] : by_disposition) counts[variable][disposition] += n;
  }
}

std::string CleansingReport::to_text() const {
  std::string out = "variable,disposition,count\n";
  for (const auto& [variable, by_disposition] : counts) {
    for (const auto& [disposition, n] : by_disposition) {
      out += variable + "," + std::string(disposition_name(disposition)) + "," + std::to_string(n) + "\n";
    }
  }
  return out;
}

std::string normalize_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  bool pending_space = false;
  for (char raw : token) {
    if (raw == '|') continue;
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

namespace {

// Steps shared by fitting and applying: normalization, range checks and the
// geography column. Returns the working copy; fills dispositions when asked.
struct Prepared {
  Dataset data;
  // Per-record flag: token was rewritten by normalization (variable, record).
  std::map<std::string, std::vector<char>> normalized;
  CleansingReport report;
};

Prepared prepare(const Dataset& input, const CleansingPolicy& policy) {
  policy.validate();
  Prepared p{input, {}, {}};
  Dataset& data = p.data;
  const Schema& schema = data.schema;

  const auto age_idx = schema.numeric_index("age");
  const auto income_idx = schema.numeric_index("monthly_income");
  const auto due_idx = schema.nominal_index("due_day");

  for (std::size_t v = 0; v < schema.nominal.size(); ++v) {
    p.normalized[schema.nominal[v]].assign(data.records.size(), 0);
  }

  for (std::size_t i = 0; i < data.records.size(); ++i) {
    Application& r = data.records[i];
    for (std::size_t v = 0; v < schema.numeric.size(); ++v) {
      double& value = r.numeric[v];
      if (is_missing(value)) {
        p.report.add(schema.numeric[v], Disposition::kMissing);
        continue;
      }
      const Range* range = nullptr;
      if (age_idx && v == *age_idx) range = &policy.age_valid_range;
      if (income_idx && v == *income_idx) range = &policy.income_valid_range;
      if (range && !range->contains(value)) {
        value = kNaN;
        p.report.add(schema.numeric[v], Disposition::kOutOfRange);
      }
    }
    for (std::size_t v = 0; v < schema.nominal.size(); ++v) {
      std::string& token = r.nominal[v];
      const std::string& name = schema.nominal[v];
      // Derived column; rebuilt after the component merge.
      if (policy.build_geography && name == kGeography) continue;
      if (token.empty()) {
        p.report.add(name, Disposition::kMissing);
        continue;
      }
      if (policy.text_normalization && token != kOtherClass) {
        std::string normalized = normalize_token(token);
        if (normalized != token) {
          p.normalized[name][i] = 1;
          token = std::move(normalized);
        }
        if (token.empty()) {
          p.normalized[name][i] = 0;
          p.report.add(name, Disposition::kMissing);
          continue;
        }
      }
      if (due_idx && v == *due_idx) {
        double day = 0.0;
        if (!parse_double(token, day) || !policy.due_day_valid_range.contains(day)) {
          token.clear();
          p.normalized[name][i] = 0;
          p.report.add(name, Disposition::kOutOfRange);
        }
      }
    }
    for (std::size_t v = 0; v < schema.binary.size(); ++v) {
      if (r.binary[v] == kMissingFlag) p.report.add(schema.binary[v], Disposition::kMissing);
    }
  }
  return p;
}

bool has_geography_parts(const Schema& schema) {
  return schema.nominal_index("state") && schema.nominal_index("city") && schema.nominal_index("neighborhood");
}

void build_geography(Dataset& data) {
  const auto s = *data.schema.nominal_index("state");
  const auto c = *data.schema.nominal_index("city");
  const auto n = *data.schema.nominal_index("neighborhood");
  auto g = data.schema.nominal_index(kGeography);
  if (!g) {
    data.schema.nominal.emplace_back(kGeography);
    g = data.schema.nominal.size() - 1;
    for (auto& r : data.records) r.nominal.emplace_back();
  }
  for (auto& r : data.records) {
    const auto& a = r.nominal[s];
    const auto& b = r.nominal[c];
    const auto& d = r.nominal[n];
    r.nominal[*g] = (a.empty() && b.empty() && d.empty()) ? std::string() : a + "|" + b + "|" + d;
  }
}

void learn_vocabulary(const Dataset& data, std::size_t variable, std::size_t threshold, CleansingModel& model) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : data.records) {
    const auto& token = r.nominal[variable];
    if (!token.empty()) ++counts[token];
  }
  auto& kept = model.kept[data.schema.nominal[variable]];
  auto& merged = model.merged[data.schema.nominal[variable]];
  for (const auto& [token, n] : counts) {
    if (n > threshold) {
      kept.insert(token);
    } else {
      merged.insert(token);
    }
  }
}

void merge_variable(Dataset& data, std::size_t variable, const CleansingModel& model,
                    std::vector<char>* merged_flags) {
  const auto& name = data.schema.nominal[variable];
  const auto it = model.merged.find(name);
  if (it == model.merged.end()) return;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    auto& token = data.records[i].nominal[variable];
    if (token.empty() || token == kOtherClass) continue;
    if (it->second.count(token)) {
      token = std::string(kOtherClass);
      if (merged_flags) (*merged_flags)[i] = 1;
    }
  }
}

}  // namespace

CleansingModel fit_cleansing(const Dataset& modeling, const CleansingPolicy& policy) {
  Prepared p = prepare(modeling, policy);
  Dataset& data = p.data;
  CleansingModel model;
  model.policy = policy;
  const bool geo = policy.build_geography && has_geography_parts(data.schema);
  const auto geo_idx = data.schema.nominal_index(kGeography);
  for (std::size_t v = 0; v < data.schema.nominal.size(); ++v) {
    if (geo && geo_idx && v == *geo_idx) continue;
    learn_vocabulary(data, v, policy.rare_class_threshold, model);
    merge_variable(data, v, model, nullptr);
  }
  if (geo) {
    build_geography(data);
    learn_vocabulary(data, *data.schema.nominal_index(kGeography), policy.rare_class_threshold, model);
  }
  return model;
}

CleansingResult apply_cleansing(const Dataset& records, const CleansingModel& model) {
  Prepared p = prepare(records, model.policy);
  Dataset& data = p.data;
  const bool geo = model.policy.build_geography && has_geography_parts(data.schema);
  const auto geo_idx = data.schema.nominal_index(kGeography);

  std::map<std::string, std::vector<char>> merged_flags;
  for (std::size_t v = 0; v < data.schema.nominal.size(); ++v) {
    if (geo && geo_idx && v == *geo_idx) continue;
    auto& flags = merged_flags[data.schema.nominal[v]];
    flags.assign(data.records.size(), 0);
    merge_variable(data, v, model, &flags);
  }
  if (geo) {
    build_geography(data);
    const auto g = *data.schema.nominal_index(kGeography);
    auto& flags = merged_flags[std::string(kGeography)];
    flags.assign(data.records.size(), 0);
    merge_variable(data, g, model, &flags);
    for (const auto& r : data.records) {
      if (r.nominal[g].empty()) p.report.add(std::string(kGeography), Disposition::kMissing);
    }
  }

  // One disposition per record and variable: merged outranks normalized.
  for (const auto& [name, flags] : merged_flags) {
    const auto norm = p.normalized.find(name);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (flags[i]) {
        p.report.add(name, Disposition::kMergedToOther);
      } else if (norm != p.normalized.end() && norm->second[i]) {
        p.report.add(name, Disposition::kNormalized);
      }
    }
  }
  return {std::move(data), std::move(p.report)};
}

CleansingResult cleanse(const Dataset& records, const CleansingPolicy& policy) {
  return apply_cleansing(records, fit_cleansing(records, policy));
}

Dataset adjust_income(const Dataset& records, const std::map<int, double>& factor_by_year) {
  const auto income = records.schema.numeric_index("monthly_income");
  if (!income) throw Error("adjust_income: schema has no monthly_income");
  std::set<int> absent;
  for (const auto& r : records.records) {
    const int year = r.period().year;
    if (!factor_by_year.count(year)) absent.insert(year);
  }
  if (!absent.empty()) {
    std::vector<std::string> years;
    for (int y : absent) years.push_back(std::to_string(y));
    throw Error("adjust_income: no inflation factor for year(s) " + join(years, ", "));
  }
  Dataset out = records;
  auto target = out.schema.numeric_index(kAdjustedIncome);
  if (!target) {
    out.schema.numeric.emplace_back(kAdjustedIncome);
    target = out.schema.numeric.size() - 1;
    for (auto& r : out.records) r.numeric.push_back(kNaN);
  }
  for (auto& r : out.records) {
    const double value = r.numeric[*income];
    r.numeric[*target] = is_missing(value) ? kNaN : value * factor_by_year.at(r.period().year);
  }
  return out;
}

Partition temporal_split(const Dataset& records, const SplitWindow& window) {
  Partition p;
  p.inside.schema = records.schema;
  p.outside.schema = records.schema;
  for (const auto& r : records.records) {
    (window_contains(window, r.period()) ? p.inside : p.outside).records.push_back(r);
  }
  if (p.inside.records.empty()) p.warning = "window " + format_window(window) + " selects no records";
  return p;
}

}  // namespace scorecard::dataset
