#include "scorecard/binning.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace scorecard::binning {

using dataset::Application;
using dataset::Dataset;

void BinningConfig::validate() const {
  if (max_pre_bins < 2) throw Error("binning: max_pre_bins must be at least 2");
  if (!(min_bin_fraction > 0.0 && min_bin_fraction < 1.0)) throw Error("binning: min_bin_fraction must be in (0, 1)");
  if (!(chi_square_threshold >= 0.0)) throw Error("binning: chi_square_threshold must be non-negative");
}

double compute_woe(std::size_t g, std::size_t b, std::size_t total_good, std::size_t total_bad, double fallback) {
  if (total_good == 0 || total_bad == 0) throw Error("compute_woe: sample has no goods or no bads");
  if (g == 0 || b == 0) return fallback;
  const double good_share = static_cast<double>(g) / static_cast<double>(total_good);
  const double bad_share = static_cast<double>(b) / static_cast<double>(total_bad);
  return std::log(good_share / bad_share);
}

double compute_iv(const Characteristic& characteristic) {
  if (characteristic.total_good == 0 || characteristic.total_bad == 0) {
    throw Error("compute_iv: sample has no goods or no bads");
  }
  const double G = static_cast<double>(characteristic.total_good);
  const double B = static_cast<double>(characteristic.total_bad);
  double iv = 0.0;
  for (const auto& bin : characteristic.bins) {
    if (!bin.woe_defined) continue;
    iv += (static_cast<double>(bin.good) / G - static_cast<double>(bin.bad) / B) * bin.woe;
  }
  return iv;
}

void finalize(Characteristic& c) {
  c.total_good = 0;
  c.total_bad = 0;
  for (const auto& bin : c.bins) {
    c.total_good += bin.good;
    c.total_bad += bin.bad;
  }
  if (c.total_good == 0 || c.total_bad == 0) {
    throw Error("characteristic '" + c.name + "': fitting sample needs both goods and bads");
  }
  double weighted = 0.0;
  std::size_t weight = 0;
  for (auto& bin : c.bins) {
    bin.woe_defined = bin.good > 0 && bin.bad > 0;
    if (!bin.woe_defined) continue;
    bin.woe = compute_woe(bin.good, bin.bad, c.total_good, c.total_bad, 0.0);
    weighted += static_cast<double>(bin.count()) * bin.woe;
    weight += bin.count();
  }
  c.average_woe = weight > 0 ? weighted / static_cast<double>(weight) : 0.0;
  for (auto& bin : c.bins) {
    if (!bin.woe_defined) bin.woe = c.average_woe;
  }
  c.iv = compute_iv(c);
}

double adjacent_chi_square(std::size_t g1, std::size_t b1, std::size_t g2, std::size_t b2) {
  const double n1 = static_cast<double>(g1 + b1);
  const double n2 = static_cast<double>(g2 + b2);
  const double good = static_cast<double>(g1 + g2);
  const double bad = static_cast<double>(b1 + b2);
  const double n = n1 + n2;
  if (n == 0.0) return 0.0;
  const double observed[2][2] = {{static_cast<double>(g1), static_cast<double>(b1)},
                                 {static_cast<double>(g2), static_cast<double>(b2)}};
  const double rows[2] = {n1, n2};
  const double cols[2] = {good, bad};
  double chi = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / n;
      if (expected > 0.0) chi += (observed[i][j] - expected) * (observed[i][j] - expected) / expected;
    }
  }
  return chi;
}

namespace {

double smoothed_log_odds(const Bin& bin) {
  return std::log((static_cast<double>(bin.good) + 0.5) / (static_cast<double>(bin.bad) + 0.5));
}

bool is_monotone(const std::vector<Bin>& bins) {
  bool non_decreasing = true;
  bool non_increasing = true;
  for (std::size_t i = 1; i < bins.size(); ++i) {
    const double prev = smoothed_log_odds(bins[i - 1]);
    const double cur = smoothed_log_odds(bins[i]);
    if (cur < prev) non_decreasing = false;
    if (cur > prev) non_increasing = false;
  }
  return non_decreasing || non_increasing;
}

void check_labels(std::span<const int> labels) {
  bool good = false;
  bool bad = false;
  for (int y : labels) {
    if (y == 0) good = true;
    else if (y == 1) bad = true;
    else throw Error("labels must be 0 or 1");
  }
  if (!good || !bad) throw Error("binning needs both classes in the sample");
}

}  // namespace

std::vector<Bin> supervised_bin(std::span<const double> values, std::span<const int> labels,
                                const BinningConfig& config) {
  config.validate();
  if (values.size() != labels.size()) throw Error("supervised_bin: values and labels differ in length");
  check_labels(labels);

  std::vector<std::pair<double, int>> present;
  Bin missing;
  missing.kind = BinKind::kMissing;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) {
      (labels[i] ? missing.bad : missing.good) += 1;
    } else {
      present.emplace_back(values[i], labels[i]);
    }
  }
  std::sort(present.begin(), present.end());

  std::vector<Bin> bins;
  if (!present.empty()) {
    const std::size_t n = present.size();
    std::vector<double> cuts;
    for (std::size_t i = 1; i < config.max_pre_bins; ++i) {
      const double cut = present[i * n / config.max_pre_bins].first;
      if (cut > present.front().first && (cuts.empty() || cut > cuts.back())) cuts.push_back(cut);
    }
    bins.resize(cuts.size() + 1);
    for (std::size_t k = 0; k < bins.size(); ++k) {
      if (k > 0) bins[k].lo = cuts[k - 1];
      if (k < cuts.size()) bins[k].hi = cuts[k];
    }
    std::size_t k = 0;
    for (const auto& [value, label] : present) {
      while (k + 1 < bins.size() && value >= bins[k].hi) ++k;
      (label ? bins[k].bad : bins[k].good) += 1;
    }

    const double min_count = config.min_bin_fraction * static_cast<double>(values.size());
    while (bins.size() > 1) {
      std::size_t best = 0;
      double best_chi = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
        const double chi = adjacent_chi_square(bins[i].good, bins[i].bad, bins[i + 1].good, bins[i + 1].bad);
        if (chi < best_chi) {
          best_chi = chi;
          best = i;
        }
      }
      const bool too_small = std::any_of(bins.begin(), bins.end(), [&](const Bin& b) {
        return static_cast<double>(b.count()) < min_count;
      });
      const bool unordered = config.monotonic_woe && !is_monotone(bins);
      if (!too_small && !unordered && best_chi >= config.chi_square_threshold) break;
      bins[best].hi = bins[best + 1].hi;
      bins[best].good += bins[best + 1].good;
      bins[best].bad += bins[best + 1].bad;
      bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    }
  }
  if (missing.count() > 0) bins.push_back(missing);
  return bins;
}

std::vector<Bin> class_bins(std::span<const std::string> tokens, std::span<const int> labels) {
  if (tokens.size() != labels.size()) throw Error("class_bins: tokens and labels differ in length");
  check_labels(labels);
  std::map<std::string, Bin> by_class;
  Bin missing;
  missing.kind = BinKind::kMissing;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Bin& bin = tokens[i].empty() ? missing : by_class[tokens[i]];
    (labels[i] ? bin.bad : bin.good) += 1;
  }
  std::vector<Bin> bins;
  for (auto& [token, bin] : by_class) {
    bin.kind = BinKind::kClassSet;
    bin.classes = {token};
    bins.push_back(std::move(bin));
  }
  if (missing.count() > 0) bins.push_back(missing);
  return bins;
}

std::vector<int> labels_of(const Dataset& sample) {
  std::vector<int> labels;
  labels.reserve(sample.size());
  for (const auto& r : sample.records) {
    if (!r.label) throw Error("record '" + r.id + "' has no label");
    labels.push_back(*r.label);
  }
  return labels;
}

Characteristic fit_characteristic(const Dataset& sample, const std::string& attribute, const BinningConfig& config) {
  const auto labels = labels_of(sample);
  Characteristic c;
  c.name = attribute;
  c.attribute = attribute;
  if (const auto idx = sample.schema.numeric_index(attribute)) {
    std::vector<double> values;
    values.reserve(sample.size());
    for (const auto& r : sample.records) values.push_back(r.numeric[*idx]);
    c.type = CharacteristicType::kNumeric;
    c.bins = supervised_bin(values, labels, config);
  } else if (const auto jdx = sample.schema.nominal_index(attribute)) {
    std::vector<std::string> tokens;
    tokens.reserve(sample.size());
    for (const auto& r : sample.records) tokens.push_back(r.nominal[*jdx]);
    c.type = CharacteristicType::kNominal;
    c.bins = class_bins(tokens, labels);
  } else if (const auto kdx = sample.schema.binary_index(attribute)) {
    std::vector<std::string> tokens;
    tokens.reserve(sample.size());
    for (const auto& r : sample.records) {
      const int flag = r.binary[*kdx];
      tokens.push_back(flag == dataset::kMissingFlag ? std::string() : std::to_string(flag));
    }
    c.type = CharacteristicType::kBinary;
    c.bins = class_bins(tokens, labels);
  } else {
    throw Error("fit_characteristic: unknown attribute '" + attribute + "'");
  }
  finalize(c);
  return c;
}

Characteristic build_interaction(const std::vector<Characteristic>& components, const Dataset& sample,
                                 const BinningConfig& config) {
  config.validate();
  if (components.size() < 2 || components.size() > 3) {
    throw Error("build_interaction: needs two or three characteristics");
  }
  const auto labels = labels_of(sample);
  Encoder encoder(sample.schema, components);

  std::map<std::vector<int>, std::pair<std::size_t, std::size_t>> cells;  // tuple -> (good, bad)
  std::size_t unplaced = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    std::vector<int> key;
    key.reserve(components.size());
    for (std::size_t c = 0; c < components.size(); ++c) {
      const auto bin = encoder.bin_index(c, sample.records[i]);
      if (!bin) break;
      key.push_back(static_cast<int>(*bin));
    }
    if (key.size() != components.size()) {
      ++unplaced;
      continue;
    }
    auto& counts = cells[key];
    (labels[i] ? counts.second : counts.first) += 1;
  }
  if (unplaced > 0) {
    throw Error("build_interaction: components were not fitted on this sample (" + std::to_string(unplaced) +
                " records fall outside their bins)");
  }

  Characteristic out;
  std::vector<std::string> names;
  for (const auto& c : components) names.push_back(c.name);
  out.name = join(names, "*");
  out.type = CharacteristicType::kInteraction;
  out.components = components;

  const double min_count = config.min_bin_fraction * static_cast<double>(sample.size());
  Bin catch_all;
  catch_all.kind = BinKind::kCatchAll;
  for (const auto& [key, counts] : cells) {
    const auto [good, bad] = counts;
    if (static_cast<double>(good + bad) < min_count) {
      catch_all.cells.push_back(key);
      catch_all.good += good;
      catch_all.bad += bad;
      continue;
    }
    Bin bin;
    bin.kind = BinKind::kCross;
    bin.cells = {key};
    bin.good = good;
    bin.bad = bad;
    out.bins.push_back(std::move(bin));
  }
  if (!catch_all.cells.empty()) out.bins.push_back(std::move(catch_all));
  if (out.bins.size() < 2) {
    throw Error("build_interaction: '" + out.name + "' has fewer than two surviving cells");
  }
  finalize(out);
  return out;
}

Encoder::Resolved Encoder::resolve(const dataset::Schema& schema, const Characteristic& c) {
  Resolved r;
  r.type = c.type;
  switch (c.type) {
    case CharacteristicType::kNumeric: {
      const auto idx = schema.numeric_index(c.attribute);
      if (!idx) throw Error("schema has no numeric attribute '" + c.attribute + "'");
      r.column = *idx;
      break;
    }
    case CharacteristicType::kNominal: {
      const auto idx = schema.nominal_index(c.attribute);
      if (!idx) throw Error("schema has no nominal attribute '" + c.attribute + "'");
      r.column = *idx;
      break;
    }
    case CharacteristicType::kBinary: {
      const auto idx = schema.binary_index(c.attribute);
      if (!idx) throw Error("schema has no binary attribute '" + c.attribute + "'");
      r.column = *idx;
      break;
    }
    case CharacteristicType::kInteraction:
      for (const auto& component : c.components) r.components.push_back(resolve(schema, component));
      break;
  }
  for (std::size_t b = 0; b < c.bins.size(); ++b) {
    const Bin& bin = c.bins[b];
    switch (bin.kind) {
      case BinKind::kMissing:
        r.missing_bin = b;
        break;
      case BinKind::kClassSet:
        for (const auto& token : bin.classes) {
          r.classes.emplace(token, b);
          if (token == dataset::kOtherClass) r.other_bin = b;
        }
        break;
      case BinKind::kCross:
        for (const auto& key : bin.cells) r.cells.emplace(key, b);
        break;
      case BinKind::kCatchAll:
        r.catch_all = b;
        for (const auto& key : bin.cells) r.cells.emplace(key, b);
        break;
      case BinKind::kInterval:
        break;
    }
  }
  return r;
}

Encoder::Encoder(const dataset::Schema& schema, std::vector<Characteristic> characteristics, UnfamiliarPolicy policy)
    : characteristics_(std::move(characteristics)), policy_(policy) {
  resolved_.reserve(characteristics_.size());
  for (const auto& c : characteristics_) resolved_.push_back(resolve(schema, c));
}

std::vector<std::string> Encoder::names() const {
  std::vector<std::string> out;
  for (const auto& c : characteristics_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> Encoder::locate(const Characteristic& c, const Resolved& r,
                                           const Application& record) const {
  switch (c.type) {
    case CharacteristicType::kNumeric: {
      const double value = record.numeric[r.column];
      if (std::isnan(value)) return r.missing_bin;
      // Intervals come first, ordered and half-open.
      std::size_t lo = 0;
      std::size_t hi = c.bins.size();
      if (r.missing_bin) hi = *r.missing_bin;
      if (hi == 0) return std::nullopt;
      while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (value < c.bins[mid].lo) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      if (value < c.bins[lo].lo || value >= c.bins[lo].hi) return std::nullopt;
      return lo;
    }
    case CharacteristicType::kNominal:
    case CharacteristicType::kBinary: {
      std::string token;
      if (c.type == CharacteristicType::kNominal) {
        token = record.nominal[r.column];
      } else if (record.binary[r.column] != dataset::kMissingFlag) {
        token = std::to_string(record.binary[r.column]);
      }
      if (token.empty()) return r.missing_bin;
      const auto it = r.classes.find(token);
      if (it != r.classes.end()) return it->second;
      if (policy_ == UnfamiliarPolicy::kOtherBin) return r.other_bin;
      return std::nullopt;
    }
    case CharacteristicType::kInteraction: {
      std::vector<int> key;
      key.reserve(r.components.size());
      for (std::size_t i = 0; i < r.components.size(); ++i) {
        const auto bin = locate(c.components[i], r.components[i], record);
        if (!bin) return std::nullopt;
        key.push_back(static_cast<int>(*bin));
      }
      const auto it = r.cells.find(key);
      if (it != r.cells.end()) return it->second;
      return r.catch_all;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> Encoder::bin_index(std::size_t c, const Application& record) const {
  return locate(characteristics_.at(c), resolved_.at(c), record);
}

std::vector<double> Encoder::encode(const Application& record) const {
  std::vector<double> out(characteristics_.size());
  for (std::size_t c = 0; c < characteristics_.size(); ++c) {
    const auto bin = locate(characteristics_[c], resolved_[c], record);
    out[c] = bin ? characteristics_[c].bins[*bin].woe : characteristics_[c].average_woe;
  }
  return out;
}

std::vector<double> Encoder::encode_all(const Dataset& data) const {
  std::vector<double> out;
  out.reserve(data.size() * characteristics_.size());
  for (const auto& r : data.records) {
    for (std::size_t c = 0; c < characteristics_.size(); ++c) {
      const auto bin = locate(characteristics_[c], resolved_[c], r);
      out.push_back(bin ? characteristics_[c].bins[*bin].woe : characteristics_[c].average_woe);
    }
  }
  return out;
}

std::vector<double> encode(const Application& record, const dataset::Schema& schema,
                           const std::vector<Characteristic>& characteristics) {
  return Encoder(schema, characteristics).encode(record);
}

std::string_view type_name(CharacteristicType type) {
  switch (type) {
    case CharacteristicType::kNumeric:
      return "numeric";
    case CharacteristicType::kNominal:
      return "nominal";
    case CharacteristicType::kBinary:
      return "binary";
    case CharacteristicType::kInteraction:
      return "interaction";
  }
  return "?";
}

namespace {

std::string_view kind_name(BinKind kind) {
  switch (kind) {
    case BinKind::kInterval:
      return "interval";
    case BinKind::kClassSet:
      return "class";
    case BinKind::kMissing:
      return "missing";
    case BinKind::kCross:
      return "cross";
    case BinKind::kCatchAll:
      return "catchall";
  }
  return "?";
}

std::string format_bound(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

double parse_bound(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  if (!parse_double(text, v)) throw ParseError("bad bin bound '" + text + "'");
  return v;
}

std::string format_cell(const std::vector<int>& key) {
  std::string out;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i > 0) out += ':';
    out += std::to_string(key[i]);
  }
  return out;
}

void write_one(std::string& out, const Characteristic& c) {
  out += "characteristic\t" + c.name + "\n";
  out += "type\t" + std::string(type_name(c.type)) + "\n";
  if (!c.attribute.empty()) out += "attribute\t" + c.attribute + "\n";
  out += "good\t" + std::to_string(c.total_good) + "\n";
  out += "bad\t" + std::to_string(c.total_bad) + "\n";
  out += "iv\t" + format_double(c.iv) + "\n";
  out += "average_woe\t" + format_double(c.average_woe) + "\n";
  for (const auto& component : c.components) {
    out += "component\n";
    write_one(out, component);
  }
  for (const auto& bin : c.bins) {
    out += "bin\t" + std::string(kind_name(bin.kind)) + "\t" + std::to_string(bin.good) + "\t" +
           std::to_string(bin.bad) + "\t" + format_double(bin.woe) + "\t" + (bin.woe_defined ? "1" : "0");
    switch (bin.kind) {
      case BinKind::kInterval:
        out += "\t" + format_bound(bin.lo) + "\t" + format_bound(bin.hi);
        break;
      case BinKind::kClassSet:
        for (const auto& token : bin.classes) out += "\t" + token;
        break;
      case BinKind::kCross:
      case BinKind::kCatchAll:
        for (const auto& key : bin.cells) out += "\t" + format_cell(key);
        break;
      case BinKind::kMissing:
        break;
    }
    out += "\n";
  }
  out += "end\n";
}

struct LineReader {
  std::vector<std::string> lines;
  std::size_t pos = 0;

  bool done() const { return pos >= lines.size(); }
  std::vector<std::string> next() {
    if (done()) throw ParseError("characteristics: unexpected end of file");
    return split(lines[pos++], '\t');
  }
};

std::size_t parse_count(const std::string& text) {
  long long v = 0;
  if (!parse_int(text, v) || v < 0) throw ParseError("bad count '" + text + "'");
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& text) {
  double v = 0.0;
  if (!parse_double(text, v)) throw ParseError("bad number '" + text + "'");
  return v;
}

CharacteristicType parse_type(const std::string& text) {
  for (auto t : {CharacteristicType::kNumeric, CharacteristicType::kNominal, CharacteristicType::kBinary,
                 CharacteristicType::kInteraction}) {
    if (type_name(t) == text) return t;
  }
  throw ParseError("unknown characteristic type '" + text + "'");
}

BinKind parse_kind(const std::string& text) {
  for (auto k : {BinKind::kInterval, BinKind::kClassSet, BinKind::kMissing, BinKind::kCross, BinKind::kCatchAll}) {
    if (kind_name(k) == text) return k;
  }
  throw ParseError("unknown bin kind '" + text + "'");
}

Characteristic read_one(LineReader& in, const std::vector<std::string>& first) {
  if (first.size() != 2 || first[0] != "characteristic") throw ParseError("expected 'characteristic <name>'");
  Characteristic c;
  c.name = first[1];
  while (true) {
    const auto f = in.next();
    const std::string& key = f[0];
    if (key == "end") break;
    if (key == "component") {
      c.components.push_back(read_one(in, in.next()));
      continue;
    }
    if (key == "bin") {
      if (f.size() < 6) throw ParseError("short bin line in '" + c.name + "'");
      Bin bin;
      bin.kind = parse_kind(f[1]);
      bin.good = parse_count(f[2]);
      bin.bad = parse_count(f[3]);
      bin.woe = parse_real(f[4]);
      bin.woe_defined = f[5] == "1";
      if (bin.kind == BinKind::kInterval) {
        if (f.size() != 8) throw ParseError("interval bin needs two bounds");
        bin.lo = parse_bound(f[6]);
        bin.hi = parse_bound(f[7]);
      } else if (bin.kind == BinKind::kClassSet) {
        bin.classes.assign(f.begin() + 6, f.end());
      } else if (bin.kind == BinKind::kCross || bin.kind == BinKind::kCatchAll) {
        for (std::size_t i = 6; i < f.size(); ++i) {
          std::vector<int> cell;
          for (const auto& part : split(f[i], ':')) cell.push_back(static_cast<int>(parse_count(part)));
          bin.cells.push_back(std::move(cell));
        }
      }
      c.bins.push_back(std::move(bin));
      continue;
    }
    if (f.size() != 2) throw ParseError("malformed line '" + key + "' in '" + c.name + "'");
    if (key == "type") {
      c.type = parse_type(f[1]);
    } else if (key == "attribute") {
      c.attribute = f[1];
    } else if (key == "good") {
      c.total_good = parse_count(f[1]);
    } else if (key == "bad") {
      c.total_bad = parse_count(f[1]);
    } else if (key == "iv") {
      c.iv = parse_real(f[1]);
    } else if (key == "average_woe") {
      c.average_woe = parse_real(f[1]);
    } else {
      throw ParseError("unknown key '" + key + "' in '" + c.name + "'");
    }
  }
  return c;
}

}  // namespace

std::string write_characteristics(const std::vector<Characteristic>& characteristics) {
  std::string out;
  for (const auto& c : characteristics) write_one(out, c);
  return out;
}

std::vector<Characteristic> read_characteristics(const std::string& text) {
  LineReader in;
  for (auto& line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) in.lines.push_back(std::move(line));
  }
  std::vector<Characteristic> out;
  while (!in.done()) out.push_back(read_one(in, in.next()));
  return out;
}

}  // namespace scorecard::binning
