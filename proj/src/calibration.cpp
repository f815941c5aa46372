#include "scorecard/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace scorecard::calibration {

namespace {

bool is_quarter_text(std::string_view text) { return text.size() == 7 && text[4] == '-' && text[5] == 'Q'; }

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

struct Rows {
  std::vector<std::pair<std::string, double>> rows;
};

Rows read_rows(const std::string& text) {
  Rows out;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto trimmed = std::string(trim(line));
    if (trimmed.empty()) continue;
    const auto f = split(trimmed, ',');
    if (f.size() != 2) throw ParseError("series line " + std::to_string(line_no) + ": expected two columns");
    double value = 0.0;
    if (!parse_double(trim(f[1]), value)) {
      if (!header_seen && out.rows.empty()) {
        header_seen = true;
        continue;
      }
      throw ParseError("series line " + std::to_string(line_no) + ": bad value '" + f[1] + "'");
    }
    out.rows.emplace_back(std::string(trim(f[0])), value);
  }
  return out;
}

double logit_stable(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

Quarter Quarter::parse(std::string_view text) {
  long long year = 0;
  long long q = 0;
  if (!is_quarter_text(text) || !parse_int(text.substr(0, 4), year) || !parse_int(text.substr(6, 1), q) || q < 1 ||
      q > 4) {
    throw ParseError("bad quarter '" + std::string(text) + "' (expected YYYY-Qn)");
  }
  return {static_cast<int>(year), static_cast<int>(q)};
}

std::string Quarter::str() const { return std::to_string(year) + "-Q" + std::to_string(q); }

void MacroSeries::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].second)) throw Error("macro series " + name + ": non-finite value");
    if (i > 0 && points[i].first != points[i - 1].first.next()) {
      throw Error("macro series " + name + ": quarters must be consecutive (" + points[i - 1].first.str() + " then " +
                  points[i].first.str() + ")");
    }
  }
}

std::optional<double> MacroSeries::at(const Quarter& quarter) const {
  for (const auto& [q, v] : points) {
    if (q == quarter) return v;
  }
  return std::nullopt;
}

void DefaultSeries::validate() const {
  for (std::size_t i = 0; i < monthly.size(); ++i) {
    const double r = monthly[i].second;
    if (!(r >= 0.0 && r <= 1.0)) throw Error("default series: rate outside [0, 1] at " + monthly[i].first.str());
    if (i > 0 && !(monthly[i - 1].first < monthly[i].first)) {
      throw Error("default series: months must be strictly increasing at " + monthly[i].first.str());
    }
  }
}

std::optional<double> DefaultSeries::at(const YearMonth& month) const {
  for (const auto& [m, v] : monthly) {
    if (m == month) return v;
  }
  return std::nullopt;
}

std::vector<std::pair<Quarter, double>> DefaultSeries::quarterly() const {
  std::map<Quarter, std::vector<double>> grouped;
  for (const auto& [m, v] : monthly) grouped[Quarter::of(m)].push_back(v);
  std::vector<std::pair<Quarter, double>> out;
  for (const auto& [q, values] : grouped) {
    if (values.size() == 3) out.emplace_back(q, (values[0] + values[1] + values[2]) / 3.0);
  }
  return out;
}

DefaultSeries default_series_from(const dataset::Dataset& data) {
  std::map<YearMonth, std::pair<std::size_t, std::size_t>> counts;  // bad, total
  for (const auto& r : data.records) {
    if (!r.label) continue;
    auto& c = counts[r.period()];
    c.first += *r.label == 1;
    ++c.second;
  }
  DefaultSeries out;
  for (const auto& [m, c] : counts) {
    out.monthly.emplace_back(m, static_cast<double>(c.first) / static_cast<double>(c.second));
  }
  return out;
}

RegressionFit fit_ols(const std::string& name, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("fit_ols: series differ in length");
  if (x.size() < 3) throw Error("fit_ols: " + name + " has fewer than 3 points");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("fit_ols: " + name + " is constant, correlation undefined");
  if (syy == 0.0) throw Error("fit_ols: default series is constant, correlation undefined");
  RegressionFit fit;
  fit.predictor = name;
  fit.n_points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  fit.r_square = fit.r * fit.r;
  return fit;
}

MacroSeries repair_abnormal(const MacroSeries& series, const std::set<Quarter>& flagged) {
  MacroSeries out = series;
  for (const auto& q : flagged) {
    const auto it = std::find_if(out.points.begin(), out.points.end(), [&](const auto& p) { return p.first == q; });
    if (it == out.points.end()) throw Error("repair_abnormal: " + q.str() + " is not in " + series.name);
    std::vector<double> neighbours;
    for (const auto& n : {q.prev(), q.next()}) {
      // Neighbours come from the original series so repairs do not chain.
      if (const auto v = series.at(n); v && !flagged.count(n)) neighbours.push_back(*v);
    }
    if (neighbours.empty()) throw Error("repair_abnormal: " + q.str() + " has no usable neighbour");
    it->second = mean_of(neighbours);
  }
  for (const auto& q : flagged) out.abnormal.erase(q);
  return out;
}

MacroSeries repair_abnormal(const MacroSeries& series) { return repair_abnormal(series, series.abnormal); }

Ranking rank_predictors(const DefaultSeries& defaults, const std::vector<MacroSeries>& candidates,
                        const std::optional<QuarterWindow>& window) {
  const auto quarterly = defaults.quarterly();
  Ranking out;
  for (const auto& candidate : candidates) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& [q, d] : quarterly) {
      if (window && !window->contains(q)) continue;
      if (const auto v = candidate.at(q)) {
        x.push_back(*v);
        y.push_back(d);
      }
    }
    if (x.size() < 3) {
      out.excluded.emplace_back(candidate.name, "fewer than 3 overlapping quarters");
      continue;
    }
    try {
      out.fits.push_back(fit_ols(candidate.name, x, y));
    } catch (const Error& e) {
      out.excluded.emplace_back(candidate.name, e.what());
    }
  }
  std::sort(out.fits.begin(), out.fits.end(), [](const RegressionFit& a, const RegressionFit& b) {
    if (std::abs(a.r) != std::abs(b.r)) return std::abs(a.r) > std::abs(b.r);
    return a.predictor < b.predictor;
  });
  return out;
}

void Scenario::validate() const {
  if (variant < 1 || variant > 3) throw Error("scenario variant must be 1, 2 or 3");
  if (!(uplift_factor > 0.0)) throw Error("scenario uplift factor must be positive");
  for (int m : uplift_months) {
    if (m < 1 || m > 12) throw Error("scenario uplift month out of range");
  }
}

Forecast forecast_default(const Scenario& scenario, const RegressionFit& fit, const MacroSeries& predictor, int year) {
  scenario.validate();
  Forecast out;
  out.year = year;
  for (int q = 1; q <= 4; ++q) {
    const Quarter source = Quarter{year, q}.prev();
    const auto value = predictor.at(source);
    if (!value) throw Error("forecast_default: predictor " + predictor.name + " has no value for " + source.str());
    out.quarterly.push_back(fit.predict(*value));
  }
  for (int m = 0; m < 12; ++m) out.monthly.push_back(out.quarterly[static_cast<std::size_t>(m / 3)]);
  if (scenario.variant == 1) return out;

  const double average = mean_of(out.monthly);
  for (int m = 1; m <= 12; ++m) {
    const bool uplift = scenario.variant == 3 && scenario.uplift_months.count(m);
    out.monthly[static_cast<std::size_t>(m - 1)] = uplift ? average * scenario.uplift_factor : average;
  }
  return out;
}

ShiftResult shift_scores(std::span<const double> scores, double target, double tolerance) {
  if (!(target > 0.0 && target < 1.0)) throw Error("shift_scores: target must lie in (0, 1)");
  if (scores.empty()) throw Error("shift_scores: no scores");
  std::vector<double> z;
  z.reserve(scores.size());
  for (double s : scores) {
    if (!(s > 0.0 && s < 1.0)) throw Error("shift_scores: scores must lie in (0, 1)");
    z.push_back(logit_stable(s));
  }
  auto apply = [&](double delta, std::vector<double>& out) {
    out.resize(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      out[i] = sigmoid(z[i] + delta);
      sum += out[i];
    }
    return sum / static_cast<double>(z.size());
  };

  ShiftResult result;
  const double current = mean_of(scores);
  if (std::abs(current - target) <= tolerance) {
    result.adjusted.assign(scores.begin(), scores.end());
    result.achieved_mean = current;
    return result;
  }

  std::vector<double> buffer;
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;
  if (current < target) {
    while (apply(hi, buffer) < target) {
      lo = hi;
      hi += step;
      step *= 2.0;
      if (hi > 200.0) throw Error("shift_scores: cannot bracket target " + format_double(target));
    }
  } else {
    while (apply(lo, buffer) > target) {
      hi = lo;
      lo -= step;
      step *= 2.0;
      if (lo < -200.0) throw Error("shift_scores: cannot bracket target " + format_double(target));
    }
  }
  // Bisect until the bracket collapses and keep the closest mean, so the
  // result sits well inside the tolerance rather than at its edge.
  double best_gap = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double mean = apply(mid, buffer);
    const double gap = std::abs(mean - target);
    if (gap < best_gap) {
      best_gap = gap;
      result.delta = mid;
      result.achieved_mean = mean;
      result.adjusted = buffer;
    }
    if (mean == target) break;
    (mean < target ? lo : hi) = mid;
  }
  if (best_gap <= tolerance) return result;
  throw Error("shift_scores: no convergence, bracket [" + format_double(lo) + ", " + format_double(hi) + "]");
}

CalibrationShift shift_by_month(std::span<const double> scores, std::span<const int> months,
                                std::span<const double> targets, double tolerance) {
  if (scores.size() != months.size()) throw Error("shift_by_month: one month per score required");
  if (targets.size() != 12) throw Error("shift_by_month: twelve monthly targets required");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < months.size(); ++i) {
    if (months[i] < 1 || months[i] > 12) throw Error("shift_by_month: month out of range");
    groups[months[i]].push_back(i);
  }
  CalibrationShift out;
  out.tolerance = tolerance;
  out.adjusted.assign(scores.size(), 0.0);
  for (const auto& [month, rows] : groups) {
    std::vector<double> slice;
    slice.reserve(rows.size());
    for (auto i : rows) slice.push_back(scores[i]);
    const double target = targets[static_cast<std::size_t>(month - 1)];
    const auto shifted = shift_scores(slice, target, tolerance);
    out.delta[month] = shifted.delta;
    out.target[month] = target;
    out.achieved[month] = shifted.achieved_mean;
    for (std::size_t j = 0; j < rows.size(); ++j) out.adjusted[rows[j]] = shifted.adjusted[j];
  }
  return out;
}

CalibrationShift shift_global(std::span<const double> scores, double target, double tolerance) {
  auto shifted = shift_scores(scores, target, tolerance);
  CalibrationShift out;
  out.tolerance = tolerance;
  out.delta[0] = shifted.delta;
  out.target[0] = target;
  out.achieved[0] = shifted.achieved_mean;
  out.adjusted = std::move(shifted.adjusted);
  return out;
}

Distance distance_d(std::span<const double> estimates, std::span<const double> observed) {
  if (estimates.size() != 12 || observed.size() != 12) throw Error("distance_d: twelve monthly values required");
  Distance out;
  for (std::size_t m = 0; m < 12; ++m) {
    if (!(observed[m] > 0.0)) throw Error("distance_d: observed rate for month " + std::to_string(m + 1) + " is not positive");
    const double diff = estimates[m] - observed[m];
    out.d += diff * diff / observed[m];
  }
  out.mean_estimate = mean_of(estimates);
  out.mean_observed = mean_of(observed);
  out.valid = out.mean_estimate >= 0.5 * out.mean_observed && out.mean_estimate <= 2.0 * out.mean_observed;
  return out;
}

CutoffResult apply_cutoff(std::span<const double> adjusted, double cutoff) {
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw Error("apply_cutoff: cutoff must lie in (0, 1)");
  CutoffResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < adjusted.size(); ++i) {
    if (adjusted[i] < cutoff) {
      out.approved.push_back(i);
      sum += adjusted[i];
    }
  }
  if (out.approved.empty()) throw Error("apply_cutoff: no application scores below " + format_double(cutoff));
  out.expected_rate = sum / static_cast<double>(out.approved.size());
  return out;
}

MacroSeries read_macro(const std::string& text, const std::string& name) {
  MacroSeries out;
  out.name = name;
  for (const auto& [period, value] : read_rows(text).rows) {
    if (is_quarter_text(period)) {
      out.points.emplace_back(Quarter::parse(period), value);
    } else {
      throw ParseError("macro series " + name + ": period '" + period + "' is not YYYY-Qn");
    }
  }
  out.validate();
  return out;
}

DefaultSeries read_defaults(const std::string& text) {
  DefaultSeries out;
  for (const auto& [period, value] : read_rows(text).rows) out.monthly.emplace_back(YearMonth::parse(period), value);
  out.validate();
  return out;
}

std::string write_macro(const MacroSeries& series) {
  std::string out = "period,value\n";
  for (const auto& [q, v] : series.points) out += q.str() + "," + format_double(v) + "\n";
  return out;
}

std::string write_defaults(const DefaultSeries& series) {
  std::string out = "period,value\n";
  for (const auto& [m, v] : series.monthly) out += m.str() + "," + format_double(v) + "\n";
  return out;
}

std::string write_forecast(const Forecast& forecast, const std::optional<std::vector<double>>& observed) {
  std::string out = observed ? "period,estimate,observed\n" : "period,estimate\n";
  for (int m = 1; m <= 12; ++m) {
    out += YearMonth{forecast.year, m}.str() + "," + format_double(forecast.monthly[static_cast<std::size_t>(m - 1)]);
    if (observed) out += "," + format_double((*observed)[static_cast<std::size_t>(m - 1)]);
    out += "\n";
  }
  out += "summary,mean=" + format_double(mean_of(forecast.monthly));
  if (observed) {
    const auto d = distance_d(forecast.monthly, *observed);
    out += ";D=" + format_double(d.d) + ";valid=" + (d.valid ? "true" : "false");
  }
  out += "\n";
  return out;
}

}  // namespace scorecard::calibration
