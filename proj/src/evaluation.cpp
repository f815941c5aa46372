#include "scorecard/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scorecard/random.hpp"

namespace scorecard::evaluation {

RocResult auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("auc: scores and labels differ in length");
  RocResult result;
  for (int y : labels) {
    if (y == 1) ++result.n_pos;
    else if (y == 0) ++result.n_neg;
    else throw Error("auc: labels must be 0 or 1");
  }
  if (result.n_pos == 0 || result.n_neg == 0) throw Error("auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum of the positives, with midranks for ties, kept integral.
  unsigned long long doubled_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share midrank (i+1+j)/2.
    const unsigned long long doubled_midrank = i + 1 + j;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) doubled_rank_sum += doubled_midrank;
    }
    i = j;
  }
  const unsigned long long n_pos = result.n_pos;
  // U = R - n_pos (n_pos + 1) / 2, counts concordant pairs plus half the ties.
  const unsigned long long doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
  result.auc = static_cast<double>(doubled_u) / (2.0 * static_cast<double>(result.n_pos) *
                                                 static_cast<double>(result.n_neg));
  return result;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw Error("stratified_folds: k must be at least 2");
  if (k > labels.size()) throw Error("stratified_folds: k exceeds the record count");
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    CounterRng rng(seed, static_cast<std::uint64_t>(cls));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    for (std::size_t i = 0; i < members.size(); ++i) folds[(offset + i) % k].push_back(members[i]);
    offset = (offset + members.size()) % k;
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

CvResult kfold_cv(std::span<const int> labels, std::size_t k, const FoldScorer& scorer, std::uint64_t seed) {
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1;
  const std::size_t neg = labels.size() - pos;
  if (k < 2) throw Error("kfold_cv: k must be at least 2");
  if (k > std::min(pos, neg)) {
    throw Error("kfold_cv: k = " + std::to_string(k) + " exceeds the smaller class count " +
                std::to_string(std::min(pos, neg)));
  }
  const auto folds = stratified_folds(labels, k, seed);
  CvResult result;
  result.k = k;
  result.seed = seed;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train;
    train.reserve(labels.size());
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train.begin(), train.end());
    const auto& valid = folds[f];
    const auto scores = scorer(train, valid);
    if (scores.size() != valid.size()) throw Error("kfold_cv: scorer returned the wrong number of scores");
    std::vector<int> valid_labels;
    valid_labels.reserve(valid.size());
    for (auto i : valid) valid_labels.push_back(labels[i]);
    result.fold_auc.push_back(auc(scores, valid_labels).auc);
  }
  const double n = static_cast<double>(k);
  result.mean = std::accumulate(result.fold_auc.begin(), result.fold_auc.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : result.fold_auc) ss += (a - result.mean) * (a - result.mean);
  result.stddev = std::sqrt(ss / (n - 1.0));
  return result;
}

double psi(std::span<const double> baseline, std::span<const double> comparison, double floor) {
  if (baseline.size() != comparison.size() || baseline.empty()) {
    throw Error("psi: distributions must share the same non-empty bin structure");
  }
  if (!(floor > 0.0)) throw Error("psi: floor must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (baseline[i] < 0.0 || comparison[i] < 0.0) throw Error("psi: negative proportion");
    const double p = std::max(baseline[i], floor);
    const double q = std::max(comparison[i], floor);
    total += (p - q) * std::log(p / q);
  }
  return total;
}

double degradation(double auc_test, double auc_holdout) {
  const double points = (auc_test - auc_holdout) * 100.0;
  return std::round(points * 1e10) / 1e10;
}

std::string write_metrics(const MetricsReport& report) {
  std::string out = "section,key,value\n";
  auto row = [&](const std::string& section, const std::string& key, const std::string& value) {
    out += section + "," + key + "," + value + "\n";
  };
  row("summary", "auc", format_fixed(report.auc, 6));
  row("summary", "gini", format_fixed(2.0 * report.auc - 1.0, 6));
  row("summary", "n_pos", std::to_string(report.n_pos));
  row("summary", "n_neg", std::to_string(report.n_neg));
  if (report.has_holdout) {
    row("summary", "holdout_auc", format_fixed(report.holdout_auc, 6));
    row("summary", "holdout_gini", format_fixed(2.0 * report.holdout_auc - 1.0, 6));
  }
  if (report.has_cv) {
    row("cv", "k", std::to_string(report.cv.k));
    row("cv", "seed", std::to_string(report.cv.seed));
    row("cv", "mean_auc", format_fixed(report.cv.mean, 6));
    row("cv", "stddev_auc", format_fixed(report.cv.stddev, 6));
    for (std::size_t f = 0; f < report.cv.fold_auc.size(); ++f) {
      row("fold", std::to_string(f + 1), format_fixed(report.cv.fold_auc[f], 6));
    }
  }
  for (const auto& [name, value] : report.psi) row("psi", name, format_fixed(value, 6));
  if (report.has_cv && report.has_holdout) {
    row("degradation", "points", format_fixed(degradation(report.cv.mean, report.holdout_auc), 2));
  }
  return out;
}

}  // namespace scorecard::evaluation
