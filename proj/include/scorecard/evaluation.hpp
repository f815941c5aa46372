#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scorecard/common.hpp"

namespace scorecard::evaluation {

struct RocResult {
  double auc = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  static constexpr std::string_view kTieHandling = "tied pairs count one half";
};

/// Mann-Whitney AUC: P(score of a bad > score of a good) + P(tie) / 2.
/// Higher score means higher predicted probability of bad. Throws when a class is absent.
RocResult auc(std::span<const double> scores, std::span<const int> labels);

/// Validation index sets for stratified k-fold. Each class is shuffled with
/// the pinned generator and dealt round-robin, so every fold holds
/// floor or ceil of n_c / k records of class c. Any 2 <= k <= n is accepted.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed);

/// Scores for `valid` from a model trained on `train` (refit everything inside).
using FoldScorer =
    std::function<std::vector<double>(const std::vector<std::size_t>& train, const std::vector<std::size_t>& valid)>;

struct CvResult {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> fold_auc;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Stratified k-fold AUC. Requires 2 <= k <= the smaller class count so every
/// validation fold holds both classes.
CvResult kfold_cv(std::span<const int> labels, std::size_t k, const FoldScorer& scorer, std::uint64_t seed);

inline constexpr double kPsiFloor = 1e-4;

/// Population stability index: sum of (p - q) ln(p / q), proportions floored at `floor`.
double psi(std::span<const double> baseline, std::span<const double> comparison, double floor = kPsiFloor);

/// Absolute AUC drop in percentage points, rounded to 1e-10 so decimal inputs give decimal outputs.
double degradation(double auc_test, double auc_holdout);

struct MetricsReport {
  double auc = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  bool has_cv = false;
  CvResult cv;
  bool has_holdout = false;
  double holdout_auc = 0.5;
  std::vector<std::pair<std::string, double>> psi;
};

/// `section,key,value` rows: summary (auc, gini, counts), cv (k, seed, mean,
/// stddev), fold (index, auc), psi (characteristic, value), and degradation
/// when both a CV mean and a holdout AUC are present.
std::string write_metrics(const MetricsReport& report);

}  // namespace scorecard::evaluation
