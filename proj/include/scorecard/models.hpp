#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scorecard/common.hpp"

namespace scorecard::models {

/// Row-major feature matrix with binary labels (1 = bad).
struct Design {
  std::vector<std::string> names;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return names.size(); }
  double at(std::size_t row, std::size_t col) const { return x[row * names.size() + col]; }
  std::span<const double> row(std::size_t r) const { return {x.data() + r * names.size(), names.size()}; }

  Design select_rows(std::span<const std::size_t> rows) const;
  Design select_cols(std::span<const std::size_t> cols) const;
  void validate() const;
};

struct TrainingInfo {
  std::string strategy = "full_window";
  std::string window;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  double ridge = 0.0;

  friend bool operator==(const TrainingInfo&, const TrainingInfo&) = default;
};

/// Ridge applied when unpenalized weights diverge (perfect separation).
inline constexpr double kMinimumRidge = 1e-6;

struct LogisticConfig {
  double tolerance = 1e-8;
  std::size_t max_iterations = 100;
  double ridge = kMinimumRidge;

  void validate() const;
};

struct LogisticModel {
  double intercept = 0.0;
  std::vector<std::string> names;
  std::vector<double> weights;
  TrainingInfo info;

  double linear(std::span<const double> x) const;
  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double gradient_norm) : Error(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

/// Newton-Raphson / IRLS on the ridge-penalized log-likelihood (intercept
/// unpenalized), from zero, with step halving. Converged when the gradient
/// max-norm is at most the tolerance. A zero ridge that lets the weights
/// diverge is retried with kMinimumRidge.
/// `objective_trace`, when given, receives the penalized log-likelihood after each iteration.
LogisticModel train_logistic(const Design& data, const LogisticConfig& config = {},
                             std::vector<double>* objective_trace = nullptr);

/// Gradient of the penalized log-likelihood at the model's coefficients.
std::vector<double> logistic_gradient(const LogisticModel& model, const Design& data, double ridge);
double penalized_log_likelihood(const LogisticModel& model, const Design& data, double ridge);

/// Decision stump on one feature: votes `polarity` when x >= threshold,
/// otherwise -polarity. A vote of +1 means bad.
struct Stump {
  std::size_t feature = 0;
  std::string name;
  double threshold = 0.0;
  int polarity = 1;
  double alpha = 0.0;
  double weighted_error = 0.0;

  int vote(std::span<const double> x) const { return x[feature] >= threshold ? polarity : -polarity; }
  friend bool operator==(const Stump&, const Stump&) = default;
};

struct StumpEnsemble {
  std::vector<std::string> names;
  std::vector<Stump> rounds;
  /// Ensemble training error (share with t * F <= 0) after each round.
  std::vector<double> training_error;
  /// Sum of the sample weights after each reweighting.
  std::vector<double> weight_sums;
  TrainingInfo info;

  double margin(std::span<const double> x) const;
  friend bool operator==(const StumpEnsemble&, const StumpEnsemble&) = default;
};

/// Discrete AdaBoost over single-feature stumps. Stops early when no stump
/// beats one half (throws if that happens in the first round) or a stump is perfect.
StumpEnsemble train_adaboost(const Design& data, std::size_t rounds);

using Model = std::variant<LogisticModel, StumpEnsemble>;

/// P(bad) strictly inside (0, 1). Logistic: sigmoid(b + w.x). Stumps: sigmoid(2 F).
double predict(const LogisticModel& model, std::span<const double> x);
double predict(const StumpEnsemble& model, std::span<const double> x);
double predict(const Model& model, std::span<const double> x);
std::vector<double> predict_all(const Model& model, const Design& data);
const std::vector<std::string>& feature_names(const Model& model);
TrainingInfo& training_info(Model& model);
const TrainingInfo& training_info(const Model& model);

using Trainer = std::function<Model(const Design&)>;

enum class CombineRule { kRouteByMonth, kAverage };

/// One model, or twelve indexed by month of year (index 0 = January).
struct ModelBundle {
  std::vector<Model> models;
  CombineRule rule = CombineRule::kRouteByMonth;

  bool monthly() const { return models.size() == 12; }
  double predict(std::span<const double> x, int month) const;
  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

ModelBundle single_model(Model model);

/// Twelve models, each trained on the rows whose month of year matches.
/// Throws naming the month when a slice lacks a class.
ModelBundle monthly_ensemble(const Design& data, std::span<const int> months, const Trainer& trainer,
                             CombineRule rule = CombineRule::kRouteByMonth);

struct CleaningResult {
  Model model;
  Model first_pass;
  std::vector<std::size_t> removed;  // row indices, ascending
  std::string warning;
};

/// Trains, drops rows whose posterior of their true class is below the
/// threshold, retrains on the rest. Falls back to the first model with a
/// warning when the removal would empty a class.
CleaningResult clean_and_retrain(const Trainer& trainer, const Design& data, double threshold);

struct Candidate {
  std::string name;
  double iv = 0.0;
};

/// One cross-validation fold with every candidate as a column, in candidate order.
struct Fold {
  Design train;
  Design valid;
};

struct SelectionStep {
  std::string added;
  double mean_auc = 0.5;
  std::vector<std::pair<std::string, double>> evaluated;
};

struct SelectionResult {
  std::vector<std::string> selected;
  double baseline_auc = 0.5;
  std::vector<SelectionStep> trace;
};

/// Greedy forward selection on mean fold AUC. Stops when the best candidate
/// improves the mean by no more than `epsilon`. Ties go to the higher IV, then the name.
SelectionResult forward_select(const std::vector<Candidate>& candidates, const std::vector<Fold>& folds,
                               const Trainer& trainer, double epsilon = 0.0);

std::string write_model(const Model& model);
std::string write_bundle(const ModelBundle& bundle);
ModelBundle read_bundle(const std::string& text);

}  // namespace scorecard::models
