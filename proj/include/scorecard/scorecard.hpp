#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scorecard/binning.hpp"
#include "scorecard/dataset.hpp"
#include "scorecard/evaluation.hpp"
#include "scorecard/models.hpp"

namespace scorecard {

/// Which characteristics to build from a record set.
struct ScorecardSpec {
  std::vector<std::string> attributes;
  /// Each entry names two or more attributes to cross.
  std::vector<std::vector<std::string>> interactions;
  binning::BinningConfig binning;
  binning::UnfamiliarPolicy unfamiliar = binning::UnfamiliarPolicy::kAverageWoe;
};

enum class TrainerKind { kLogistic, kAdaBoost };

struct TrainerConfig {
  TrainerKind kind = TrainerKind::kLogistic;
  std::size_t rounds = 50;
  models::LogisticConfig logistic;

  models::Trainer make() const;
};

enum class StrategyKind { kFullWindow, kThroughTheDoor, kMonthlyEnsemble, kNoiseCleaning };

struct Strategy {
  StrategyKind kind = StrategyKind::kFullWindow;
  /// Training window for kThroughTheDoor.
  std::optional<dataset::SplitWindow> window;
  /// Posterior threshold for kNoiseCleaning.
  double threshold = 0.05;
  models::CombineRule rule = models::CombineRule::kRouteByMonth;

  void validate() const;
};

std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view text);
std::string_view trainer_name(TrainerKind kind);
TrainerKind parse_trainer(std::string_view text);

struct Scorecard {
  std::vector<binning::Characteristic> characteristics;
  binning::UnfamiliarPolicy unfamiliar = binning::UnfamiliarPolicy::kAverageWoe;
  models::ModelBundle bundle;
  /// Ids dropped by noise cleaning.
  std::vector<std::string> removed_ids;

  /// P(bad) per record, routed by application month for monthly bundles.
  std::vector<double> score(const dataset::Dataset& data) const;
  friend bool operator==(const Scorecard&, const Scorecard&) = default;
};

dataset::Dataset subset(const dataset::Dataset& data, const std::vector<std::size_t>& rows);

/// Plain characteristics first, in spec order, then interactions.
std::vector<binning::Characteristic> fit_characteristics(const dataset::Dataset& sample, const ScorecardSpec& spec);

/// WoE design matrix for labeled records.
models::Design encode_design(const dataset::Dataset& data, const std::vector<binning::Characteristic>& chars,
                             binning::UnfamiliarPolicy policy);

Scorecard fit_scorecard(const dataset::Dataset& sample, const ScorecardSpec& spec, const TrainerConfig& trainer,
                        const Strategy& strategy);

/// Stratified k-fold AUC with binning and training refit inside every fold.
evaluation::CvResult cross_validate(const dataset::Dataset& sample, const ScorecardSpec& spec,
                                    const TrainerConfig& trainer, const Strategy& strategy, std::size_t k,
                                    std::uint64_t seed);

/// Forward selection over the spec's attributes and interactions. Returns
/// the spec restricted to the selected characteristics plus the trace.
struct SelectionOutcome {
  ScorecardSpec spec;
  models::SelectionResult result;
};
SelectionOutcome select_characteristics(const dataset::Dataset& sample, const ScorecardSpec& spec,
                                        const TrainerConfig& trainer, std::size_t k, std::uint64_t seed,
                                        double epsilon = 0.0);

std::string write_scorecard(const Scorecard& card);
Scorecard read_scorecard(const std::string& text);

}  // namespace scorecard
