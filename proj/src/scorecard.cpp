#include "scorecard/scorecard.hpp"

#include <algorithm>
#include <set>

namespace scorecard {

using binning::Characteristic;
using binning::UnfamiliarPolicy;
using dataset::Dataset;

models::Trainer TrainerConfig::make() const {
  if (kind == TrainerKind::kAdaBoost) {
    const std::size_t n = rounds;
    return [n](const models::Design& d) -> models::Model { return models::train_adaboost(d, n); };
  }
  const models::LogisticConfig config = logistic;
  return [config](const models::Design& d) -> models::Model { return models::train_logistic(d, config); };
}

void Strategy::validate() const {
  if (kind == StrategyKind::kThroughTheDoor && !window) throw Error("through_the_door needs a window");
  if (kind == StrategyKind::kNoiseCleaning && !(threshold > 0.0 && threshold < 0.5)) {
    throw Error("cleaning threshold must be in (0, 0.5)");
  }
}

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kFullWindow: return "full_window";
    case StrategyKind::kThroughTheDoor: return "through_the_door";
    case StrategyKind::kMonthlyEnsemble: return "monthly_ensemble";
    case StrategyKind::kNoiseCleaning: return "cleaning";
  }
  return "full_window";
}

StrategyKind parse_strategy(std::string_view text) {
  for (auto k : {StrategyKind::kFullWindow, StrategyKind::kThroughTheDoor, StrategyKind::kMonthlyEnsemble,
                 StrategyKind::kNoiseCleaning}) {
    if (strategy_name(k) == text) return k;
  }
  throw ParseError("unknown strategy '" + std::string(text) + "'");
}

std::string_view trainer_name(TrainerKind kind) { return kind == TrainerKind::kAdaBoost ? "adaboost" : "logistic"; }

TrainerKind parse_trainer(std::string_view text) {
  if (text == "logistic") return TrainerKind::kLogistic;
  if (text == "adaboost") return TrainerKind::kAdaBoost;
  throw ParseError("unknown trainer '" + std::string(text) + "'");
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.schema = data.schema;
  out.records.reserve(rows.size());
  for (auto r : rows) out.records.push_back(data.records.at(r));
  return out;
}

std::vector<Characteristic> fit_characteristics(const Dataset& sample, const ScorecardSpec& spec) {
  std::vector<Characteristic> out;
  for (const auto& attribute : spec.attributes) out.push_back(binning::fit_characteristic(sample, attribute, spec.binning));
  for (const auto& group : spec.interactions) {
    if (group.size() < 2) throw Error("an interaction needs at least two attributes");
    std::vector<Characteristic> components;
    for (const auto& attribute : group) {
      const auto it = std::find_if(out.begin(), out.end(), [&](const Characteristic& c) { return c.attribute == attribute; });
      components.push_back(it != out.end() ? *it : binning::fit_characteristic(sample, attribute, spec.binning));
    }
    out.push_back(binning::build_interaction(components, sample, spec.binning));
  }
  return out;
}

models::Design encode_design(const Dataset& data, const std::vector<Characteristic>& chars, UnfamiliarPolicy policy) {
  const binning::Encoder encoder(data.schema, chars, policy);
  models::Design design;
  design.names = encoder.names();
  design.x = encoder.encode_all(data);
  design.y = binning::labels_of(data);
  return design;
}

namespace {

std::vector<int> months_of(const Dataset& data) {
  std::vector<int> months;
  months.reserve(data.size());
  for (const auto& r : data.records) months.push_back(r.period().month);
  return months;
}

void stamp(models::ModelBundle& bundle, const Strategy& strategy) {
  if (strategy.kind == StrategyKind::kMonthlyEnsemble) return;
  for (auto& m : bundle.models) {
    auto& info = models::training_info(m);
    info.strategy = std::string(strategy_name(strategy.kind));
    info.window = strategy.window ? dataset::format_window(*strategy.window) : std::string();
  }
}

}  // namespace

std::vector<double> Scorecard::score(const Dataset& data) const {
  const binning::Encoder encoder(data.schema, characteristics, unfamiliar);
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& record : data.records) {
    out.push_back(bundle.predict(encoder.encode(record), record.period().month));
  }
  return out;
}

Scorecard fit_scorecard(const Dataset& sample, const ScorecardSpec& spec, const TrainerConfig& trainer,
                        const Strategy& strategy) {
  strategy.validate();
  const Dataset* training = &sample;
  Dataset windowed;
  if (strategy.kind == StrategyKind::kThroughTheDoor) {
    auto part = dataset::temporal_split(sample, *strategy.window);
    if (part.inside.size() == 0) throw Error("through_the_door: window selects no records");
    windowed = std::move(part.inside);
    training = &windowed;
  }

  Scorecard card;
  card.unfamiliar = spec.unfamiliar;
  card.characteristics = fit_characteristics(*training, spec);
  const auto design = encode_design(*training, card.characteristics, spec.unfamiliar);
  const auto train = trainer.make();

  switch (strategy.kind) {
    case StrategyKind::kFullWindow:
    case StrategyKind::kThroughTheDoor:
      card.bundle = models::single_model(train(design));
      break;
    case StrategyKind::kMonthlyEnsemble:
      card.bundle = models::monthly_ensemble(design, months_of(*training), train, strategy.rule);
      break;
    case StrategyKind::kNoiseCleaning: {
      auto cleaned = models::clean_and_retrain(train, design, strategy.threshold);
      card.bundle = models::single_model(std::move(cleaned.model));
      for (auto i : cleaned.removed) card.removed_ids.push_back(training->records[i].id);
      break;
    }
  }
  stamp(card.bundle, strategy);
  return card;
}

evaluation::CvResult cross_validate(const Dataset& sample, const ScorecardSpec& spec, const TrainerConfig& trainer,
                                    const Strategy& strategy, std::size_t k, std::uint64_t seed) {
  const auto labels = binning::labels_of(sample);
  const evaluation::FoldScorer scorer = [&](const std::vector<std::size_t>& train,
                                            const std::vector<std::size_t>& valid) {
    const Scorecard card = fit_scorecard(subset(sample, train), spec, trainer, strategy);
    return card.score(subset(sample, valid));
  };
  return evaluation::kfold_cv(labels, k, scorer, seed);
}

SelectionOutcome select_characteristics(const Dataset& sample, const ScorecardSpec& spec, const TrainerConfig& trainer,
                                        std::size_t k, std::uint64_t seed, double epsilon) {
  const auto labels = binning::labels_of(sample);
  const auto full = fit_characteristics(sample, spec);
  std::vector<models::Candidate> candidates;
  for (const auto& c : full) candidates.push_back({c.name, c.iv});

  const auto validation = evaluation::stratified_folds(labels, k, seed);
  std::vector<models::Fold> folds;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train.insert(train.end(), validation[g].begin(), validation[g].end());
    }
    std::sort(train.begin(), train.end());
    const Dataset train_set = subset(sample, train);
    const Dataset valid_set = subset(sample, validation[f]);
    const auto chars = fit_characteristics(train_set, spec);
    folds.push_back({encode_design(train_set, chars, spec.unfamiliar), encode_design(valid_set, chars, spec.unfamiliar)});
  }

  SelectionOutcome outcome;
  outcome.result = models::forward_select(candidates, folds, trainer.make(), epsilon);
  const std::set<std::string> chosen(outcome.result.selected.begin(), outcome.result.selected.end());
  outcome.spec = spec;
  outcome.spec.attributes.clear();
  outcome.spec.interactions.clear();
  for (const auto& attribute : spec.attributes) {
    if (chosen.count(attribute)) outcome.spec.attributes.push_back(attribute);
  }
  for (const auto& group : spec.interactions) {
    if (chosen.count(join(group, "*"))) outcome.spec.interactions.push_back(group);
  }
  return outcome;
}

namespace {

constexpr std::string_view kCharacteristicsSection = "[characteristics]";
constexpr std::string_view kBundleSection = "[bundle]";

}  // namespace

std::string write_scorecard(const Scorecard& card) {
  std::string out = "scorecard\t1\n";
  out += std::string("unfamiliar\t") +
         (card.unfamiliar == UnfamiliarPolicy::kOtherBin ? "other_bin" : "average_woe") + "\n";
  for (const auto& id : card.removed_ids) out += "removed\t" + id + "\n";
  out += std::string(kCharacteristicsSection) + "\n";
  out += binning::write_characteristics(card.characteristics);
  out += std::string(kBundleSection) + "\n";
  out += models::write_bundle(card.bundle);
  return out;
}

Scorecard read_scorecard(const std::string& text) {
  const auto chars_at = text.find(std::string(kCharacteristicsSection) + "\n");
  const auto bundle_at = text.find(std::string(kBundleSection) + "\n");
  if (chars_at == std::string::npos || bundle_at == std::string::npos || bundle_at < chars_at) {
    throw ParseError("scorecard: missing [characteristics] or [bundle] section");
  }
  Scorecard card;
  bool versioned = false;
  for (const auto& line : split(text.substr(0, chars_at), '\n')) {
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 2) throw ParseError("scorecard: bad header line '" + line + "'");
    if (f[0] == "scorecard") {
      if (f[1] != "1") throw ParseError("scorecard: unsupported version " + f[1]);
      versioned = true;
    } else if (f[0] == "unfamiliar") {
      if (f[1] == "other_bin") card.unfamiliar = UnfamiliarPolicy::kOtherBin;
      else if (f[1] == "average_woe") card.unfamiliar = UnfamiliarPolicy::kAverageWoe;
      else throw ParseError("scorecard: unknown unfamiliar policy '" + f[1] + "'");
    } else if (f[0] == "removed") {
      card.removed_ids.push_back(f[1]);
    } else {
      throw ParseError("scorecard: unknown header key '" + f[0] + "'");
    }
  }
  if (!versioned) throw ParseError("scorecard: missing version line");
  const auto chars_begin = chars_at + kCharacteristicsSection.size() + 1;
  card.characteristics = binning::read_characteristics(text.substr(chars_begin, bundle_at - chars_begin));
  card.bundle = models::read_bundle(text.substr(bundle_at + kBundleSection.size() + 1));
  return card;
}

}  // namespace scorecard
