#include "scorecard/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "scorecard/evaluation.hpp"

namespace scorecard::models {

namespace {

constexpr double kSeparationLinearLimit = 30.0;

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double exact_sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

void check_both_classes(std::span<const int> y, const std::string& who) {
  bool good = false;
  bool bad = false;
  for (int v : y) {
    if (v == 0) good = true;
    else if (v == 1) bad = true;
    else throw Error(who + ": labels must be 0 or 1");
  }
  if (!good || !bad) throw Error(who + ": both classes must be present");
}

Eigen::MatrixXd with_intercept(const Design& data) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto p = static_cast<Eigen::Index>(data.cols());
  Eigen::MatrixXd x(n, p + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < p; ++j) x(i, j + 1) = data.x[static_cast<std::size_t>(i * p + j)];
  }
  return x;
}

double objective(const Eigen::VectorXd& eta, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double ridge) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
  return ll - 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
}

Eigen::VectorXd gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                         const Eigen::VectorXd& beta, double ridge) {
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) residual(i) = y(i) - exact_sigmoid(eta(i));
  Eigen::VectorXd g = x.transpose() * residual;
  g.tail(g.size() - 1) -= ridge * beta.tail(beta.size() - 1);
  return g;
}

struct IrlsOutcome {
  Eigen::VectorXd beta;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  bool diverged = false;
};

IrlsOutcome irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge, const LogisticConfig& config,
                 std::vector<double>* trace) {
  const Eigen::Index k = x.cols();
  IrlsOutcome out;
  out.beta = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(x.rows());
  double current = objective(eta, y, out.beta, ridge);
  Eigen::MatrixXd penalty = Eigen::MatrixXd::Identity(k, k) * ridge;
  penalty(0, 0) = 0.0;

  for (std::size_t iter = 0;; ++iter) {
    const Eigen::VectorXd g = gradient(x, y, eta, out.beta, ridge);
    out.gradient_norm = g.lpNorm<Eigen::Infinity>();
    out.iterations = iter;
    if (out.gradient_norm <= config.tolerance) return out;
    if (iter >= config.max_iterations) {
      throw ConvergenceError("train_logistic: no convergence after " + std::to_string(iter) +
                                 " iterations (gradient max-norm " + format_double(out.gradient_norm) + ")",
                             out.gradient_norm);
    }

    Eigen::VectorXd w(x.rows());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = exact_sigmoid(eta(i));
      w(i) = mu * (1.0 - mu);
    }
    const Eigen::MatrixXd hessian = x.transpose() * (x.array().colwise() * w.array()).matrix() + penalty;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    Eigen::VectorXd step = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || !ldlt.isPositive()) {
      if (ridge == 0.0) {
        out.diverged = true;
        return out;
      }
      throw ConvergenceError("train_logistic: singular Hessian", out.gradient_norm);
    }

    // Step halving until the penalized likelihood does not decrease.
    double t = 1.0;
    Eigen::VectorXd candidate;
    Eigen::VectorXd candidate_eta;
    double value = current;
    bool accepted = false;
    for (int halvings = 0; halvings < 40; ++halvings, t *= 0.5) {
      candidate = out.beta + t * step;
      candidate_eta = x * candidate;
      value = objective(candidate_eta, y, candidate, ridge);
      if (value >= current - 1e-13 * (1.0 + std::abs(current))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw ConvergenceError("train_logistic: line search failed (gradient max-norm " +
                                 format_double(out.gradient_norm) + ")",
                             out.gradient_norm);
    }
    out.beta = candidate;
    eta = candidate_eta;
    current = value;
    if (trace) trace->push_back(current);
    if (ridge == 0.0 && eta.lpNorm<Eigen::Infinity>() > kSeparationLinearLimit) {
      out.diverged = true;
      return out;
    }
  }
}

}  // namespace

Design Design::select_rows(std::span<const std::size_t> rows) const {
  Design out;
  out.names = names;
  const std::size_t p = cols();
  out.x.reserve(rows.size() * p);
  out.y.reserve(rows.size());
  for (auto r : rows) {
    out.x.insert(out.x.end(), x.begin() + static_cast<std::ptrdiff_t>(r * p),
                 x.begin() + static_cast<std::ptrdiff_t>((r + 1) * p));
    out.y.push_back(y[r]);
  }
  return out;
}

Design Design::select_cols(std::span<const std::size_t> columns) const {
  Design out;
  for (auto c : columns) out.names.push_back(names.at(c));
  out.y = y;
  out.x.reserve(rows() * columns.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (auto c : columns) out.x.push_back(at(r, c));
  }
  return out;
}

void Design::validate() const {
  if (x.size() != rows() * cols()) throw Error("design: matrix size does not match rows x columns");
  for (double v : x) {
    if (!std::isfinite(v)) throw Error("design: non-finite feature value");
  }
}

void LogisticConfig::validate() const {
  if (!(tolerance > 0.0)) throw Error("logistic: tolerance must be positive");
  if (!(ridge >= 0.0)) throw Error("logistic: ridge must be non-negative");
}

double LogisticModel::linear(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw Error("predict: expected " + std::to_string(weights.size()) + " features, got " + std::to_string(x.size()));
  }
  double eta = intercept;
  for (std::size_t j = 0; j < x.size(); ++j) eta += weights[j] * x[j];
  return eta;
}

LogisticModel train_logistic(const Design& data, const LogisticConfig& config, std::vector<double>* objective_trace) {
  config.validate();
  data.validate();
  check_both_classes(data.y, "train_logistic");
  const Eigen::MatrixXd x = with_intercept(data);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.rows()));
  for (std::size_t i = 0; i < data.rows(); ++i) y(static_cast<Eigen::Index>(i)) = data.y[i];

  double ridge = config.ridge;
  if (objective_trace) objective_trace->clear();
  IrlsOutcome outcome = irls(x, y, ridge, config, objective_trace);
  if (outcome.diverged) {
    ridge = kMinimumRidge;
    if (objective_trace) objective_trace->clear();
    outcome = irls(x, y, ridge, config, objective_trace);
  }

  LogisticModel model;
  model.names = data.names;
  model.intercept = outcome.beta(0);
  model.weights.assign(outcome.beta.data() + 1, outcome.beta.data() + outcome.beta.size());
  for (double w : model.weights) {
    if (!std::isfinite(w)) throw ConvergenceError("train_logistic: non-finite weight", outcome.gradient_norm);
  }
  model.info.iterations = outcome.iterations;
  model.info.gradient_norm = outcome.gradient_norm;
  model.info.ridge = ridge;
  return model;
}

std::vector<double> logistic_gradient(const LogisticModel& model, const Design& data, double ridge) {
  const std::size_t p = data.cols();
  std::vector<double> g(p + 1, 0.0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto row = data.row(i);
    const double residual = data.y[i] - exact_sigmoid(model.linear(row));
    g[0] += residual;
    for (std::size_t j = 0; j < p; ++j) g[j + 1] += residual * row[j];
  }
  for (std::size_t j = 0; j < p; ++j) g[j + 1] -= ridge * model.weights[j];
  return g;
}

double penalized_log_likelihood(const LogisticModel& model, const Design& data, double ridge) {
  double ll = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double eta = model.linear(data.row(i));
    ll += data.y[i] * eta - softplus(eta);
  }
  double sq = 0.0;
  for (double w : model.weights) sq += w * w;
  return ll - 0.5 * ridge * sq;
}

double StumpEnsemble::margin(std::span<const double> x) const {
  if (x.size() != names.size()) {
    throw Error("predict: expected " + std::to_string(names.size()) + " features, got " + std::to_string(x.size()));
  }
  double f = 0.0;
  for (const auto& s : rounds) f += s.alpha * s.vote(x);
  return f;
}

StumpEnsemble train_adaboost(const Design& data, std::size_t rounds) {
  data.validate();
  check_both_classes(data.y, "train_adaboost");
  if (rounds < 1) throw Error("train_adaboost: rounds must be at least 1");
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  if (p == 0) throw Error("train_adaboost: needs at least one feature");

  std::vector<int> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = data.y[i] == 1 ? 1 : -1;

  std::vector<std::vector<std::size_t>> order(p, std::vector<std::size_t>(n));
  for (std::size_t j = 0; j < p; ++j) {
    std::iota(order[j].begin(), order[j].end(), 0);
    std::stable_sort(order[j].begin(), order[j].end(),
                     [&](std::size_t a, std::size_t b) { return data.at(a, j) < data.at(b, j); });
  }

  StumpEnsemble model;
  model.names = data.names;
  std::vector<double> weight(n, 1.0 / static_cast<double>(n));
  std::vector<double> margin(n, 0.0);

  for (std::size_t round = 0; round < rounds; ++round) {
    Stump best;
    double best_error = 2.0;
    for (std::size_t j = 0; j < p; ++j) {
      // Threshold below everything: all rows vote +1, error = weight of goods.
      double error_plus = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (target[i] < 0) error_plus += weight[i];
      }
      const auto& idx = order[j];
      std::size_t pos = 0;
      while (pos < n) {
        const double value = data.at(idx[pos], j);
        std::size_t end = pos;
        while (end < n && data.at(idx[end], j) == value) {
          error_plus += target[idx[end]] > 0 ? weight[idx[end]] : -weight[idx[end]];
          ++end;
        }
        if (end == n) break;
        const double threshold = 0.5 * (value + data.at(idx[end], j));
        const double error_minus = 1.0 - error_plus;
        if (error_plus < best_error) {
          best_error = error_plus;
          best = {j, data.names[j], threshold, 1, 0.0, error_plus};
        }
        if (error_minus < best_error) {
          best_error = error_minus;
          best = {j, data.names[j], threshold, -1, 0.0, error_minus};
        }
        pos = end;
      }
    }
    if (best_error >= 0.5) {
      if (round == 0) throw Error("train_adaboost: no stump beats a weighted error of 0.5");
      break;
    }
    const double eps = std::max(best_error, 0.0);
    const double clamped = std::max(eps, 1e-10);
    best.weighted_error = eps;
    best.alpha = 0.5 * std::log((1.0 - clamped) / clamped);
    model.rounds.push_back(best);

    double sum = 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int vote = best.vote(data.row(i));
      margin[i] += best.alpha * vote;
      if (target[i] * margin[i] <= 0.0) ++wrong;
      weight[i] *= std::exp(-best.alpha * target[i] * vote);
      sum += weight[i];
    }
    double renormalized = 0.0;
    for (auto& w : weight) {
      w /= sum;
      renormalized += w;
    }
    model.training_error.push_back(static_cast<double>(wrong) / static_cast<double>(n));
    model.weight_sums.push_back(renormalized);
    if (eps == 0.0) break;
  }
  model.info.iterations = model.rounds.size();
  return model;
}

double predict(const LogisticModel& model, std::span<const double> x) { return sigmoid(model.linear(x)); }

double predict(const StumpEnsemble& model, std::span<const double> x) { return sigmoid(2.0 * model.margin(x)); }

double predict(const Model& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, model);
}

std::vector<double> predict_all(const Model& model, const Design& data) {
  std::vector<double> out;
  out.reserve(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out.push_back(predict(model, data.row(i)));
  return out;
}

const std::vector<std::string>& feature_names(const Model& model) {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.names; }, model);
}

TrainingInfo& training_info(Model& model) {
  return std::visit([](auto& m) -> TrainingInfo& { return m.info; }, model);
}

const TrainingInfo& training_info(const Model& model) {
  return std::visit([](const auto& m) -> const TrainingInfo& { return m.info; }, model);
}

double ModelBundle::predict(std::span<const double> x, int month) const {
  if (models.empty()) throw Error("model bundle is empty");
  if (!monthly()) return models::predict(models.front(), x);
  if (rule == CombineRule::kAverage) {
    double sum = 0.0;
    for (const auto& m : models) sum += models::predict(m, x);
    return sum / 12.0;
  }
  if (month < 1 || month > 12) throw Error("model bundle: month " + std::to_string(month) + " out of range");
  return models::predict(models[static_cast<std::size_t>(month - 1)], x);
}

ModelBundle single_model(Model model) {
  ModelBundle bundle;
  bundle.models.push_back(std::move(model));
  return bundle;
}

ModelBundle monthly_ensemble(const Design& data, std::span<const int> months, const Trainer& trainer,
                             CombineRule rule) {
  if (months.size() != data.rows()) throw Error("monthly_ensemble: one month per row required");
  static constexpr const char* kNames[] = {"January", "February", "March",     "April",   "May",      "June",
                                           "July",    "August",   "September", "October", "November", "December"};
  std::vector<std::vector<std::size_t>> slices(12);
  for (std::size_t i = 0; i < months.size(); ++i) {
    if (months[i] < 1 || months[i] > 12) throw Error("monthly_ensemble: month out of range");
    slices[static_cast<std::size_t>(months[i] - 1)].push_back(i);
  }
  ModelBundle bundle;
  bundle.rule = rule;
  for (std::size_t m = 0; m < 12; ++m) {
    std::size_t bad = 0;
    for (auto i : slices[m]) bad += data.y[i] == 1;
    if (bad == 0 || bad == slices[m].size()) {
      throw Error(std::string("monthly_ensemble: ") + kNames[m] + " slice lacks a class");
    }
    Model model = trainer(data.select_rows(slices[m]));
    training_info(model).strategy = "monthly_ensemble";
    training_info(model).window = "months=" + std::to_string(m + 1);
    bundle.models.push_back(std::move(model));
  }
  return bundle;
}

CleaningResult clean_and_retrain(const Trainer& trainer, const Design& data, double threshold) {
  if (!(threshold >= 0.0 && threshold < 0.5)) throw Error("clean_and_retrain: threshold must be in [0, 0.5)");
  Model first = trainer(data);
  CleaningResult result{first, first, {}, {}};
  std::vector<std::size_t> kept;
  std::size_t kept_bad = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double p_bad = predict(first, data.row(i));
    const double p_true = data.y[i] == 1 ? p_bad : 1.0 - p_bad;
    if (p_true < threshold) {
      result.removed.push_back(i);
    } else {
      kept.push_back(i);
      kept_bad += data.y[i] == 1;
    }
  }
  if (result.removed.empty()) return result;
  if (kept_bad == 0 || kept_bad == kept.size()) {
    result.warning = "cleaning would remove every record of a class; keeping the first-pass model";
    result.removed.clear();
    return result;
  }
  result.model = trainer(data.select_rows(kept));
  return result;
}

SelectionResult forward_select(const std::vector<Candidate>& candidates, const std::vector<Fold>& folds,
                               const Trainer& trainer, double epsilon) {
  SelectionResult result;
  if (candidates.empty() || folds.empty()) return result;
  for (const auto& fold : folds) {
    if (fold.train.cols() != candidates.size() || fold.valid.cols() != candidates.size()) {
      throw Error("forward_select: fold columns do not match the candidate list");
    }
  }
  // An intercept-only model scores every record alike.
  double current = 0.5;
  result.baseline_auc = current;
  std::vector<std::size_t> chosen;
  std::vector<bool> used(candidates.size(), false);

  while (chosen.size() < candidates.size()) {
    SelectionStep step;
    std::optional<std::size_t> best;
    double best_auc = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      std::vector<std::size_t> columns = chosen;
      columns.push_back(c);
      double sum = 0.0;
      for (const auto& fold : folds) {
        const Model model = trainer(fold.train.select_cols(columns));
        const Design valid = fold.valid.select_cols(columns);
        sum += evaluation::auc(predict_all(model, valid), valid.y).auc;
      }
      const double mean = sum / static_cast<double>(folds.size());
      step.evaluated.emplace_back(candidates[c].name, mean);
      const bool better =
          !best || mean > best_auc ||
          (mean == best_auc && (candidates[c].iv > candidates[*best].iv ||
                                (candidates[c].iv == candidates[*best].iv && candidates[c].name < candidates[*best].name)));
      if (better) {
        best = c;
        best_auc = mean;
      }
    }
    if (!best || best_auc - current <= epsilon) break;
    used[*best] = true;
    chosen.push_back(*best);
    current = best_auc;
    step.added = candidates[*best].name;
    step.mean_auc = best_auc;
    result.selected.push_back(candidates[*best].name);
    result.trace.push_back(std::move(step));
  }
  return result;
}

namespace {

std::string rule_name(CombineRule rule) { return rule == CombineRule::kAverage ? "average" : "route"; }

void write_info(std::string& out, const TrainingInfo& info) {
  out += "strategy\t" + info.strategy + "\n";
  out += "window\t" + info.window + "\n";
  out += "iterations\t" + std::to_string(info.iterations) + "\n";
  out += "gradient_norm\t" + format_double(info.gradient_norm) + "\n";
  out += "ridge\t" + format_double(info.ridge) + "\n";
}

double real(const std::string& text) {
  double v = 0.0;
  if (!parse_double(text, v)) throw ParseError("model: bad number '" + text + "'");
  return v;
}

long long integer(const std::string& text) {
  long long v = 0;
  if (!parse_int(text, v)) throw ParseError("model: bad integer '" + text + "'");
  return v;
}

struct Lines {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  const std::vector<std::string>& next() {
    if (pos >= rows.size()) throw ParseError("model: unexpected end of file");
    return rows[pos++];
  }
};

bool read_info_field(TrainingInfo& info, const std::vector<std::string>& f) {
  const std::string value = f.size() > 1 ? f[1] : std::string();
  if (f[0] == "strategy") info.strategy = value;
  else if (f[0] == "window") info.window = value;
  else if (f[0] == "iterations") info.iterations = static_cast<std::size_t>(integer(value));
  else if (f[0] == "gradient_norm") info.gradient_norm = real(value);
  else if (f[0] == "ridge") info.ridge = real(value);
  else return false;
  return true;
}

Model read_model(Lines& in) {
  const auto& head = in.next();
  if (head.size() != 2 || head[0] != "model") throw ParseError("model: expected 'model <kind>'");
  if (head[1] == "logistic") {
    LogisticModel m;
    while (true) {
      const auto& f = in.next();
      if (f[0] == "end") break;
      if (read_info_field(m.info, f)) continue;
      if (f[0] == "intercept" && f.size() == 2) {
        m.intercept = real(f[1]);
      } else if (f[0] == "weight" && f.size() == 3) {
        m.names.push_back(f[1]);
        m.weights.push_back(real(f[2]));
      } else {
        throw ParseError("model: unexpected line '" + f[0] + "'");
      }
    }
    return m;
  }
  if (head[1] == "adaboost") {
    StumpEnsemble m;
    while (true) {
      const auto& f = in.next();
      if (f[0] == "end") break;
      if (read_info_field(m.info, f)) continue;
      if (f[0] == "feature" && f.size() == 2) {
        m.names.push_back(f[1]);
      } else if (f[0] == "round" && f.size() == 9) {
        Stump s;
        s.name = f[1];
        s.feature = static_cast<std::size_t>(integer(f[2]));
        s.threshold = real(f[3]);
        s.polarity = static_cast<int>(integer(f[4]));
        s.alpha = real(f[5]);
        s.weighted_error = real(f[6]);
        m.rounds.push_back(s);
        m.training_error.push_back(real(f[7]));
        m.weight_sums.push_back(real(f[8]));
      } else {
        throw ParseError("model: unexpected line '" + f[0] + "'");
      }
    }
    return m;
  }
  throw ParseError("model: unknown kind '" + head[1] + "'");
}

}  // namespace

std::string write_model(const Model& model) {
  std::string out;
  if (const auto* lr = std::get_if<LogisticModel>(&model)) {
    out += "model\tlogistic\n";
    write_info(out, lr->info);
    out += "intercept\t" + format_double(lr->intercept) + "\n";
    for (std::size_t j = 0; j < lr->weights.size(); ++j) {
      out += "weight\t" + lr->names[j] + "\t" + format_double(lr->weights[j]) + "\n";
    }
  } else {
    const auto& ab = std::get<StumpEnsemble>(model);
    out += "model\tadaboost\n";
    write_info(out, ab.info);
    for (const auto& name : ab.names) out += "feature\t" + name + "\n";
    for (std::size_t r = 0; r < ab.rounds.size(); ++r) {
      const auto& s = ab.rounds[r];
      out += "round\t" + s.name + "\t" + std::to_string(s.feature) + "\t" + format_double(s.threshold) + "\t" +
             std::to_string(s.polarity) + "\t" + format_double(s.alpha) + "\t" + format_double(s.weighted_error) +
             "\t" + format_double(ab.training_error[r]) + "\t" + format_double(ab.weight_sums[r]) + "\n";
    }
  }
  out += "end\n";
  return out;
}

std::string write_bundle(const ModelBundle& bundle) {
  std::string out = "bundle\t" + std::string(bundle.monthly() ? "monthly" : "single") + "\t" +
                    rule_name(bundle.rule) + "\t" + std::to_string(bundle.models.size()) + "\n";
  for (const auto& m : bundle.models) out += write_model(m);
  return out;
}

ModelBundle read_bundle(const std::string& text) {
  Lines in;
  for (auto& line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) in.rows.push_back(split(line, '\t'));
  }
  const auto& head = in.next();
  if (head.size() != 4 || head[0] != "bundle") throw ParseError("model: expected 'bundle' header");
  ModelBundle bundle;
  if (head[2] == "average") bundle.rule = CombineRule::kAverage;
  else if (head[2] == "route") bundle.rule = CombineRule::kRouteByMonth;
  else throw ParseError("model: unknown combine rule '" + head[2] + "'");
  const auto count = integer(head[3]);
  if (count != 1 && count != 12) throw ParseError("model: bundle must hold 1 or 12 models");
  for (long long i = 0; i < count; ++i) bundle.models.push_back(read_model(in));
  if (in.pos != in.rows.size()) throw ParseError("model: trailing content after bundle");
  return bundle;
}

}  // namespace scorecard::models
