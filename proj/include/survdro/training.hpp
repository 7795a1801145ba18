#pragma once

#include <span>
#include <string>
#include <vector>

#include "survdro/loss_graph.hpp"
#include "survdro/metrics.hpp"

namespace survdro {

enum class OptimizerKind { Sgd, Adam };
enum class RegularizerKind { None, Individual, Group, CensoringIndividual, CensoringGroup };

struct TrainConfig {
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  int max_iterations = 500;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  RegularizerKind regularizer = RegularizerKind::None;
  std::vector<double> alpha_grid;
  int batch_size = 0;  // 0 = full batch; only plain ERM honors minibatches
  double gamma = 0.01;

  void validate() const {
    // zero is allowed so callers can freeze parameters for diagnostics
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be nonnegative");
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  }
};

struct TrainStep {
  int iteration = 0;
  double objective = 0.0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double eta_prime = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainStep> history;
};

// Plain SGD or Adam(0.9, 0.999, 1e-8).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, Eigen::Index n)
      : kind_(kind), lr_(lr), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (kind_ == OptimizerKind::Sgd) {
      params -= lr_ * grad;
      return;
    }
    ++t_;
    m_ = 0.9 * m_ + 0.1 * grad;
    v_ = 0.999 * v_ + 0.001 * grad.cwiseProduct(grad);
    double mhat = 1.0 - std::pow(0.9, t_);
    double vhat = 1.0 - std::pow(0.999, t_);
    params -= lr_ * (m_ / mhat).cwiseQuotient(((v_ / vhat).cwiseSqrt().array() + 1e-8).matrix());
  }

 private:
  OptimizerKind kind_;
  double lr_;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

// Gradient descent on the average loss.
TrainResult train_erm(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                      const TrainConfig& cfg);

// Average loss + lambda * (training-set fairness term); the penalty follows
// the evaluation-metric formulas, made differentiable through the clamped
// ReLU terms. Group kinds require `partition`.
TrainResult train_regularized(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                              const TrainConfig& cfg, const GroupColumn* partition);

struct TuneCandidate {
  std::string label;
  double val_ctd = 0.0;
  double val_fairness = 0.0;
};

struct TuneSelection {
  int index = -1;
  bool rule_satisfied = false;
};

// The 5%-degradation rule: among candidates with validation ctd >=
// 0.95 * reference, pick the smallest validation fairness value; when none
// qualifies, fall back to the highest-ctd candidate and flag it.
TuneSelection tune(std::span<const TuneCandidate> candidates, double reference_ctd);

void write_history_csv(const std::string& path, std::span<const TrainStep> history);

// ---------------------------------------------------------------------------
// Templated objective used by train_regularized and by the gradient-check
// suites (the same expression runs on doubles and on the tape).

namespace detail {

template <class S>
std::vector<S> breslow_hazard_t(std::span<const double> y, std::span<const int> ev,
                                std::span<const S> scores, const TimeGrid& grid) {
  std::vector<S> hazard;
  hazard.reserve(static_cast<std::size_t>(grid.size()));
  for (int l = 1; l <= grid.size(); ++l) {
    double t = grid.point(l);
    int deaths = 0;
    S risk = constant_like(scores[0], 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (ev[i] != 0 && y[i] == t) ++deaths;
      if (y[i] >= t) risk = risk + exp(scores[i]);
    }
    hazard.push_back(static_cast<double>(deaths) / risk);
  }
  return hazard;
}

// Survival outcomes per subject at time t for the penalty terms.
template <class S>
std::vector<S> survival_outcomes_t(const SurvivalDataset& ds, const ModelSpec& spec,
                                   const LossSpec& loss, std::span<const S> theta, double t) {
  ThetaSpanAt<S> theta_at{theta};
  std::vector<S> out;
  out.reserve(static_cast<std::size_t>(ds.size()));
  if (loss.family == LossFamily::DeepHit) {
    const TimeGrid& grid = loss.deephit.grid;
    int idx = (t < grid.points.front()) ? 0 : grid.quantize(t);  // points at or before t
    const int m = grid.size();
    for (int i = 0; i < ds.size(); ++i) {
      std::vector<S> pmf = forward_simplex_t<S>(spec, theta_at, ds.features.row(i).transpose());
      S mass = constant_like(pmf[0], 0.0);
      for (int delta = 0; delta < loss.delta_max; ++delta)
        for (int l = 0; l < idx; ++l) mass = mass + pmf[static_cast<std::size_t>(delta * m + l)];
      out.push_back(1.0 - mass);
    }
    return out;
  }
  // proportional hazards: S(t|x) = exp(-H0(t) exp(f(x)))
  std::vector<double> y(ds.times.data(), ds.times.data() + ds.size());
  std::vector<int> ev(ds.events.data(), ds.events.data() + ds.size());
  std::vector<S> scores;
  scores.reserve(static_cast<std::size_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i)
    scores.push_back(forward_scalar_t<S>(spec, theta_at, ds.features.row(i).transpose()));
  TimeGrid grid = event_time_grid(ds);
  std::vector<S> hazard = breslow_hazard_t<S>(y, ev, scores, grid);
  int idx = (t < grid.points.front()) ? 0 : grid.quantize(t);
  S cumulative = constant_like(scores[0], 0.0);
  for (int l = 0; l < idx; ++l) cumulative = cumulative + hazard[static_cast<std::size_t>(l)];
  for (int i = 0; i < ds.size(); ++i) {
    if (idx == 0)
      out.push_back(constant_like(scores[0], 1.0));
    else
      out.push_back(exp(-(cumulative * exp(scores[static_cast<std::size_t>(i)]))));
  }
  return out;
}

}  // namespace detail

template <class S>
S regularized_objective_t(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                          const TrainConfig& cfg, const GroupColumn* partition,
                          std::span<const S> theta) {
  std::vector<int> rows = all_rows(ds);
  std::vector<S> losses = pointwise_losses<S>(ds, rows, rows, true, spec, theta, {}, loss);
  S base = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) base = base + losses[i];
  base = base / static_cast<double>(losses.size());
  if (cfg.regularizer == RegularizerKind::None || cfg.lambda == 0.0) return base;

  if ((cfg.regularizer == RegularizerKind::Group ||
       cfg.regularizer == RegularizerKind::CensoringGroup) &&
      partition == nullptr)
    throw ConfigError("group fairness regularizers require a partition");

  std::vector<double> times = observed_time_percentiles(ds);
  std::vector<double> y(ds.times.data(), ds.times.data() + ds.size());
  std::vector<int> ev(ds.events.data(), ds.events.data() + ds.size());

  S penalty = detail::constant_like(losses[0], 0.0);
  if (cfg.regularizer == RegularizerKind::Individual ||
      cfg.regularizer == RegularizerKind::Group) {
    if (loss.family == LossFamily::DeepHit) {
      for (double t : times) {
        std::vector<S> outcome = detail::survival_outcomes_t<S>(ds, spec, loss, theta, t);
        penalty = penalty + (cfg.regularizer == RegularizerKind::Individual
                                 ? individual_unfairness<S>(outcome, ds.features, cfg.gamma)
                                 : group_unfairness<S>(outcome, partition->ids,
                                                       partition->group_count()));
      }
      penalty = penalty / static_cast<double>(times.size());
    } else {
      // partial hazards for proportional-hazards families
      detail::ThetaSpanAt<S> theta_at{theta};
      std::vector<S> outcome;
      outcome.reserve(static_cast<std::size_t>(ds.size()));
      for (int i = 0; i < ds.size(); ++i)
        outcome.push_back(exp(forward_scalar_t<S>(spec, theta_at, ds.features.row(i).transpose())));
      penalty = cfg.regularizer == RegularizerKind::Individual
                    ? individual_unfairness<S>(outcome, ds.features, cfg.gamma)
                    : group_unfairness<S>(outcome, partition->ids, partition->group_count());
    }
  } else {
    std::vector<int> ones(static_cast<std::size_t>(ds.size()), 0);
    std::span<const int> ids =
        cfg.regularizer == RegularizerKind::CensoringGroup ? std::span<const int>(partition->ids)
                                                           : std::span<const int>(ones);
    bool within = cfg.regularizer == RegularizerKind::CensoringGroup;
    for (double t : times) {
      std::vector<S> outcome = detail::survival_outcomes_t<S>(ds, spec, loss, theta, t);
      penalty = penalty + censoring_unfairness<S>(y, ev, outcome, ds.features, cfg.gamma, ids, within);
    }
    penalty = penalty / static_cast<double>(times.size());
  }
  return base + cfg.lambda * penalty;
}

}  // namespace survdro
