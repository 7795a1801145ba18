#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "survdro/autodiff.hpp"
#include "survdro/dataset.hpp"
#include "survdro/losses.hpp"

namespace survdro {

// Survival curves on a grid plus a scalar risk score per subject (log partial
// hazard for proportional-hazards models, 1 - S(t*) style otherwise).
struct SurvivalPrediction {
  TimeGrid grid;
  Eigen::MatrixXd survival;  // n x m, each row nonincreasing in [0, 1]
  std::vector<double> risk;  // length n

  int size() const { return static_cast<int>(survival.rows()); }
  // Step-function evaluation: S(t) = value at the largest grid point <= t, 1 before t_1.
  double survival_at(int subject, double t) const;
};

struct BreslowBaseline {
  TimeGrid grid;
  std::vector<double> hazard;  // per event time
};

// Discretized baseline hazard d_l / sum_{Y_i >= t_l} exp(f_i).
BreslowBaseline breslow_baseline(const SurvivalDataset& ds, std::span<const double> scores);

// S(t_l | x) = exp(-H0(t_l) exp(score)) on the baseline grid.
std::vector<double> survival_curve(const BreslowBaseline& baseline, double score);

// 25th/50th/75th percentiles of the observed times (linear interpolation).
std::vector<double> observed_time_percentiles(const SurvivalDataset& ds);

// Time-dependent concordance: fraction of comparable pairs ordered correctly
// by predicted survival at the earlier subject's time, with the same tie
// ladder the concordance-imparity tally uses. Throws without comparable pairs.
double concordance_td(const SurvivalDataset& ds, const SurvivalPrediction& pred);

// Integrated IPCW Brier score over [t_1, t_m] (trapezoidal, normalized by the
// span). Censoring survival is Kaplan-Meier on the censoring indicators with
// a left limit for the event term, clamped at 1e-8.
double ibs(const SurvivalDataset& ds, const SurvivalPrediction& pred);

// Worst-case gap between per-group concordance fractions, in percent. Risk is
// a fixed per-subject score. Throws when a group has no valid pair.
double concordance_imparity(const SurvivalDataset& ds, std::span<const double> risk,
                            const GroupColumn& partition);

// Survival-curve variant: risk at each evaluation time is 1 - S(t|x); the CI
// values are averaged across the times.
double concordance_imparity_survival(const SurvivalDataset& ds, const SurvivalPrediction& pred,
                                     const GroupColumn& partition, std::span<const double> times);

// --- fairness metrics (App.-F family) --------------------------------------
// The pair summands are templated so the same formulas run as training-time
// regularizers on the autodiff tape.

template <class S>
S individual_unfairness(std::span<const S> outcome, const Eigen::MatrixXd& features, double gamma) {
  const int n = static_cast<int>(outcome.size());
  S total = detail::constant_like(outcome[0], 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double dist = (features.row(i) - features.row(j)).norm();
      total = total + relu(abs(outcome[static_cast<std::size_t>(i)] - outcome[static_cast<std::size_t>(j)]) -
                           gamma * dist);
    }
  return total;
}

template <class S>
S group_unfairness(std::span<const S> outcome, std::span<const int> group_ids, int group_count) {
  S population = outcome[0];
  for (std::size_t i = 1; i < outcome.size(); ++i) population = population + outcome[i];
  population = population / static_cast<double>(outcome.size());

  S worst = detail::constant_like(outcome[0], 0.0);
  for (int g = 0; g < group_count; ++g) {
    int size = 0;
    S sum = detail::constant_like(outcome[0], 0.0);
    for (std::size_t i = 0; i < outcome.size(); ++i)
      if (group_ids[i] == g) {
        sum = sum + outcome[i];
        ++size;
      }
    if (size == 0) throw ValidationError("group " + std::to_string(g) + " is empty");
    worst = max(worst, abs(sum / static_cast<double>(size) - population));
  }
  return worst;
}

// Sum over censored/uncensored pairs (i in censored, j in uncensored,
// Y_j >= Y_i), normalized by |N_c| * |N_uc|. `within_group` restricts pairs to
// matching group ids (the group variant keeps the population normalizer).
template <class S>
S censoring_unfairness(std::span<const double> y, std::span<const int> ev,
                       std::span<const S> outcome, const Eigen::MatrixXd& features, double gamma,
                       std::span<const int> group_ids, bool within_group) {
  std::vector<int> censored, uncensored;
  for (std::size_t i = 0; i < y.size(); ++i)
    (ev[i] == 0 ? censored : uncensored).push_back(static_cast<int>(i));
  if (censored.empty() || uncensored.empty())
    throw ValidationError("censoring-based fairness needs both censored and uncensored subjects");

  S total = detail::constant_like(outcome[0], 0.0);
  for (int i : censored)
    for (int j : uncensored) {
      if (y[static_cast<std::size_t>(j)] < y[static_cast<std::size_t>(i)]) continue;
      if (within_group && group_ids[static_cast<std::size_t>(i)] != group_ids[static_cast<std::size_t>(j)]) continue;
      double dist = (features.row(i) - features.row(j)).norm();
      total = total + relu(abs(outcome[static_cast<std::size_t>(i)] - outcome[static_cast<std::size_t>(j)]) -
                           gamma * dist);
    }
  return total / (static_cast<double>(censored.size()) * static_cast<double>(uncensored.size()));
}

double fairness_individual(std::span<const double> outcome, const Eigen::MatrixXd& features,
                           double gamma);
double fairness_individual_survival(const SurvivalPrediction& pred, const Eigen::MatrixXd& features,
                                    double gamma, std::span<const double> times);
double fairness_group(std::span<const double> outcome, const GroupColumn& partition);
double fairness_group_survival(const SurvivalPrediction& pred, const GroupColumn& partition,
                               std::span<const double> times);
// Worst |log| ratio of mean outcomes across intersectional cells; empty cells
// are skipped, nonpositive means throw.
double fairness_intersectional(std::span<const double> outcome,
                               std::span<const GroupColumn> partitions);
double fairness_intersectional_survival(const SurvivalPrediction& pred,
                                        std::span<const GroupColumn> partitions,
                                        std::span<const double> times);
double fairness_censoring_individual(const SurvivalDataset& ds, const SurvivalPrediction& pred,
                                     double gamma, std::span<const double> times);
double fairness_censoring_group(const SurvivalDataset& ds, const SurvivalPrediction& pred,
                                const GroupColumn& partition, double gamma,
                                std::span<const double> times);

struct MetricsReport {
  double ctd = 0.0;
  double ibs = 0.0;
  double ci_pct = 0.0;
  double f_i = 0.0;
  double f_g = 0.0;
  double f_cap = 0.0;
  double f_ci = 0.0;
  double f_cg = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
};

// --- shared pairwise tally ---------------------------------------------------
// Ordered-pair concordance counts with the discrete tie ladder; `risk(i, t)`
// is the risk of subject i at the comparison time (the earlier observed time).

struct ConcordanceCounts {
  std::vector<double> numerator;
  std::vector<double> denominator;
};

template <class RiskFn>
ConcordanceCounts concordance_counts(std::span<const double> y, std::span<const int> ev,
                                     std::span<const int> group_ids, int group_count,
                                     RiskFn&& risk) {
  ConcordanceCounts counts;
  counts.numerator.assign(static_cast<std::size_t>(group_count), 0.0);
  counts.denominator.assign(static_cast<std::size_t>(group_count), 0.0);
  const int n = static_cast<int>(y.size());
  for (int i = 0; i < n; ++i) {
    auto gi = static_cast<std::size_t>(group_ids[static_cast<std::size_t>(i)]);
    bool event_i = ev[static_cast<std::size_t>(i)] != 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      bool event_j = ev[static_cast<std::size_t>(j)] != 0;
      double yi = y[static_cast<std::size_t>(i)];
      double yj = y[static_cast<std::size_t>(j)];
      if ((yi < yj && !event_i) || (yj < yi && !event_j) || (yi == yj && !event_i && !event_j))
        continue;
      counts.denominator[gi] += 1.0;
      double t = std::min(yi, yj);
      double ri = risk(i, t);
      double rj = risk(j, t);
      if (yi < yj) {
        if (ri > rj)
          counts.numerator[gi] += 1.0;
        else if (ri == rj)
          counts.numerator[gi] += 0.5;
      } else if (yi > yj) {
        if (ri < rj)
          counts.numerator[gi] += 1.0;
        else if (ri == rj)
          counts.numerator[gi] += 0.5;
      } else {
        if (event_i && event_j) {
          counts.numerator[gi] += (ri == rj) ? 1.0 : 0.5;
        } else if (!event_i && event_j && ri < rj) {
          counts.numerator[gi] += 1.0;
        } else if (event_i && !event_j && ri > rj) {
          counts.numerator[gi] += 1.0;
        } else {
          counts.numerator[gi] += 0.5;
        }
      }
    }
  }
  return counts;
}

}  // namespace survdro
