#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "survdro/autodiff.hpp"
#include "survdro/dataset.hpp"
#include "survdro/models.hpp"

namespace survdro {

enum class AdjacencyKind { Cox, DeepHit, None };

// Which other points enter a point's individual loss. Censored points have an
// empty adjacency set for every kind. Cox: later-or-equal observed times.
// DeepHit: strictly later quantized time index (the ranking sum is strict).
std::vector<int> adjacency_indices(double y, int event, std::span<const double> candidate_y,
                                   AdjacencyKind kind, const TimeGrid* grid);

struct DeepHitConfig {
  double beta = 1.0;   // in [0, 1]
  double sigma = 0.1;  // > 0
  TimeGrid grid;
  int population = 0;                 // n used in the 1/n ranking weight
  std::vector<double> event_weights;  // per-event ranking weights (competing risks), default 1

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in [0, 1]");
    if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
    if (population < 1) throw ValidationError("ranking weight population must be >= 1");
  }
  double event_weight(int event) const {
    if (event_weights.empty()) return 1.0;
    return event_weights.at(static_cast<std::size_t>(event - 1));
  }
};

namespace detail {

inline double constant_like(double, double c) { return c; }
inline ad::Var constant_like(ad::Var exemplar, double c) { return exemplar.tape->constant(c); }

template <class S>
double max_value(std::span<const S> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& x : xs) m = std::max(m, detail::value_of(x));
  return m;
}

}  // namespace detail

// log(sum exp(x)) with max subtraction; the pivot enters as a constant, which
// leaves the gradient exact.
template <class S>
S log_sum_exp(std::span<const S> xs) {
  double pivot = detail::max_value(xs);
  S total = exp(xs[0] - pivot);
  for (std::size_t i = 1; i < xs.size(); ++i) total = total + exp(xs[i] - pivot);
  return log(total) + pivot;
}

// Negative log partial-likelihood contribution of one point given the scores
// of its adjacency set. Zero for censored points and for an empty risk set.
template <class S>
S cox_individual_loss(int event, S score_self, std::span<const S> score_adjacent) {
  if (event == 0 || score_adjacent.empty()) return detail::constant_like(score_self, 0.0);
  std::vector<S> all;
  all.reserve(score_adjacent.size() + 1);
  all.push_back(score_self);
  all.insert(all.end(), score_adjacent.begin(), score_adjacent.end());
  return log_sum_exp<S>(all) - score_self;
}

// Vectorized per-point Cox losses for `query` points whose risk sets are taken
// from `reference`. When the query points themselves belong to the reference
// (the un-split loss), pass self_in_reference = true; the tie-inclusive suffix
// sum then already contains the point's own exp(score). Shared suffix sums of
// exp(score - pivot) keep this O((q + r) log r) instead of O(q * r).
template <class S>
std::vector<S> cox_pointwise_losses(std::span<const double> y_query, std::span<const int> ev_query,
                                    std::span<const S> f_query, std::span<const double> y_ref,
                                    std::span<const S> f_ref, bool self_in_reference) {
  const std::size_t nq = y_query.size();
  std::vector<S> losses;
  losses.reserve(nq);
  if (nq == 0) return losses;

  double pivot = std::max(detail::max_value(f_query),
                          f_ref.empty() ? -std::numeric_limits<double>::infinity()
                                        : detail::max_value(f_ref));

  // Reference sorted by descending time; cumulative[k] = sum over the k
  // latest reference points of exp(f - pivot).
  std::vector<int> order(y_ref.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return y_ref[static_cast<std::size_t>(a)] > y_ref[static_cast<std::size_t>(b)]; });
  std::vector<double> sorted_y(order.size());
  std::vector<S> cumulative;
  cumulative.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto idx = static_cast<std::size_t>(order[k]);
    sorted_y[k] = y_ref[idx];
    S term = exp(f_ref[idx] - pivot);
    cumulative.push_back(k == 0 ? term : cumulative.back() + term);
  }

  for (std::size_t q = 0; q < nq; ++q) {
    if (ev_query[q] == 0) {
      losses.push_back(detail::constant_like(f_query[q], 0.0));
      continue;
    }
    // count of reference points with y_ref >= y_query[q]
    auto it = std::partition_point(sorted_y.begin(), sorted_y.end(),
                                   [&](double y) { return y >= y_query[q]; });
    auto count = static_cast<std::size_t>(it - sorted_y.begin());
    if (self_in_reference) {
      if (count == 0)
        throw ValidationError("query point missing from its own reference set");
      losses.push_back(log(cumulative[count - 1]) + pivot - f_query[q]);
    } else if (count == 0) {
      losses.push_back(detail::constant_like(f_query[q], 0.0));  // self-only risk set
    } else {
      losses.push_back(log(exp(f_query[q] - pivot) + cumulative[count - 1]) + pivot - f_query[q]);
    }
  }
  return losses;
}

// (1/n) sum of per-point Cox losses over the whole sample.
template <class S>
S cox_partial_loss_from_scores(std::span<const double> y, std::span<const int> ev, std::span<const S> f) {
  std::vector<S> pointwise = cox_pointwise_losses<S>(y, ev, f, y, f, true);
  S total = pointwise[0];
  for (std::size_t i = 1; i < pointwise.size(); ++i) total = total + pointwise[i];
  return total / static_cast<double>(pointwise.size());
}

// Survival values on the grid from a discrete pmf: out[j] = sum_{l > j} pmf[l],
// j = 1..m (so out[m-1] = 0 and out[0] = 1 - pmf[1]).
template <class S>
std::vector<S> survival_from_pmf(std::span<const S> pmf) {
  std::vector<S> surv(pmf.size(), detail::constant_like(pmf[0], 0.0));
  for (std::size_t j = pmf.size() - 1; j-- > 0;) surv[j] = surv[j + 1] + pmf[j + 1];
  return surv;
}

// One point's DeepHit loss: beta-weighted negative log likelihood plus the
// (1-beta)/n ranking term over the adjacency set. `adjacent_survival` holds
// S_{kappa(y)}(x') for each adjacent point, evaluated at this point's index.
template <class S>
S deephit_individual_loss(double y, int event, std::span<const S> pmf,
                          std::span<const S> adjacent_survival, const DeepHitConfig& cfg) {
  cfg.validate();
  int kappa = cfg.grid.quantize_clamped(y);
  std::vector<S> surv = survival_from_pmf(pmf);
  S own_survival = surv[static_cast<std::size_t>(kappa - 1)];
  S nll = event != 0 ? -log_clamped(pmf[static_cast<std::size_t>(kappa - 1)])
                     : -log_clamped(own_survival);
  S loss = cfg.beta * nll;
  if (event != 0 && cfg.beta < 1.0 && !adjacent_survival.empty()) {
    S ranking = exp((own_survival - adjacent_survival[0]) / cfg.sigma);
    for (std::size_t j = 1; j < adjacent_survival.size(); ++j)
      ranking = ranking + exp((own_survival - adjacent_survival[j]) / cfg.sigma);
    loss = loss + ((1.0 - cfg.beta) / static_cast<double>(cfg.population)) * ranking;
  }
  return loss;
}

// Competing-risks generalization. `pmf` has delta_max * m cells laid out event
// major: cell (delta, l) at (delta-1)*m + (l-1). `adjacent_incidence` holds the
// cumulative incidence of this point's event type at its index for each
// adjacent point's features.
template <class S>
S competing_individual_loss(double y, int event, std::span<const S> pmf, int delta_max,
                            std::span<const S> adjacent_incidence, const DeepHitConfig& cfg) {
  cfg.validate();
  const int m = cfg.grid.size();
  if (static_cast<int>(pmf.size()) != delta_max * m)
    throw ValidationError("competing-risks pmf must have delta_max * m cells");
  int kappa = cfg.grid.quantize_clamped(y);
  auto cell = [&](int delta, int l) -> const S& {
    return pmf[static_cast<std::size_t>((delta - 1) * m + (l - 1))];
  };

  S loss = detail::constant_like(pmf[0], 0.0);
  if (event != 0) {
    loss = cfg.beta * -log_clamped(cell(event, kappa));
  } else {
    S mass = detail::constant_like(pmf[0], 0.0);
    for (int delta = 1; delta <= delta_max; ++delta)
      for (int l = 1; l <= kappa; ++l) mass = mass + cell(delta, l);
    loss = cfg.beta * -log_clamped(1.0 - mass);
  }
  if (event != 0 && cfg.beta < 1.0 && !adjacent_incidence.empty()) {
    S own = cell(event, 1);
    for (int l = 2; l <= kappa; ++l) own = own + cell(event, l);
    S ranking = exp((adjacent_incidence[0] - own) / cfg.sigma);
    for (std::size_t j = 1; j < adjacent_incidence.size(); ++j)
      ranking = ranking + exp((adjacent_incidence[j] - own) / cfg.sigma);
    loss = loss + ((1.0 - cfg.beta) * cfg.event_weight(event) /
                   static_cast<double>(cfg.population)) * ranking;
  }
  return loss;
}

// Full Cox negative log likelihood of one point under the piecewise-constant
// baseline hazard exp(log_hazard_l) on (t_{l-1}, t_l]. Expects snapped
// censored times; `integral_prefix[l-1]` = sum_{j<=l} (t_j - t_{j-1}) exp(psi_j).
template <class S>
S cox_full_individual_loss_prepared(double y, int event, S score, std::span<const S> log_hazard,
                                    std::span<const S> integral_prefix, const TimeGrid& grid) {
  int kappa = grid.quantize_observed(y, event != 0);
  if (kappa == 0) return detail::constant_like(score, 0.0);
  S loss = exp(score) * integral_prefix[static_cast<std::size_t>(kappa - 1)];
  if (event != 0) loss = loss - (score + log_hazard[static_cast<std::size_t>(kappa - 1)]);
  return loss;
}

template <class S>
std::vector<S> integral_prefix_from_log_hazard(std::span<const S> log_hazard, const TimeGrid& grid) {
  std::vector<S> prefix;
  prefix.reserve(log_hazard.size());
  for (int l = 1; l <= grid.size(); ++l) {
    S term = (grid.point(l) - grid.origin_or_point(l - 1)) * exp(log_hazard[static_cast<std::size_t>(l - 1)]);
    prefix.push_back(l == 1 ? term : prefix.back() + term);
  }
  return prefix;
}

template <class S>
S cox_full_individual_loss(double y, int event, S score, std::span<const S> log_hazard,
                           const TimeGrid& grid) {
  std::vector<S> prefix = integral_prefix_from_log_hazard(log_hazard, grid);
  return cox_full_individual_loss_prepared<S>(y, event, score, log_hazard, prefix, grid);
}

// Closed-form minimizer of the full Cox loss over the baseline parameters at
// fixed scores: psi_l = log[ d_l / ((t_l - t_{l-1}) sum_{Y_j >= t_l} e^{f_j}) ].
// Requires snapped censored times so every grid point has a nonempty risk set.
Eigen::VectorXd optimal_log_hazard(std::span<const double> y, std::span<const int> ev,
                                   std::span<const double> scores, const TimeGrid& grid);

}  // namespace survdro
